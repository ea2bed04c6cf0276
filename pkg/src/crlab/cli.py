"""Command-line entry point.

Exit status: 0 when the command ran (whatever the verdict), 2 for malformed
specs or usage errors, 3 when a precondition fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import basis as basis_mod
from . import crl
from .environments import SwitchingSpec, build_gridworld_suite, describe
from .errors import CrlabError, SpecError
from .operators import (
    MODALITIES,
    check_generates,
    check_reaches,
    check_sigma_generates,
    check_uniform_generates,
    construct_generating_basis,
)
from .specio import WORKSPACE_ENV, Workspace, agent_set, dump_instance, dump_switching, frac, write_json


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_perf(p):
    p.add_argument("--gamma", default="9/10", help="discount factor as a rational (default 9/10)")
    p.add_argument("--average", type=int, metavar="T", help="use the finite-horizon average over T steps instead")
    p.add_argument("--truncation", type=int, help="finite depth for discounted values of table agents")


def _perf(args) -> crl.PerformanceSpec:
    if args.average is not None:
        return crl.PerformanceSpec.average(args.average)
    return crl.PerformanceSpec.discounted(frac(args.gamma), args.truncation)


def _q_args(p):
    p.add_argument("--suite", help="switching suite spec (default: build one from --width/--height/--n/--seed)")
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p-switch", default="1/1000")
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--bin-width", type=int, default=1000)
    p.add_argument("--episode-cap", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.15)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--learner-gamma", type=float, default=0.95)
    p.add_argument("--q-init", type=float, default=0.0)
    p.add_argument("--manifest", help="write the JSON run manifest here")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", help=f"spec directory (default ${WORKSPACE_ENV} or .)")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    ap = _Parser(prog="crlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter,
                 epilog=f"Relative spec paths are also looked up in ${WORKSPACE_ENV} when set.")
    sub = ap.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add("check-generates", help="does the basis generate the set in the environment")
    p.add_argument("--basis", required=True)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--env", required=True)

    p = add("check-uniform-generates", help="generation on every history")
    p.add_argument("--basis", required=True)
    p.add_argument("--lambda", dest="lam", required=True)

    p = add("check-sigma-generates", help="generation by a given list of learning rules")
    p.add_argument("--basis", required=True)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--env", help="omit for the uniform check")

    p = add("check-reaches", help="sometimes / never / always reaches")
    p.add_argument("--agent", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--modality", choices=MODALITIES, default="sometimes")
    p.add_argument("--watch", type=int, help="watch prefix for bounded semantics (default horizon/2)")

    p = add("construct-basis", help="k+1 table agents generating the agent but excluding it")
    p.add_argument("--agent", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--spec-out", help="write the constructed basis as an agent-set spec")

    p = add("rank", help="smallest pool subset uniformly generating the target")
    p.add_argument("--target", required=True)
    p.add_argument("--pool", required=True)

    p = add("minimal", help="minimality of a basis, or all minimal witnesses of a target")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--basis")
    g.add_argument("--target")
    p.add_argument("--pool", required=True)

    p = add("universal-fragment", help="every menu distribution available at every history")
    p.add_argument("--basis", required=True)
    p.add_argument("--horizon", type=int, help="explore only to this depth")

    p = add("relate", help="orthogonal / parallel classification of two bases")
    p.add_argument("--b1", required=True)
    p.add_argument("--b2", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--orthogonal", action="store_true")
    g.add_argument("--parallel", action="store_true")

    p = add("value", help="exact performance of an agent")
    p.add_argument("--agent", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--history", help='JSON list of [action, observation] pairs')
    _add_perf(p)

    p = add("optimal", help="exact values and the optimal subset of a finite agent set")
    p.add_argument("--agents", required=True)
    p.add_argument("--env", required=True)
    _add_perf(p)

    p = add("classify-crl", help="is the instance a continual RL problem")
    p.add_argument("--instance", required=True)

    p = add("augment-crl", help="add the optimal agents to the basis and reclassify")
    p.add_argument("--instance", required=True)
    p.add_argument("--spec-out", help="write the augmented instance spec")

    p = add("replans", help="selection changes of the model-based rule to a depth")
    p.add_argument("--basis", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--model", help="model environment (default: the true environment)")
    p.add_argument("--horizon", type=int, required=True)
    _add_perf(p)

    p = add("build-suite", help="generate a gridworld switching suite")
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p-switch", default="1/1000")
    p.add_argument("--spec-out", help="write the suite spec here")

    p = add("describe", help="ASCII maps of a suite")
    p.add_argument("--suite")
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--height", type=int, default=5)
    p.add_argument("--n", type=int, default=10)

    p = add("run-qlearning", help="Monte Carlo Q-learning study on a switching suite")
    _q_args(p)
    p.add_argument("--annealing", choices=("none", "harmonic"), default="none")

    p = add("compare", help="continual vs annealed Q-learning on common random numbers")
    _q_args(p)

    p = add("export-catalog", help="write the bundled example instances as spec files")
    p.add_argument("--dir", required=True)

    p = add("selftest", help="run the bundled law checks and golden examples")
    p.add_argument("--instances", type=int, default=200)
    return ap


def _verdict_report(v) -> dict:
    return v.to_json()


def _suite(args, ws) -> SwitchingSpec:
    if getattr(args, "suite", None):
        return ws.coerce_switching(args.suite)
    return build_gridworld_suite(args.width, args.height, args.n, args.seed, frac(getattr(args, "p_switch", "1/1000")))


def _q_config(args, annealing):
    from .experiments import QLearnerConfig

    return QLearnerConfig(epsilon=args.epsilon, alpha0=args.alpha, annealing=annealing, kappa=args.kappa,
                          gamma=args.learner_gamma, q_init=args.q_init)


def run(args) -> tuple:
    """Execute a parsed command; returns (report dict, csv rows or None)."""
    ws = Workspace(args.workspace)
    cmd = args.command
    if cmd == "check-generates":
        return _verdict_report(check_generates(ws.coerce_agents(args.basis), ws.coerce_agents(args.lam),
                                               ws.coerce_env(args.env))), None
    if cmd == "check-uniform-generates":
        return _verdict_report(check_uniform_generates(ws.coerce_agents(args.basis), ws.coerce_agents(args.lam))), None
    if cmd == "check-sigma-generates":
        env = ws.coerce_env(args.env) if args.env else None
        v = check_sigma_generates(ws.coerce_agents(args.basis), ws.coerce_rules(args.rules),
                                  ws.coerce_agents(args.lam), env, uniform=env is None)
        return _verdict_report(v), None
    if cmd == "check-reaches":
        v = check_reaches(ws.coerce_agent(args.agent), ws.coerce_agents(args.basis), ws.coerce_env(args.env),
                          args.modality, args.watch)
        return {**_verdict_report(v), "modality": args.modality}, None
    if cmd == "construct-basis":
        agent, env = ws.coerce_agent(args.agent), ws.coerce_env(args.env)
        b = construct_generating_basis(agent, env, args.k, args.horizon)
        spec = agent_set(b)
        if args.spec_out:
            write_json(spec, args.spec_out)
        v = check_generates(b, [agent], env)
        from .core import agents_equal
        return {"basis_size": len(b), "generates": v.to_json(), "semantics": v.tag,
                "excludes_agent": all(not agents_equal(x, agent) for x in b), "basis": spec}, None
    if cmd == "rank":
        r = basis_mod.rank_over_pool(ws.coerce_agents(args.target), ws.coerce_agents(args.pool))
        return {**r.to_json(), "semantics": "exact"}, None
    if cmd == "minimal":
        pool = ws.coerce_agents(args.pool)
        if args.basis:
            ok = basis_mod.is_minimal_over_pool(ws.coerce_agents(args.basis), pool)
            return {"minimal": ok, "kind": "pool-minimal", "semantics": "exact"}, None
        w = basis_mod.minimal_witnesses(ws.coerce_agents(args.target), pool)
        names = [[pool[i].name or f"pool[{i}]" for i in combo] for combo in w]
        return {"witnesses": names, "witness_indices": [list(c) for c in w], "count": len(w),
                "kind": "pool-minimal", "semantics": "exact"}, None
    if cmd == "universal-fragment":
        return _verdict_report(basis_mod.is_universal_fragment(ws.coerce_agents(args.basis), depth=args.horizon)), None
    if cmd == "relate":
        b1, b2 = ws.coerce_agents(args.b1), ws.coerce_agents(args.b2)
        if args.orthogonal:
            return {**_verdict_report(basis_mod.are_orthogonal(b1, b2)), "relation": "orthogonal"}, None
        if args.parallel:
            return {**_verdict_report(basis_mod.are_parallel(b1, b2)), "relation": "parallel"}, None
        return basis_mod.relate(b1, b2), None
    if cmd == "value":
        h = tuple(tuple(p) for p in json.loads(args.history)) if args.history else ()
        perf = _perf(args)
        v = crl.compute_value(ws.coerce_agent(args.agent), ws.coerce_env(args.env), perf, h)
        return {"value": [v.numerator, v.denominator], "float": float(v), "perf": perf.to_json(),
                "semantics": "exact"}, None
    if cmd == "optimal":
        agents, env, perf = ws.coerce_agents(args.agents), ws.coerce_env(args.env), _perf(args)
        vals = crl.agent_values(agents, env, perf)
        best = crl.optimal_agents(agents, env, perf)
        ids = [crl.agent_id(a, i) for i, a in enumerate(agents)]
        rows = [(i, float(v), f"{v.numerator}/{v.denominator}") for i, v in zip(ids, vals)]
        report = {"values": {i: [v.numerator, v.denominator] for i, v in zip(ids, vals)},
                  "optimal": [crl.agent_id(a, agents.index(a)) for a in best], "perf": perf.to_json(),
                  "semantics": "exact"}
        return report, [("agent", "value", "exact")] + rows
    if cmd == "classify-crl":
        inst = ws.coerce_instance(args.instance)
        return {**crl.classify_crl(inst).to_json(), "perf": inst.perf.to_json()}, None
    if cmd == "augment-crl":
        inst = crl.augment_with_optimal(ws.coerce_instance(args.instance))
        if args.spec_out:
            write_json(dump_instance(inst), args.spec_out)
        return {**crl.classify_crl(inst).to_json(), "augmented": True, "basis_size": len(inst.basis)}, None
    if cmd == "replans":
        env = ws.coerce_env(args.env)
        model = ws.coerce_env(args.model) if args.model else env
        rule = crl.ModelBasedRule(ws.coerce_agents(args.basis), model, _perf(args))
        return {**crl.count_replans(rule, env, args.horizon).to_json(), "perf": _perf(args).to_json()}, None
    if cmd == "build-suite":
        s = build_gridworld_suite(args.width, args.height, args.n, args.seed, frac(args.p_switch))
        spec = dump_switching(s)
        if args.spec_out:
            write_json(spec, args.spec_out)
        return {"n": s.n, "p_switch": [s.p_switch.numerator, s.p_switch.denominator], "notes": s.notes,
                "seed": args.seed, "spec": None if args.spec_out else spec}, None
    if cmd == "describe":
        s = _suite(args, ws)
        return {"text": describe(s), "notes": s.notes}, None
    if cmd in ("run-qlearning", "compare"):
        from .experiments import compare_variants, run_q_learning, write_manifest

        suite = _suite(args, ws)
        if cmd == "run-qlearning":
            st = run_q_learning(suite, _q_config(args, args.annealing), args.steps, args.runs, args.seed,
                                args.bin_width, args.episode_cap)
            if args.manifest:
                write_manifest(st, args.manifest)
            return st.to_json(), st.csv_rows()
        cmp = compare_variants(suite, [_q_config(args, "harmonic"), _q_config(args, "none")], args.steps,
                               args.runs, args.seed, args.bin_width, args.episode_cap)
        if args.manifest:
            write_manifest(cmp, args.manifest)
        return cmp.to_json(), cmp.csv_rows()
    if cmd == "export-catalog":
        from .selftest import export_catalog
        return {"written": export_catalog(args.dir)}, None
    if cmd == "selftest":
        from .selftest import selftest
        return selftest(args.instances, args.seed), None
    raise SpecError(f"unknown command {cmd!r}")


def _emit(report, rows, args) -> None:
    if args.format == "csv":
        from .experiments.qlearning import write_csv

        if rows is None:
            raise SpecError(f"{args.command} has no tabular output; use --format json")
        if rows and rows[0] == ("agent", "value", "exact"):
            import csv
            import io
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(rows)
            text = buf.getvalue()
        else:
            text = write_csv(rows)
    else:
        text = json.dumps(report, indent=2, default=_json_default) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(x):
    if isinstance(x, Fraction):
        return [x.numerator, x.denominator]
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        report, rows = run(args)
        report = {**report, "command": args.command, "config": _config(args)}
        _emit(report, rows, args)
    except SpecError as exc:
        print(f"crlab: malformed spec: {exc}", file=sys.stderr)
        return 2
    except CrlabError as exc:
        print(f"crlab: precondition failed: {exc}", file=sys.stderr)
        return 3
    if args.command == "selftest" and not report.get("passed", False):
        return 1
    return 0


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("out",)}


if __name__ == "__main__":
    sys.exit(main())
