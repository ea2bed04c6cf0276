"""Bundled golden verdicts and law checks behind ``crlab selftest``."""
from __future__ import annotations

from pathlib import Path

from . import catalog
from .basis import minimal_witnesses, rank_over_pool
from .crl import CrlInstance, classify_crl
from .fuzz import run_laws
from .operators import check_generates, check_reaches
from .specio import agent_set, dump_env, dump_instance, write_json


def _all_reach(agents, basis, env, modality) -> bool:
    return all(check_reaches(a, basis, env, modality).holds for a in agents)


def golden() -> dict:
    """{check name: (expected, observed)} for the worked examples."""
    out = {}
    d = catalog.generates_not_commutative()
    out["generates: big => small"] = (True, check_generates(d["big"], d["small"], d["env"]).holds)
    out["generates: small => big"] = (False, check_generates(d["small"], d["big"], d["env"]).holds)

    d = catalog.never_reaches_transitivity()
    e = d["env"]
    out["never: L1 never reaches L2"] = (True, _all_reach(d["lambda1"], d["lambda2"], e, "never"))
    out["never: L2 never reaches L3"] = (True, _all_reach(d["lambda2"], d["lambda3"], e, "never"))
    out["never: L1 never reaches L3"] = (False, _all_reach(d["lambda1"], d["lambda3"], e, "never"))

    d = catalog.sometimes_reaches_not_commutative()
    e = d["env"]
    out["sometimes: L1 reaches L2"] = (True, _all_reach(d["lambda1"], d["lambda2"], e, "sometimes"))
    out["sometimes: lambda_j never reaches L1"] = (True, check_reaches(d["lambda_j"], d["lambda1"], e, "never").holds)

    d = catalog.sometimes_reaches_transitivity()
    e = d["env"]
    out["sometimes: bar1 reaches L2"] = (True, _all_reach(d["lambda1"], d["lambda2"], e, "sometimes"))
    out["sometimes: L2 reaches L3"] = (True, _all_reach(d["lambda2"], d["lambda3"], e, "sometimes"))
    out["sometimes: bar1 never reaches L3"] = (True, _all_reach(d["lambda1"], d["lambda3"], e, "never"))

    target, pool = catalog.rank_example()
    out["rank of the three-agent example"] = (2, rank_over_pool(target, pool).rank)
    four = catalog.non_uniqueness_set()
    out["minimal witnesses of the four-agent set"] = (2, len(minimal_witnesses(four, four)))

    toy = catalog.two_phase_toy()
    inst = toy["instance"]
    out["two-phase toy is CRL"] = (True, classify_crl(inst).is_crl)
    sub = CrlInstance(inst.env, inst.perf, list(inst.basis), list(inst.basis))
    out["agents inside the basis is not CRL"] = (False, classify_crl(sub).is_crl)
    return out


def selftest(instances: int = 200, seed: int = 0) -> dict:
    g = golden()
    laws = run_laws(instances, seed)
    golden_ok = all(exp == got for exp, got in g.values())
    laws_ok = all(v["violations"] == 0 for v in laws.values())
    return {
        "passed": golden_ok and laws_ok,
        "golden": {k: {"expected": exp, "observed": got, "ok": exp == got} for k, (exp, got) in g.items()},
        "laws": laws,
        "instances": instances,
        "seed": seed,
    }


def export_catalog(directory) -> list:
    """Write the bundled instances as spec files; returns the file names."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    files = {}
    target, pool = catalog.rank_example()
    files["rank_example.json"] = agent_set(target)
    files["pool.json"] = agent_set(pool)
    files["non_uniqueness.json"] = agent_set(catalog.non_uniqueness_set())
    d = catalog.generates_not_commutative()
    files["gnc_small.json"] = agent_set(d["small"])
    files["gnc_big.json"] = agent_set(d["big"])
    files["gnc_env.json"] = dump_env(d["env"])
    toy = catalog.two_phase_toy()
    inst = toy["instance"]
    files["toy.json"] = dump_instance(inst)
    files["toy_inside_basis.json"] = dump_instance(CrlInstance(inst.env, inst.perf, list(inst.basis), list(inst.basis)))
    files["toy_env.json"] = dump_env(inst.env)
    files["toy_basis.json"] = agent_set(inst.basis)
    files["csl_flip.json"] = dump_instance(catalog.csl_flip_instance())
    files["csl_stationary.json"] = dump_instance(catalog.csl_stationary_instance())
    for name, obj in files.items():
        write_json(obj, root / name)
    return sorted(files)
