"""JSON spec files: loaders, dumpers and a named workspace registry.

Probabilities are written as ``[num, den]`` pairs (strings such as "1/3" are
also accepted on input). A distribution may be an action symbol (point mass)
or a mapping from actions to probabilities. Dumped agents and environments
have their states renamed to "0", "1", ..., which preserves behavior.
"""
from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path

from .core import (
    ActionDistribution,
    Agent,
    FsmAgent,
    FsmEnvironment,
    Interface,
    TableAgent,
    as_fraction,
    constant_agent,
    memoryless_agent,
    period_agent,
)
from .crl import CrlInstance, PerformanceSpec
from .environments import CslSchedule, SwitchingSpec, TabularMdp, build_csl_env, build_switching_env
from .errors import SpecError
from .operators import LearningRuleFsm

WORKSPACE_ENV = "CRLAB_WORKSPACE"


def frac(x) -> Fraction:
    if isinstance(x, str) and "/" not in x:
        try:
            return Fraction(int(x))
        except ValueError:
            raise SpecError(f"bad probability {x!r}") from None
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise SpecError(f"bad rational {x!r}") from None


def dump_frac(x) -> list:
    x = Fraction(x)
    return [x.numerator, x.denominator]


def _interface(obj) -> Interface:
    try:
        src = obj["interface"] if "interface" in obj else obj
        return Interface(tuple(src["actions"]), tuple(src["observations"]))
    except (KeyError, TypeError):
        raise SpecError("spec lacks an interface (actions and observations)") from None


def _dump_interface(iface: Interface) -> dict:
    return {"actions": list(iface.actions), "observations": list(iface.observations)}


def load_dist(iface: Interface, d) -> ActionDistribution:
    if isinstance(d, str):
        if d not in iface.actions:
            raise SpecError(f"unknown action {d!r}")
        return ActionDistribution.point(iface.n_actions, iface.action_index(d))
    if isinstance(d, dict):
        unknown = [a for a in d if a not in iface.actions]
        if unknown:
            raise SpecError(f"unknown actions {unknown}")
        return ActionDistribution.from_mapping(iface, {a: frac(p) for a, p in d.items()})
    raise SpecError(f"bad distribution {d!r}")


def dump_dist(iface: Interface, d: ActionDistribution):
    support = [i for i, p in enumerate(d.probs) if p]
    if len(support) == 1:
        return iface.actions[support[0]]
    return {iface.actions[i]: dump_frac(d.probs[i]) for i in support}


def _need(obj, *keys):
    missing = [k for k in keys if k not in obj]
    if missing:
        raise SpecError(f"{obj.get('kind', 'spec')} is missing fields {missing}")


# ----------------------------------------------------------------- agents

def load_agent(obj) -> Agent:
    if not isinstance(obj, dict):
        raise SpecError("an agent spec must be a JSON object")
    kind = obj.get("kind")
    iface = _interface(obj)
    name = obj.get("name")
    if kind == "constant":
        _need(obj, "action")
        return constant_agent(iface, load_dist(iface, obj["action"]), name=name)
    if kind == "period":
        _need(obj, "cycle")
        return period_agent(iface, [load_dist(iface, d) for d in obj["cycle"]], name=name)
    if kind == "memoryless":
        _need(obj, "map")
        m = {(None if k == "" else k): load_dist(iface, d) for k, d in obj["map"].items()}
        return memoryless_agent(iface, m, name=name)
    if kind == "fsm":
        _need(obj, "states", "initial", "output", "step")
        states = [str(s) for s in obj["states"]]
        out = {s: load_dist(iface, obj["output"][s]) for s in states if s in obj["output"]}
        step = obj["step"]

        def nxt(s, a, o):
            row = step.get(s)
            if row is None:
                raise SpecError(f"step table lacks state {s!r}")
            cell = row.get(a, row.get("*"))
            if isinstance(cell, dict):
                cell = cell.get(o, cell.get("*"))
            if cell is None:
                raise SpecError(f"step table lacks ({s!r}, {a!r}, {o!r})")
            return str(cell)

        return FsmAgent(iface, states, str(obj["initial"]), out, nxt, name=name)
    if kind == "table":
        _need(obj, "horizon", "table", "fallback")
        table = {}
        for row in obj["table"]:
            h = tuple(tuple(p) for p in row["history"])
            table[h] = load_dist(iface, row["dist"])
        return TableAgent(iface, int(obj["horizon"]), table, load_dist(iface, obj["fallback"]), name=name)
    raise SpecError(f"unknown agent kind {kind!r}")


def dump_agent(agent: Agent) -> dict:
    iface = agent.interface
    if isinstance(agent, TableAgent):
        rows = [
            {"history": [list(p) for p in iface.decode(code)], "dist": dump_dist(iface, d)}
            for code, d in sorted(agent.table.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]
        return {"kind": "table", "name": agent.name, "interface": _dump_interface(iface), "horizon": agent.horizon,
                "table": rows, "fallback": dump_dist(iface, agent.fallback)}
    # any other finite-state agent: explore its reachable states
    order = [agent.initial_state]
    index = {agent.initial_state: 0}
    k = 0
    while k < len(order):
        x = order[k]
        k += 1
        for a in range(iface.n_actions):
            for o in range(iface.n_observations):
                y = agent.next_state(x, a, o)
                if y not in index:
                    index[y] = len(order)
                    order.append(y)
                    if len(order) > 100_000:
                        raise SpecError("agent has too many reachable states to dump")
    output = {str(i): dump_dist(iface, agent.output(x)) for i, x in enumerate(order)}
    step = {
        str(i): {
            a: {o: str(index[agent.next_state(x, ai, oi)]) for oi, o in enumerate(iface.observations)}
            for ai, a in enumerate(iface.actions)
        }
        for i, x in enumerate(order)
    }
    return {"kind": "fsm", "name": agent.name, "interface": _dump_interface(iface),
            "states": [str(i) for i in range(len(order))], "initial": "0", "output": output, "step": step}


# ------------------------------------------------------------ environments

def load_env(obj) -> FsmEnvironment:
    if not isinstance(obj, dict):
        raise SpecError("an environment spec must be a JSON object")
    kind = obj.get("kind")
    if kind == "switching":
        return build_switching_env(load_switching(obj))
    if kind == "csl":
        return build_csl_env(load_schedule(obj))
    if kind != "env":
        raise SpecError(f"unknown environment kind {kind!r}")
    _need(obj, "states", "initial", "dynamics", "reward")
    iface = _interface(obj)
    states = [str(s) for s in obj["states"]]
    dyn = {}
    for s in states:
        try:
            row = obj["dynamics"][s]
        except KeyError:
            raise SpecError(f"dynamics lack state {s!r}") from None
        dyn[s] = {}
        for a in iface.actions:
            entries = row.get(a, row.get("*"))
            if entries is None:
                raise SpecError(f"dynamics lack ({s!r}, {a!r})")
            dyn[s][a] = [(str(e[0]), e[1], frac(e[2:] if len(e) == 4 else e[2])) for e in entries]
    rew = obj["reward"]
    if isinstance(rew, dict):
        def reward(a, o):
            row = rew.get(a, rew.get("*", {}))
            v = row.get(o, row.get("*", 0)) if isinstance(row, dict) else row
            return frac(v)
    else:
        reward = lambda a, o: frac(rew)  # noqa: E731
    return FsmEnvironment(iface, states, str(obj["initial"]), dyn, reward, name=obj.get("name"))


def dump_env(env: FsmEnvironment) -> dict:
    iface = env.interface
    dyn = {}
    for si in range(len(env.states)):
        dyn[str(si)] = {
            a: [[str(n), iface.observations[o], *dump_frac(p)] for n, o, p in env.outcomes(si, ai)]
            for ai, a in enumerate(iface.actions)
        }
    reward = {a: {o: dump_frac(env.reward(ai, oi)) for oi, o in enumerate(iface.observations)}
              for ai, a in enumerate(iface.actions)}
    return {"kind": "env", "name": env.name, "interface": _dump_interface(iface),
            "states": [str(i) for i in range(len(env.states))], "initial": str(env.initial_state),
            "dynamics": dyn, "reward": reward}


def load_mdp(obj) -> TabularMdp:
    _need(obj, "states", "actions", "start", "transition")
    states = list(obj["states"])
    by_key = {str(s): s for s in states}
    actions = tuple(obj["actions"])

    def st(k):
        if str(k) not in by_key:
            raise SpecError(f"unknown MDP state {k!r}")
        return by_key[str(k)]

    trans, reward = {}, {}
    for s in states:
        row = obj["transition"].get(str(s))
        if row is None:
            raise SpecError(f"transition lacks state {s!r}")
        trans[s] = {a: {st(e[0]): frac(e[1:] if len(e) == 3 else e[1]) for e in row[a]} for a in actions}
    for sk, row in obj.get("reward", {}).items():
        reward[st(sk)] = {a: {st(k): frac(v) for k, v in cells.items()} for a, cells in row.items()}
    return TabularMdp(states, actions, trans, reward, st(obj["start"]), {st(t) for t in obj.get("terminals", [])},
                      name=obj.get("name"), layout=obj.get("layout"))


def dump_mdp(m: TabularMdp) -> dict:
    trans = {str(s): {a: [[s2, *dump_frac(p)] for s2, p in m.transition[s][a].items() if p] for a in m.actions}
             for s in m.states}
    reward = {}
    for s in m.states:
        for a in m.actions:
            for s2 in m.transition[s][a]:
                r = m.r(s, a, s2)
                if r:
                    reward.setdefault(str(s), {}).setdefault(a, {})[str(s2)] = dump_frac(r)
    return {"name": m.name, "states": list(m.states), "actions": list(m.actions), "start": m.start,
            "terminals": sorted(m.terminals, key=str), "transition": trans, "reward": reward, "layout": m.layout}


def load_switching(obj) -> SwitchingSpec:
    _need(obj, "mdps")
    return SwitchingSpec([load_mdp(m) for m in obj["mdps"]], frac(obj.get("p_switch", [1, 1000])),
                         dict(obj.get("notes", {})))


def dump_switching(spec: SwitchingSpec) -> dict:
    return {"kind": "switching", "p_switch": dump_frac(spec.p_switch), "switch_target": "uniform-other",
            "mdps": [dump_mdp(m) for m in spec.mdps], "notes": spec.notes}


def load_schedule(obj) -> CslSchedule:
    _need(obj, "inputs", "labels", "phases")
    phases = []
    for ph in obj["phases"]:
        dist = {(e[0], e[1]): frac(e[2:] if len(e) == 4 else e[2]) for e in ph["dist"]}
        phases.append((dist, ph.get("duration")))
    return CslSchedule(tuple(obj["inputs"]), tuple(obj["labels"]), phases, bool(obj.get("repeat", False)))


def dump_schedule(s: CslSchedule) -> dict:
    return {"kind": "csl", "inputs": list(s.inputs), "labels": list(s.labels), "repeat": s.repeat,
            "phases": [{"dist": [[x, y, *dump_frac(p)] for (x, y), p in d.items()], "duration": dur}
                       for d, dur in s.phases]}


# ------------------------------------------------------------ rules, perf, instances

def load_rule(obj) -> LearningRuleFsm:
    kind = obj.get("kind")
    iface = _interface(obj)
    if kind == "constant-rule":
        return LearningRuleFsm.constant(iface, int(obj["index"]), name=obj.get("name"))
    if kind != "rule":
        raise SpecError(f"unknown rule kind {kind!r}")
    _need(obj, "states", "initial", "select", "step")
    states = [str(s) for s in obj["states"]]
    step = obj["step"]

    def nxt(s, a, o):
        cell = step[s].get(a, step[s].get("*"))
        if isinstance(cell, dict):
            cell = cell.get(o, cell.get("*"))
        if cell is None:
            raise SpecError(f"rule step lacks ({s!r}, {a!r}, {o!r})")
        return str(cell)

    return LearningRuleFsm(iface, states, str(obj["initial"]), nxt, {s: int(obj["select"][s]) for s in states},
                           name=obj.get("name"))


def load_perf(obj) -> PerformanceSpec:
    kind = obj.get("kind")
    if kind == "discounted":
        t = obj.get("truncation")
        return PerformanceSpec.discounted(frac(obj["gamma"]), None if t is None else int(t))
    if kind == "average":
        return PerformanceSpec.average(int(obj["T"]))
    raise SpecError(f"unknown performance kind {kind!r}")


def load_instance(obj, workspace: "Workspace | None" = None) -> CrlInstance:
    _need(obj, "env", "perf", "agents", "basis")
    ws = workspace or Workspace()
    env = ws.coerce_env(obj["env"])
    agents = ws.coerce_agents(obj["agents"])
    named = {a.name: a for a in agents if a.name is not None}
    basis = []
    for b in obj["basis"]:
        if isinstance(b, str):
            if b not in named:
                raise SpecError(f"basis refers to unknown agent {b!r}")
            basis.append(named[b])
        else:
            basis.append(load_agent(b))
    return CrlInstance(env, load_perf(obj["perf"]), agents, basis)


def dump_instance(inst: CrlInstance) -> dict:
    agents = [dump_agent(a) for a in inst.agents]
    for i, a in enumerate(agents):
        if a["name"] is None:
            a["name"] = f"agent{i}"
    names = {id(x): a["name"] for x, a in zip(inst.agents, agents)}
    basis = [names.get(id(b)) or dump_agent(b) for b in inst.basis]
    return {"kind": "crl-instance", "env": dump_env(inst.env), "perf": inst.perf.to_json(), "agents": agents,
            "basis": basis}


# ------------------------------------------------------------------ workspace

def read_json(path) -> object:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"no such spec file: {path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None


class Workspace:
    """Registry of named objects loaded from spec files.

    A reference is a file path, a path with ``#name`` selecting one item of a
    bundle (or one agent of an agent set, by name or index), or a bare name
    already registered. Relative paths are looked up
    in the working directory first, then in the workspace directory.
    """

    def __init__(self, root=None):
        self.root = Path(root or os.environ.get(WORKSPACE_ENV) or ".")
        self.items: dict = {}

    def register(self, name: str, obj) -> None:
        if name in self.items and self.items[name] is not obj:
            raise SpecError(f"duplicate name {name!r} in workspace")
        self.items[name] = obj

    def _path(self, ref: str) -> Path | None:
        for cand in (Path(ref), self.root / ref, self.root / f"{ref}.json"):
            if cand.is_file():
                return cand
        return None

    def raw(self, ref: str):
        if ref in self.items:
            return self.items[ref]
        path_part, _, member = ref.partition("#")
        p = self._path(path_part)
        if p is None:
            raise SpecError(f"cannot resolve reference {ref!r}")
        data = read_json(p)
        if isinstance(data, dict) and data.get("kind") == "bundle":
            for k, v in data.get("items", {}).items():
                self.items.setdefault(k, v)
            if not member:
                raise SpecError(f"{p} is a bundle; select an item with '#name'")
            if member not in data.get("items", {}):
                raise SpecError(f"bundle {p} has no item {member!r}")
            return data["items"][member]
        if member and isinstance(data, dict) and data.get("kind") == "agent-set":
            agents = data.get("agents", [])
            for a in agents:
                if isinstance(a, dict) and a.get("name") == member:
                    return a
            if member.isdigit() and int(member) < len(agents):
                return agents[int(member)]
            raise SpecError(f"agent set {p} has no agent {member!r}")
        if member:
            raise SpecError(f"{p} is neither a bundle nor an agent set")
        return data

    def coerce_agents(self, x) -> list:
        if isinstance(x, str):
            x = self.raw(x)
        if isinstance(x, dict):
            if x.get("kind") == "agent-set":
                x = x.get("agents", [])
            else:
                return [load_agent(x)]
        if not isinstance(x, list):
            raise SpecError("expected an agent or a list of agents")
        out = []
        for item in x:
            out.extend(self.coerce_agents(item))
        return out

    def coerce_agent(self, x) -> Agent:
        agents = self.coerce_agents(x)
        if len(agents) != 1:
            raise SpecError(f"expected exactly one agent, got {len(agents)}")
        return agents[0]

    def coerce_env(self, x) -> FsmEnvironment:
        return load_env(self.raw(x) if isinstance(x, str) else x)

    def coerce_rules(self, x) -> list:
        data = self.raw(x) if isinstance(x, str) else x
        data = data if isinstance(data, list) else [data]
        return [load_rule(d) for d in data]

    def coerce_instance(self, x) -> CrlInstance:
        return load_instance(self.raw(x) if isinstance(x, str) else x, self)

    def coerce_switching(self, x) -> SwitchingSpec:
        data = self.raw(x) if isinstance(x, str) else x
        if not isinstance(data, dict) or data.get("kind") != "switching":
            raise SpecError("expected a switching suite spec")
        return load_switching(data)


def agent_set(agents) -> dict:
    return {"kind": "agent-set", "agents": [dump_agent(a) for a in agents]}


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
