"""Exact performance, optimal agents, the CRL classifier and model-based rules."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    Agent,
    FsmAgent,
    FsmEnvironment,
    History,
    TableAgent,
    UnrealizablePrefix,
    _check_interfaces,
    _explore,
    agents_equal,
    as_agent_list,
    as_fraction,
)
from .errors import PreconditionError, SpecError
from .linalg import solve_discounted
from .operators import LearningRuleFsm, RuleAgent, Verdict, check_generates, check_reaches


@dataclass(frozen=True)
class PerformanceSpec:
    kind: str  # "discounted" | "average"
    gamma: Fraction | None = None
    T: int | None = None
    truncation: int | None = None

    def __post_init__(self):
        if self.kind == "discounted":
            g = as_fraction(self.gamma)
            if not 0 <= g < 1:
                raise SpecError("discount factor must lie in [0, 1)")
            object.__setattr__(self, "gamma", g)
        elif self.kind == "average":
            if self.T is None or int(self.T) < 1:
                raise SpecError("finite-horizon average needs T >= 1")
            object.__setattr__(self, "T", int(self.T))
        else:
            raise SpecError(f"unknown performance kind {self.kind!r}")

    @classmethod
    def discounted(cls, gamma, truncation=None) -> "PerformanceSpec":
        return cls("discounted", gamma=gamma, truncation=truncation)

    @classmethod
    def average(cls, T: int) -> "PerformanceSpec":
        return cls("average", T=T)

    def to_json(self) -> dict:
        if self.kind == "discounted":
            out = {"kind": "discounted", "gamma": [self.gamma.numerator, self.gamma.denominator]}
            if self.truncation is not None:
                out["truncation"] = self.truncation
            return out
        return {"kind": "average", "T": self.T}


def _filter(agent: Agent, env: FsmEnvironment, code) -> tuple:
    """Agent state and posterior over env states after an encoded history."""
    belief = {env.initial_state: Fraction(1)}
    x = agent.initial_state
    for t, (a, o) in enumerate(code):
        if agent.output(x).probs[a] == 0:
            raise UnrealizablePrefix(env.interface.decode(code), t)
        nb: dict = {}
        for s, w in belief.items():
            for nxt, oo, p in env.outcomes(s, a):
                if oo == o:
                    nb[nxt] = nb.get(nxt, Fraction(0)) + w * p
        z = sum(nb.values(), Fraction(0))
        if z == 0:
            raise UnrealizablePrefix(env.interface.decode(code), t)
        belief = {s: w / z for s, w in nb.items()}
        x = agent.next_state(x, a, o)
    return x, belief


def markov_chain(agent: Agent, env: FsmEnvironment, starts) -> tuple:
    """Joint (agent state, env state) chain reachable from ``starts``.

    Returns (nodes, index, P, r) with P[i] = {j: prob} and r[i] the expected
    one-step reward at node i.
    """
    nodes = list(dict.fromkeys(starts))
    index = {n: i for i, n in enumerate(nodes)}
    P: list = []
    r: list = []
    queue = deque(range(len(nodes)))
    while queue:
        i = queue.popleft()
        x, s = nodes[i]
        row: dict = {}
        exp_r = Fraction(0)
        dist = agent.output(x).probs
        for a, pa in enumerate(dist):
            if not pa:
                continue
            for nxt, o, p in env.outcomes(s, a):
                w = pa * p
                exp_r += w * env.reward(a, o)
                key = (agent.next_state(x, a, o), nxt)
                j = index.get(key)
                if j is None:
                    j = index[key] = len(nodes)
                    nodes.append(key)
                    queue.append(j)
                row[j] = row.get(j, Fraction(0)) + w
        while len(P) <= i:
            P.append(None)
            r.append(None)
        P[i] = row
        r[i] = exp_r
    return nodes, index, P, r


def _finite_sum(P, r, steps: int, discount: Fraction) -> list:
    """sum_{k<steps} discount^k E[R_k] from every node, by backward DP."""
    n = len(r)
    V = [Fraction(0)] * n
    for _ in range(steps):
        V = [r[i] + discount * sum((p * V[j] for j, p in P[i].items()), Fraction(0)) for i in range(n)]
    return V


def node_values(agent: Agent, env: FsmEnvironment, perf: PerformanceSpec, starts) -> tuple:
    """Values of every chain node reachable from ``starts``; returns (index, values)."""
    nodes, index, P, r = markov_chain(agent, env, starts)
    if perf.kind == "discounted":
        if isinstance(agent, TableAgent) or perf.truncation is not None:
            if perf.truncation is None:
                raise PreconditionError(
                    "table agents are evaluated by finite-horizon DP; give the discounted spec a truncation depth"
                )
            V = _finite_sum(P, r, perf.truncation, perf.gamma)
        else:
            V = solve_discounted(P, r, perf.gamma)
    else:
        V = [v / perf.T for v in _finite_sum(P, r, perf.T, Fraction(1))]
    return index, V


def compute_value(agent: Agent, env: FsmEnvironment, perf: PerformanceSpec, history: History = ()) -> Fraction:
    """v(agent, env | history), exact.

    The env state after a history may be uncertain; the value is the posterior
    expectation over the chain nodes consistent with the history.
    """
    _check_interfaces([agent, env])
    x, belief = _filter(agent, env, env.interface.encode(history))
    starts = [(x, s) for s in sorted(belief)]
    index, V = node_values(agent, env, perf, starts)
    return sum((w * V[index[(x, s)]] for s, w in belief.items()), Fraction(0))


def agent_id(agent: Agent, i: int) -> str:
    return agent.name if agent.name is not None else f"agent{i}"


def agent_values(agents: Sequence[Agent], env: FsmEnvironment, perf: PerformanceSpec) -> list:
    return [compute_value(a, env, perf) for a in agents]


def optimal_agents(agents: Sequence[Agent], env: FsmEnvironment, perf: PerformanceSpec) -> list:
    """Every maximizer of v(·, env) from the empty history."""
    agents = as_agent_list(agents)
    if not agents:
        raise PreconditionError("empty agent set")
    vals = agent_values(agents, env, perf)
    best = max(vals)
    return [a for a, v in zip(agents, vals) if v == best]


def _contains(pool: Sequence[Agent], agent: Agent) -> bool:
    return any(a is agent or agents_equal(a, agent) for a in pool)


@dataclass
class CrlInstance:
    env: FsmEnvironment
    perf: PerformanceSpec
    agents: list
    basis: list

    def __post_init__(self):
        self.agents = as_agent_list(self.agents)
        self.basis = as_agent_list(self.basis)
        if not self.agents:
            raise SpecError("a CRL instance needs a non-empty agent set")
        if not self.basis:
            raise SpecError("a CRL instance needs a non-empty basis")
        _check_interfaces([*self.agents, *self.basis, self.env])

    def basis_in_agents(self) -> bool:
        return all(_contains(self.agents, b) for b in self.basis)

    def basis_proper(self) -> bool:
        return any(not _contains(self.basis, a) for a in self.agents)


@dataclass
class CrlReport:
    optimal_ids: list
    values: dict
    reaches: list  # (agent id, Verdict) pairs, modality "never"
    is_crl: bool
    basis_generates: Verdict
    basis_subset: bool
    basis_proper: bool
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "is_crl": self.is_crl,
            "optimal": list(self.optimal_ids),
            "values": {k: [v.numerator, v.denominator] for k, v in self.values.items()},
            "reaches": [
                {"id": i, "modality": "never", "holds": v.holds, "semantics": v.tag,
                 "witness": None if v.witness is None else [list(p) for p in v.witness]}
                for i, v in self.reaches
            ],
            "basis_generates": self.basis_generates.to_json(),
            "basis_subset_of_agents": self.basis_subset,
            "basis_proper_subset": self.basis_proper,
            "notes": list(self.notes),
        }


def classify_crl(instance: CrlInstance) -> CrlReport:
    """Is every optimal agent a continual learner relative to the basis?"""
    agents, basis, env = instance.agents, instance.basis, instance.env
    ids = [agent_id(a, i) for i, a in enumerate(agents)]
    vals = agent_values(agents, env, instance.perf)
    best = max(vals)
    optimal = [i for i, v in enumerate(vals) if v == best]
    reaches = [(ids[i], check_reaches(agents[i], basis, env, "never")) for i in optimal]
    gen = check_generates(basis, agents, env)
    notes = []
    if not gen.holds:
        notes.append("premise failed: the basis does not generate the agent set")
    subset, proper = instance.basis_in_agents(), instance.basis_proper()
    if not subset:
        notes.append("basis is not contained in the agent set")
    if not proper:
        notes.append("basis covers the whole agent set; such a tuple is never CRL")
    return CrlReport(
        optimal_ids=[ids[i] for i in optimal],
        values=dict(zip(ids, vals)),
        reaches=reaches,
        is_crl=all(v.holds for _, v in reaches),
        basis_generates=gen,
        basis_subset=subset,
        basis_proper=proper,
        notes=notes,
    )


def augment_with_optimal(instance: CrlInstance) -> CrlInstance:
    """Same problem, with every optimal agent added to the basis."""
    basis = list(instance.basis)
    for a in optimal_agents(instance.agents, instance.env, instance.perf):
        if not any(b is a for b in basis):
            basis.append(a)
    return CrlInstance(instance.env, instance.perf, instance.agents, basis)


class ModelBasedRule:
    """Select, at each history, the basis member with the highest model value.

    The value of member j at history h is the expectation, under the model's
    posterior over its hidden state, of the member's value from its own machine
    state after h. Ties go to the lowest index.
    """

    def __init__(self, basis: Sequence[Agent], model: FsmEnvironment, perf: PerformanceSpec):
        basis = as_agent_list(basis)
        if not basis:
            raise PreconditionError("empty basis")
        if not all(isinstance(b, FsmAgent) for b in basis):
            raise PreconditionError("model-based rules need finite-state basis members")
        self.interface = _check_interfaces([*basis, model])
        self.basis = basis
        self.model = model
        self.perf = perf
        self._tables = []
        for b in basis:
            starts = [(x, s) for x in range(len(b.states)) for s in range(len(model.states))]
            self._tables.append(node_values(b, model, perf, starts))

    def _update(self, belief: dict, a: int, o: int):
        nb: dict = {}
        for s, w in belief.items():
            for nxt, oo, p in self.model.outcomes(s, a):
                if oo == o:
                    nb[nxt] = nb.get(nxt, Fraction(0)) + w * p
        z = sum(nb.values(), Fraction(0))
        if z == 0:
            return None
        return {s: w / z for s, w in sorted(nb.items())}

    def _values_at(self, belief: dict, states: tuple) -> list:
        out = []
        for (index, V), x in zip(self._tables, states):
            out.append(sum((w * V[index[(x, s)]] for s, w in belief.items()), Fraction(0)))
        return out

    @staticmethod
    def _argmax(vals: list) -> int:
        best = max(vals)
        return vals.index(best)

    def values(self, h: History) -> list:
        belief = {self.model.initial_state: Fraction(1)}
        states = tuple(b.initial_state for b in self.basis)
        for t, (a, o) in enumerate(self.interface.encode(h)):
            belief = self._update(belief, a, o)
            if belief is None:
                raise UnrealizablePrefix(h, t)
            states = tuple(b.next_state(x, a, o) for b, x in zip(self.basis, states))
        return self._values_at(belief, states)

    def select(self, h: History) -> int:
        return self._argmax(self.values(h))

    def to_learning_rule(self, max_states: int = 20000) -> LearningRuleFsm:
        """Realize the rule as a finite machine over (belief, basis states).

        Histories the model deems impossible fall into an absorbing state that
        keeps the last selection.
        """
        iface = self.interface
        init = (tuple(sorted({self.model.initial_state: Fraction(1)}.items())),
                tuple(b.initial_state for b in self.basis))
        keys = [init]
        index = {init: 0}
        select = {}
        trans = {}
        queue = deque([init])
        while queue:
            key = queue.popleft()
            if key[0] == "impossible":
                select[key] = key[1]
                for a in iface.actions:
                    for o in iface.observations:
                        trans[(key, a, o)] = key
                continue
            belief, states = dict(key[0]), key[1]
            sel = self._argmax(self._values_at(belief, states))
            select[key] = sel
            for ai, a in enumerate(iface.actions):
                for oi, o in enumerate(iface.observations):
                    nb = self._update(belief, ai, oi)
                    if nb is None:
                        nkey = ("impossible", sel)
                    else:
                        nkey = (tuple(nb.items()), tuple(b.next_state(x, ai, oi) for b, x in zip(self.basis, states)))
                    trans[(key, a, o)] = nkey
                    if nkey not in index:
                        if len(keys) >= max_states:
                            raise PreconditionError(f"model-based rule needs more than {max_states} states")
                        index[nkey] = len(keys)
                        keys.append(nkey)
                        queue.append(nkey)
        return LearningRuleFsm(iface, keys, init, lambda s, a, o: trans[(s, a, o)], select, name="model-based")

    def agent(self, name=None) -> RuleAgent:
        """The agent generated by this rule over its basis."""
        return RuleAgent(self.to_learning_rule(), self.basis, name=name or "model-based-agent")


def make_model_based_rule(basis: Sequence[Agent], model: FsmEnvironment, perf: PerformanceSpec) -> ModelBasedRule:
    return ModelBasedRule(basis, model, perf)


@dataclass
class ReplanReport:
    per_depth: dict  # depth -> number of realizable histories whose selection differs from the parent's
    every_history_replans: bool
    stuck_history: History | None
    horizon: int

    def to_json(self) -> dict:
        return {
            "per_depth": {str(k): v for k, v in self.per_depth.items()},
            "total": sum(self.per_depth.values()),
            "every_history_replans": self.every_history_replans,
            "stuck_history": None if self.stuck_history is None else [list(p) for p in self.stuck_history],
            "horizon": self.horizon,
        }


def count_replans(rule: ModelBasedRule, env: FsmEnvironment, T: int) -> ReplanReport:
    """Count selection changes along realizable histories of the rule's own agent.

    ``every_history_replans`` asks, for each realizable history of length <= T,
    whether some realizable continuation (of any length) changes the selection.
    """
    if T < 1:
        raise PreconditionError("T must be at least 1")
    lr = rule.to_learning_rule()
    actor = RuleAgent(lr, rule.basis)
    g = _explore([actor, lr], env, 0, None)
    sel = [lr.selection(n[0][1]) for n in g.nodes]
    per_depth = {}
    frontier = {0: 1}
    visited = {0}
    for d in range(1, T + 1):
        nxt: dict = {}
        changed = 0
        for i, c in frontier.items():
            for _, _, j in g.edges[i]:
                nxt[j] = nxt.get(j, 0) + c
                if sel[j] != sel[i]:
                    changed += c
        per_depth[d] = changed
        frontier = nxt
        visited.update(nxt)
    # selections reachable in >= 1 step from each node
    n = len(g)
    reach = [set() for _ in range(n)]
    changed_flag = True
    succ = [g.successors(i) for i in range(n)]
    while changed_flag:
        changed_flag = False
        for i in range(n):
            acc = set(reach[i])
            for j in succ[i]:
                acc.add(sel[j])
                acc |= reach[j]
            if acc != reach[i]:
                reach[i] = acc
                changed_flag = True
    stuck = next((i for i in sorted(visited) if reach[i] <= {sel[i]}), None)
    return ReplanReport(
        per_depth=per_depth,
        every_history_replans=stuck is None,
        stuck_history=None if stuck is None else env.interface.decode(g.history_to(stuck)),
        horizon=T,
    )
