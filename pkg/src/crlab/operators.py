"""Decision procedures for generates and reaches on finite agents.

Every check builds a :class:`~crlab.core.ProductGraph` and reads the verdict
off node-level output comparisons. When a :class:`~crlab.core.TableAgent`
participates, the graph is unrolled to the largest table horizon T and the
verdict is tagged ``bounded`` with that horizon.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import (
    ActionDistribution,
    Agent,
    FsmEnvironment,
    History,
    Interface,
    ProductGraph,
    SpecError,
    TableAgent,
    _check_interfaces,
    _explore,
    as_agent_list,
    canonical_histories,
    different_distribution,
)
from .errors import PreconditionError

EXACT = "exact"
BOUNDED = "bounded"
MODALITIES = ("sometimes", "never", "always")


@dataclass(frozen=True)
class Verdict:
    holds: bool
    semantics: str = EXACT
    horizon: int | None = None
    witness: History | None = None
    detail: Mapping = field(default_factory=dict, compare=False)

    def __bool__(self):
        return self.holds

    @property
    def tag(self) -> str:
        return EXACT if self.semantics == EXACT else f"bounded@{self.horizon}"

    def to_json(self) -> dict:
        out = {"holds": self.holds, "semantics": self.semantics}
        if self.horizon is not None:
            out["horizon"] = self.horizon
        out["witness"] = None if self.witness is None else [list(p) for p in self.witness]
        if self.detail:
            out["detail"] = dict(self.detail)
        return out


def table_horizon(agents) -> int | None:
    """Largest horizon among table agents, or None when all are finite-state."""
    hs = [a.horizon for a in agents if isinstance(a, TableAgent)]
    return max(hs) if hs else None


def _verdict(holds, horizon, witness=None, **detail) -> Verdict:
    sem = EXACT if horizon is None else BOUNDED
    return Verdict(bool(holds), sem, horizon, witness, detail)


def _nonempty(basis, what="basis"):
    basis = as_agent_list(basis)
    if not basis:
        raise PreconditionError(f"empty {what}")
    return basis


def _first_uncovered(g: ProductGraph, n_basis: int, offset: int = 1):
    """First node (canonical order) where participant 0 matches no basis participant."""
    for i in range(len(g)):
        target = g.output(i, 0)
        if not any(g.output(i, offset + k) == target for k in range(n_basis)):
            return i
    return None


def _min_witness(found):
    """found: list of (encoded history, agent name); returns the canonically smallest."""
    return min(found, key=lambda x: (len(x[0]), x[0]))


def check_generates(basis: Sequence[Agent], lambda_set: Sequence[Agent], env: FsmEnvironment) -> Verdict:
    """Does ``basis`` generate ``lambda_set`` in ``env`` under all learning rules?

    Under the universal rule set the condition is pointwise: at every history
    realizable by a target agent, some basis member has the same output.
    """
    basis = _nonempty(basis)
    lambda_set = as_agent_list(lambda_set)
    _check_interfaces([*basis, *lambda_set, env])
    T = table_horizon([*basis, *lambda_set])
    failures = []
    for lam in lambda_set:
        g = _explore([lam, *basis], env, 0, T)
        i = _first_uncovered(g, len(basis))
        if i is not None:
            failures.append((g.history_to(i), lam.name))
    if not failures:
        return _verdict(True, T)
    code, name = _min_witness(failures)
    return _verdict(False, T, env.interface.decode(code), agent=name)


def check_uniform_generates(basis: Sequence[Agent], lambda_set: Sequence[Agent]) -> Verdict:
    """Pointwise generation over every history, independent of any environment."""
    basis = _nonempty(basis)
    lambda_set = as_agent_list(lambda_set)
    iface = _check_interfaces([*basis, *lambda_set])
    T = table_horizon([*basis, *lambda_set])
    failures = []
    for lam in lambda_set:
        g = _explore([lam, *basis], None, None, T)
        i = _first_uncovered(g, len(basis))
        if i is not None:
            failures.append((g.history_to(i), lam.name))
    if not failures:
        return _verdict(True, T)
    code, name = _min_witness(failures)
    return _verdict(False, T, iface.decode(code), agent=name)


class LearningRuleFsm:
    """Finite-state selector of a basis index for every history."""

    def __init__(self, interface: Interface, states: Sequence, initial, step, select: Mapping, name=None):
        self.interface = interface
        self.name = name
        self.states = tuple(states)
        index = {s: i for i, s in enumerate(self.states)}
        if initial not in index:
            raise SpecError(f"initial rule state {initial!r} not among the states")
        self.initial = initial
        self.initial_state = index[initial]
        get_step = step if callable(step) else (lambda s, a, o: step[(s, a, o)])
        get_sel = select if callable(select) else select.__getitem__
        try:
            self._select = tuple(int(get_sel(s)) for s in self.states)
            self._next = tuple(
                index[get_step(s, a, o)]
                for s in self.states for a in interface.actions for o in interface.observations
            )
        except KeyError as exc:
            raise SpecError(f"learning rule is not total: missing {exc}") from None
        self._sa = interface.n_actions * interface.n_observations
        self._so = interface.n_observations

    @classmethod
    def constant(cls, interface: Interface, index: int, name=None) -> "LearningRuleFsm":
        return cls(interface, [0], 0, lambda s, a, o: 0, {0: index}, name=name)

    def selection(self, state: int) -> int:
        return self._select[state]

    def next_state(self, state: int, a: int, o: int) -> int:
        return self._next[state * self._sa + a * self._so + o]

    def state_after(self, code):
        s = self.initial_state
        for a, o in code:
            s = self.next_state(s, a, o)
        return s

    def select(self, h: History) -> int:
        return self.selection(self.state_after(self.interface.encode(h)))

    def max_index(self) -> int:
        return max(self._select)


class RuleAgent(Agent):
    """The agent λ(h) = basis[σ(h)](h) induced by a learning rule over a basis."""

    def __init__(self, rule: LearningRuleFsm, basis: Sequence[Agent], name=None):
        basis = _nonempty(basis)
        if rule.max_index() >= len(basis) or min(rule._select) < 0:
            raise PreconditionError("learning rule selects outside the basis")
        self.interface = _check_interfaces([rule, *basis])
        self.rule = rule
        self.basis = tuple(basis)
        self.name = name
        self.initial_state = (rule.initial_state, tuple(b.initial_state for b in basis))

    def output(self, state):
        r, bs = state
        k = self.rule.selection(r)
        return self.basis[k].output(bs[k])

    def next_state(self, state, a, o):
        r, bs = state
        return (self.rule.next_state(r, a, o), tuple(b.next_state(s, a, o) for b, s in zip(self.basis, bs)))


def check_sigma_generates(basis: Sequence[Agent], rules: Sequence[LearningRuleFsm], lambda_set: Sequence[Agent],
                          env: FsmEnvironment | None = None, uniform: bool = False) -> Verdict:
    """Is every target reproduced exactly by some rule in ``rules``?"""
    basis = _nonempty(basis)
    rules = list(rules)
    if not rules:
        raise PreconditionError("empty learning-rule list")
    for r in rules:
        if r.max_index() >= len(basis) or min(r._select) < 0:
            raise PreconditionError(f"rule {r.name or ''} selects an index outside the basis")
    lambda_set = as_agent_list(lambda_set)
    if not uniform and env is None:
        raise PreconditionError("an environment is required unless uniform=True")
    iface = _check_interfaces([*basis, *lambda_set, *rules, None if uniform else env])
    T = table_horizon([*basis, *lambda_set])
    failures = []
    matched = {}
    for lam in lambda_set:
        first_fail = None
        for ri, rule in enumerate(rules):
            g = _explore([lam, rule, *basis], None if uniform else env, None if uniform else 0, T)
            bad = None
            for i in range(len(g)):
                states = g.nodes[i][0]
                k = rule.selection(states[1])
                if basis[k].output(states[2 + k]) != g.output(i, 0):
                    bad = i
                    break
            if bad is None:
                matched[lam.name or str(len(matched))] = ri
                break
            if first_fail is None:
                first_fail = g.history_to(bad)
        else:
            failures.append((first_fail, lam.name))
    if not failures:
        return _verdict(True, T, rules=matched)
    code, name = _min_witness(failures)
    return _verdict(False, T, iface.decode(code), agent=name)


def agreement_sets(g: ProductGraph, n_basis: int) -> list:
    """Greatest fixpoints S_j = {equal outputs} ∩ {all successors stay in S_j}.

    Participant 0 is the agent, participants 1..n_basis the basis members.
    Returns one boolean membership list per basis member.
    """
    preds = g.predecessors()
    n = len(g)
    result = []
    for j in range(n_basis):
        inside = [g.output(i, 0) == g.output(i, 1 + j) for i in range(n)]
        stack = [i for i in range(n) if not inside[i]]
        while stack:
            i = stack.pop()
            for p in preds[i]:
                if inside[p]:
                    inside[p] = False
                    stack.append(p)
        result.append(inside)
    return result


def _attractor(g: ProductGraph, target: list) -> list:
    """Nodes from which every path enters ``target`` (dead ends outside never do)."""
    preds = g.predecessors()
    n = len(g)
    remaining = [len(set(g.successors(i))) for i in range(n)]
    succ_sets = [set(g.successors(i)) for i in range(n)]
    inA = list(target)
    stack = [i for i in range(n) if inA[i]]
    seen_edge = [set() for _ in range(n)]
    while stack:
        j = stack.pop()
        for p in set(preds[j]):
            if inA[p] or j in seen_edge[p]:
                continue
            seen_edge[p].add(j)
            remaining[p] -= 1
            if remaining[p] == 0 and succ_sets[p]:
                inA[p] = True
                stack.append(p)
    return inA


def _cycle_node(g: ProductGraph, allowed: list):
    """First node (canonical order) lying on a cycle inside the ``allowed`` subgraph."""
    n = len(g)
    for start in range(n):
        if not allowed[start]:
            continue
        seen = set()
        stack = [j for j in g.successors(start) if allowed[j]]
        while stack:
            j = stack.pop()
            if j == start:
                return start
            if j in seen:
                continue
            seen.add(j)
            stack.extend(k for k in g.successors(j) if allowed[k])
    return None


def check_reaches(agent: Agent, basis: Sequence[Agent], env: FsmEnvironment, modality: str = "sometimes",
                  watch: int | None = None) -> Verdict:
    """Decide whether ``agent`` sometimes / never / always reaches ``basis`` in ``env``.

    ``watch`` is the watch-prefix length for bounded (table) semantics and
    defaults to half the horizon; it is ignored for exact checks.
    """
    if modality not in MODALITIES:
        raise PreconditionError(f"unknown modality {modality!r}; expected one of {MODALITIES}")
    basis = _nonempty(basis)
    _check_interfaces([agent, *basis, env])
    T = table_horizon([agent, *basis])
    g = _explore([agent, *basis], env, 0, T)
    iface = env.interface
    sets = agreement_sets(g, len(basis))
    union = [any(s[i] for s in sets) for i in range(len(g))]
    if T is not None:
        tw = T // 2 if watch is None else watch
        if not 0 <= tw < T:
            raise PreconditionError(f"watch prefix {tw} must lie in [0, {T})")
        depth = [n[2] for n in g.nodes]
        watched = [d <= tw for d in depth]
    else:
        tw = None
        watched = [True] * len(g)

    detail = {} if tw is None else {"watch": tw}
    if modality in ("sometimes", "never"):
        hit = next((i for i in range(len(g)) if watched[i] and union[i]), None)
        if hit is not None:
            members = [b.name for b, s in zip(basis, sets) if s[hit]]
            detail["reached"] = members
        reaches = hit is not None
        wit = iface.decode(g.history_to(hit)) if hit is not None else None
        if modality == "sometimes":
            return _verdict(reaches, T, wit, **detail)
        return _verdict(not reaches, T, wit, **detail)

    # always: every realizable continuation eventually settles inside the union.
    # With finite branching this is "no realizable cycle outside the union"
    # (exact) or "every branch settles before depth T" (bounded).
    inA = _attractor(g, union)
    ok = all(inA[i] for i in range(len(g)) if watched[i])
    if ok:
        return _verdict(True, T, **detail)
    if T is None:
        outside = [not u for u in union]
        c = _cycle_node(g, outside)
        node = c if c is not None else 0
    else:
        node = next((i for i in range(len(g)) if g.nodes[i][2] == T and not union[i]), 0)
    return _verdict(False, T, iface.decode(g.history_to(node)), **detail)


def construct_generating_basis(agent: Agent, env: FsmEnvironment, k: int, T: int) -> list:
    """k+1 table agents, none equal to ``agent``, that together generate it to depth T.

    Realizable histories are indexed in canonical order; member i copies the
    agent on indices congruent to i-1 mod k+1 and outputs a different
    distribution everywhere else.
    """
    if k < 1:
        raise PreconditionError("k must be a positive integer")
    if T < 1:
        raise PreconditionError("T must be at least 1")
    _check_interfaces([agent, env])
    realizable = canonical_histories(agent, env, T)
    if len(realizable) < k + 1:
        raise PreconditionError(
            f"only {len(realizable)} realizable histories to depth {T}; need {k + 1} to separate every member"
        )
    iface = agent.interface
    # the agent's own output on every history, and the shared "different" table
    own: dict = {}
    other: dict = {}
    flip: dict = {}
    stack = [((), agent.initial_state)]
    while stack:
        code, s = stack.pop()
        d = agent.output(s)
        own[code] = d
        # keyed by identity: machines hand back the same object per state
        f = flip.get(id(d))
        if f is None:
            f = flip[id(d)] = different_distribution(d)
        other[code] = f
        if len(code) < T:
            for a, o in iface.pairs():
                stack.append((code + ((a, o),), agent.next_state(s, a, o)))
    tables = [dict(other) for _ in range(k + 1)]
    for pos, code in enumerate(realizable):
        tables[pos % (k + 1)][code] = own[code]
    fallback = ActionDistribution.point(iface.n_actions, 0)
    base = agent.name or "agent"
    return [
        TableAgent(iface, T, tables[i], fallback, name=f"{base}/beta{i + 1}", encoded=True)
        for i in range(k + 1)
    ]
