"""Interfaces, histories, finite agents and environments, realizability.

Everything here is immutable. Probabilities are ``fractions.Fraction`` so that
"non-zero probability" and output equality are decided exactly.

Symbols (actions, observations) are strings at the public surface. Machines
work on integer indices internally; a history is a tuple of ``(action,
observation)`` string pairs and its encoded form is a tuple of index pairs.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence, Union

from .errors import InterfaceMismatch, PreconditionError, SpecError, UnrealizablePrefix

History = tuple  # tuple[tuple[str, str], ...]
Code = tuple  # tuple[tuple[int, int], ...]

EMPTY: History = ()


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise SpecError(f"refusing float probability {x!r}; use a Fraction or [num, den]")
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    return Fraction(x)


@dataclass(frozen=True)
class Interface:
    actions: tuple
    observations: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "observations", tuple(self.observations))
        if len(self.actions) < 2:
            raise SpecError("an interface needs at least two actions")
        if len(self.observations) < 1:
            raise SpecError("an interface needs at least one observation")
        if len(set(self.actions)) != len(self.actions):
            raise SpecError("duplicate action symbol")
        if len(set(self.observations)) != len(self.observations):
            raise SpecError("duplicate observation symbol")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @cached_property
    def _aidx(self) -> dict:
        return {a: i for i, a in enumerate(self.actions)}

    @cached_property
    def _oidx(self) -> dict:
        return {o: i for i, o in enumerate(self.observations)}

    def action_index(self, a) -> int:
        try:
            return self._aidx[a]
        except KeyError:
            raise InterfaceMismatch(f"action {a!r} not in {self.actions}") from None

    def observation_index(self, o) -> int:
        try:
            return self._oidx[o]
        except KeyError:
            raise InterfaceMismatch(f"observation {o!r} not in {self.observations}") from None

    def encode(self, h: History) -> Code:
        return tuple((self.action_index(a), self.observation_index(o)) for a, o in h)

    def decode(self, code: Code) -> History:
        return tuple((self.actions[a], self.observations[o]) for a, o in code)

    def pairs(self) -> Iterator[tuple]:
        """All (action index, observation index) pairs in canonical order."""
        return itertools.product(range(self.n_actions), range(self.n_observations))

    def all_histories(self, T: int) -> Iterator[Code]:
        """Every encoded history of length <= T, shortest first then lexicographic."""
        layer = [()]
        for _ in range(T + 1):
            yield from layer
            layer = [h + (p,) for h in layer for p in self.pairs()]


def history_key(code: Code) -> tuple:
    """Canonical ordering: by length, then lexicographic on index pairs."""
    return (len(code), code)


@dataclass(frozen=True)
class ActionDistribution:
    """A probability vector over an interface's actions, in action order."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(as_fraction(p) for p in self.probs)
        if any(p < 0 for p in probs):
            raise SpecError(f"negative probability in {probs}")
        if sum(probs) != 1:
            raise SpecError(f"action probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, n: int, i: int) -> "ActionDistribution":
        return cls(tuple(Fraction(int(j == i)) for j in range(n)))

    @classmethod
    def uniform(cls, n: int) -> "ActionDistribution":
        return cls((Fraction(1, n),) * n)

    @classmethod
    def from_mapping(cls, interface: Interface, mapping: Mapping) -> "ActionDistribution":
        probs = [Fraction(0)] * interface.n_actions
        for a, p in mapping.items():
            probs[interface.action_index(a)] = as_fraction(p)
        return cls(tuple(probs))

    @classmethod
    def coerce(cls, interface: Interface, value) -> "ActionDistribution":
        """Accept a distribution, an action symbol (point mass) or an action->prob mapping."""
        if isinstance(value, ActionDistribution):
            if len(value.probs) != interface.n_actions:
                raise InterfaceMismatch("distribution length does not match the interface")
            return value
        if isinstance(value, Mapping):
            return cls.from_mapping(interface, value)
        return cls.point(interface.n_actions, interface.action_index(value))

    def __len__(self):
        return len(self.probs)

    def support(self) -> tuple:
        return tuple(i for i, p in enumerate(self.probs) if p > 0)

    def is_point(self) -> bool:
        return len(self.support()) == 1

    def rotated(self) -> "ActionDistribution":
        """Shift probability mass to the next action, cyclically."""
        return ActionDistribution(self.probs[-1:] + self.probs[:-1])

    def as_dict(self, interface: Interface) -> dict:
        return {a: p for a, p in zip(interface.actions, self.probs) if p}

    def __repr__(self):
        return "ActionDistribution(" + ", ".join(str(p) for p in self.probs) + ")"


def different_distribution(d: ActionDistribution) -> ActionDistribution:
    """A deterministic choice of distribution unequal to ``d``.

    Rotation by one action; a rotation-invariant vector is uniform, for which
    the point mass on the first action is used instead.
    """
    r = d.rotated()
    if r != d:
        return r
    return ActionDistribution.point(len(d), 0)


class Agent:
    """A finite machine realizing a map from histories to action distributions.

    Subclasses supply ``initial_state``, ``output(state)`` and
    ``next_state(state, a, o)`` over integer symbol indices.
    """

    interface: Interface
    name: str | None

    initial_state: Hashable

    def output(self, state) -> ActionDistribution:
        raise NotImplementedError

    def next_state(self, state, a: int, o: int):
        raise NotImplementedError

    def state_after(self, code: Code):
        s = self.initial_state
        for a, o in code:
            s = self.next_state(s, a, o)
        return s

    def __call__(self, h: History) -> ActionDistribution:
        return run_agent(self, h)

    def __repr__(self):
        return f"{type(self).__name__}({self.name or hex(id(self))})"


StepSpec = Union[Mapping, Callable]


class FsmAgent(Agent):
    """Deterministic finite-state transducer from (a, o) streams to distributions.

    ``output`` maps each state to a distribution (or an action symbol for a
    point mass); ``step`` maps ``(state, action, observation)`` to the next
    state. Both may be given as callables instead of mappings.
    """

    def __init__(self, interface: Interface, states: Sequence, initial, output, step, name=None):
        self.interface = interface
        self.name = name
        self.states = tuple(states)
        if len(set(self.states)) != len(self.states):
            raise SpecError("duplicate agent state label")
        index = {s: i for i, s in enumerate(self.states)}
        if initial not in index:
            raise SpecError(f"initial state {initial!r} not among the states")
        self.initial = initial
        self.initial_state = index[initial]
        get_out = output if callable(output) else output.__getitem__
        get_step = step if callable(step) else (lambda s, a, o: step[(s, a, o)])
        try:
            self._out = tuple(ActionDistribution.coerce(interface, get_out(s)) for s in self.states)
            nxt = []
            for s in self.states:
                for a in interface.actions:
                    for o in interface.observations:
                        t = get_step(s, a, o)
                        if t not in index:
                            raise SpecError(f"step({s!r}, {a!r}, {o!r}) = {t!r} is not a state")
                        nxt.append(index[t])
        except KeyError as exc:
            raise SpecError(f"agent table is not total: missing {exc}") from None
        self._next = tuple(nxt)
        self._stride_a = interface.n_actions * interface.n_observations
        self._stride_o = interface.n_observations

    def output(self, state: int) -> ActionDistribution:
        return self._out[state]

    def next_state(self, state: int, a: int, o: int) -> int:
        return self._next[state * self._stride_a + a * self._stride_o + o]

    def state_label(self, state: int):
        return self.states[state]


BEYOND = "beyond-horizon"


class TableAgent(Agent):
    """Explicit table over every history of length <= horizon, fallback after."""

    def __init__(self, interface: Interface, horizon: int, table: Mapping, fallback, name=None,
                 encoded: bool = False):
        if horizon < 0:
            raise SpecError("table horizon must be non-negative")
        self.interface = interface
        self.name = name
        self.horizon = horizon
        self.fallback = ActionDistribution.coerce(interface, fallback)
        tab = {}
        n = interface.n_actions
        for h, d in table.items():
            code = tuple(h) if encoded else interface.encode(h)
            if len(code) > horizon:
                raise SpecError(f"table entry longer than horizon {horizon}")
            if not (type(d) is ActionDistribution and len(d.probs) == n):
                d = ActionDistribution.coerce(interface, d)
            tab[code] = d
        k = interface.n_actions * interface.n_observations
        expected = sum(k ** t for t in range(horizon + 1))
        if len(tab) != expected:
            raise SpecError(f"table has {len(tab)} entries; a total table to horizon {horizon} has {expected}")
        self.table = tab
        self.initial_state = ()

    @classmethod
    def from_agent(cls, agent: Agent, horizon: int, fallback=None, name=None) -> "TableAgent":
        """Tabulate ``agent`` on all histories up to ``horizon``."""
        iface = agent.interface
        table = {}
        stack = [((), agent.initial_state)]
        while stack:
            code, s = stack.pop()
            table[code] = agent.output(s)
            if len(code) < horizon:
                for a, o in iface.pairs():
                    stack.append((code + ((a, o),), agent.next_state(s, a, o)))
        if fallback is None:
            fallback = ActionDistribution.point(iface.n_actions, 0)
        return cls(iface, horizon, table, fallback, name=name or agent.name, encoded=True)

    def output(self, state) -> ActionDistribution:
        if state == BEYOND:
            return self.fallback
        return self.table[state]

    def next_state(self, state, a: int, o: int):
        if state == BEYOND or len(state) >= self.horizon:
            return BEYOND
        return state + ((a, o),)


def constant_agent(interface: Interface, action, name=None) -> FsmAgent:
    d = ActionDistribution.coerce(interface, action)
    return FsmAgent(interface, [0], 0, {0: d}, lambda s, a, o: 0, name=name)


def memoryless_agent(interface: Interface, mapping: Mapping, name=None) -> FsmAgent:
    """Agent whose output depends only on the last observation.

    ``mapping`` has one key per observation plus ``None`` for the empty history.
    """
    states = [None, *interface.observations]
    missing = [s for s in states if s not in mapping]
    if missing:
        raise SpecError(f"memoryless map missing keys {missing}")
    return FsmAgent(interface, states, None, mapping, lambda s, a, o: o, name=name)


def period_agent(interface: Interface, cycle: Sequence, name=None) -> FsmAgent:
    """Agent emitting ``cycle[t mod len(cycle)]`` at history length t."""
    n = len(cycle)
    return FsmAgent(interface, list(range(n)), 0, dict(enumerate(cycle)),
                    lambda s, a, o: (s + 1) % n, name=name)


def run_agent(agent: Agent, h: History) -> ActionDistribution:
    """Evaluate the agent at a history given as symbol pairs."""
    return agent.output(agent.state_after(agent.interface.encode(h)))


class FsmEnvironment:
    """Finite stochastic environment with a reward table on (action, observation).

    ``dynamics[state][action]`` is an iterable of ``(next_state, observation,
    probability)``; each row must sum to exactly one. ``reward`` maps
    ``(action, observation)`` to a rational, or is a callable of the two.
    """

    def __init__(self, interface: Interface, states: Sequence, initial, dynamics: Mapping, reward,
                 name=None):
        self.interface = interface
        self.name = name
        self.states = tuple(states)
        if len(set(self.states)) != len(self.states):
            raise SpecError("duplicate environment state label")
        index = {s: i for i, s in enumerate(self.states)}
        if initial not in index:
            raise SpecError(f"initial state {initial!r} not among the states")
        self.initial = initial
        self.initial_state = index[initial]
        rows = []
        for s in self.states:
            per_action = []
            for a in interface.actions:
                try:
                    entries = dynamics[s][a]
                except KeyError:
                    raise SpecError(f"dynamics missing row for state {s!r}, action {a!r}") from None
                acc: dict = {}
                for nxt, o, p in entries:
                    if nxt not in index:
                        raise SpecError(f"unknown next state {nxt!r}")
                    p = as_fraction(p)
                    if p < 0:
                        raise SpecError("negative transition probability")
                    key = (interface.observation_index(o), index[nxt])
                    acc[key] = acc.get(key, Fraction(0)) + p
                total = sum(acc.values(), Fraction(0))
                if total != 1:
                    raise SpecError(f"dynamics row ({s!r}, {a!r}) sums to {total}, not 1")
                per_action.append(tuple((n_, o_, p) for (o_, n_), p in sorted(acc.items()) if p > 0))
            rows.append(tuple(per_action))
        self._rows = tuple(rows)
        get_r = reward if callable(reward) else (lambda a, o: reward[(a, o)])
        try:
            self._reward = tuple(
                tuple(as_fraction(get_r(a, o)) for o in interface.observations) for a in interface.actions
            )
        except KeyError as exc:
            raise SpecError(f"reward table is not total: missing {exc}") from None

    def outcomes(self, state: int, a: int) -> tuple:
        """Positive-probability ``(next_state, observation, probability)`` triples."""
        return self._rows[state][a]

    def reward(self, a: int, o: int) -> Fraction:
        return self._reward[a][o]

    def reward_bounds(self) -> tuple:
        flat = [r for row in self._reward for r in row]
        return min(flat), max(flat)

    def state_label(self, state: int):
        return self.states[state]

    def __repr__(self):
        return f"FsmEnvironment({self.name or hex(id(self))}, {len(self.states)} states)"


def _check_interfaces(items: Iterable, interface: Interface | None = None) -> Interface:
    iface = interface
    for it in items:
        if it is None:
            continue
        if iface is None:
            iface = it.interface
        elif it.interface != iface:
            raise InterfaceMismatch(f"{it!r} does not share the interface {iface}")
    if iface is None:
        raise PreconditionError("no participants")
    return iface


@dataclass
class ProductGraph:
    """Reachable joint states of several agents, optionally gated by an environment.

    A node is ``(agent states, env support, depth)``. ``env support`` is the
    sorted tuple of environment states consistent with the history so far
    (``None`` when no environment gates the edges); ``depth`` is set only for
    horizon-truncated graphs. Because agent machines are deterministic and the
    environment is tracked by its support set, every history maps to exactly
    one node and the edges out of a node carry distinct ``(a, o)`` labels.
    """

    participants: tuple
    env: FsmEnvironment | None
    nodes: list
    edges: list  # edges[i] = list of (a, o, j), canonical label order
    horizon: int | None = None
    parent: list = field(default_factory=list)  # (parent node, (a, o)) of the canonical shortest history

    @property
    def interface(self) -> Interface:
        return self.participants[0].interface

    def __len__(self):
        return len(self.nodes)

    def output(self, node: int, k: int) -> ActionDistribution:
        return self.participants[k].output(self.nodes[node][0][k])

    def history_to(self, node: int) -> Code:
        out = []
        while node != 0:
            node, label = self.parent[node]
            out.append(label)
        return tuple(reversed(out))

    def successors(self, node: int) -> list:
        return [j for _, _, j in self.edges[node]]

    def predecessors(self) -> list:
        pred = [[] for _ in self.nodes]
        for i, es in enumerate(self.edges):
            for _, _, j in es:
                pred[j].append(i)
        return pred

    def depth(self, node: int) -> int:
        return len(self.history_to(node))

    def walk(self, code: Code):
        """Follow an encoded history from the initial node; return (node, steps taken)."""
        node = 0
        for t, (a, o) in enumerate(code):
            for ea, eo, j in self.edges[node]:
                if ea == a and eo == o:
                    node = j
                    break
            else:
                return None, t
        return node, len(code)

    def paths(self, start: int, max_len: int) -> Iterator[Code]:
        """All label sequences of length <= max_len from ``start``, canonical order."""
        layer = [((), start)]
        for _ in range(max_len + 1):
            for code, _ in layer:
                yield code
            layer = [(code + ((a, o),), j) for code, n in layer for a, o, j in self.edges[n]]


def _explore(participants: Sequence[Agent], env: FsmEnvironment | None, actor: int | None,
             horizon: int | None) -> ProductGraph:
    iface = _check_interfaces([*participants, env])
    pairs = list(iface.pairs())
    start_env = (env.initial_state,) if env is not None else None
    start = (tuple(p.initial_state for p in participants), start_env, 0 if horizon is not None else None)
    index = {start: 0}
    nodes = [start]
    edges: list = []
    parent: list = [None]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        states, support, depth = nodes[i]
        out = []
        if horizon is None or depth < horizon:
            if env is None:
                labelled = [((a, o), None) for a, o in pairs]
            else:
                labelled = []
                acts = participants[actor].output(states[actor]).support() if actor is not None else range(iface.n_actions)
                for a in acts:
                    by_obs: dict = {}
                    for s in support:
                        for nxt, o, _ in env.outcomes(s, a):
                            by_obs.setdefault(o, set()).add(nxt)
                    for o in sorted(by_obs):
                        labelled.append(((a, o), tuple(sorted(by_obs[o]))))
            for (a, o), nsupport in labelled:
                key = (
                    tuple(p.next_state(s, a, o) for p, s in zip(participants, states)),
                    nsupport,
                    depth + 1 if horizon is not None else None,
                )
                j = index.get(key)
                if j is None:
                    j = index[key] = len(nodes)
                    nodes.append(key)
                    parent.append((i, (a, o)))
                    queue.append(j)
                out.append((a, o, j))
        edges.append(out)
    return ProductGraph(tuple(participants), env, nodes, edges, horizon, parent)


def product_reachable(participants: Sequence[Agent], env: FsmEnvironment, horizon: int | None = None) -> ProductGraph:
    """Realizable joint-state graph; the first participant acts, the rest track."""
    if not participants:
        raise PreconditionError("product_reachable needs at least one participant")
    return _explore(participants, env, 0, horizon)


def product_all_inputs(participants: Sequence[Agent], horizon: int | None = None) -> ProductGraph:
    """Joint-state graph driven by every (a, o) pair, with no realizability gating."""
    if not participants:
        raise PreconditionError("product_all_inputs needs at least one participant")
    return _explore(participants, None, None, horizon)


def realizable_histories(agent: Agent, env: FsmEnvironment, T: int) -> set:
    """Histories of length <= T with positive probability under (agent, env)."""
    if T < 0:
        raise PreconditionError("T must be non-negative")
    g = _explore([agent], env, 0, T)
    iface = g.interface
    return {iface.decode(c) for c in g.paths(0, T)}


def realizable_suffixes(agent: Agent, env: FsmEnvironment, h: History, T: int) -> set:
    """Suffixes h' with |hh'| <= T such that hh' is realizable."""
    g = _explore([agent], env, 0, None)
    code = g.interface.encode(h)
    node, steps = g.walk(code)
    if node is None:
        raise UnrealizablePrefix(h, steps)
    iface = g.interface
    return {iface.decode(c) for c in g.paths(node, T - len(code))} if T >= len(code) else set()


def canonical_histories(agent: Agent, env: FsmEnvironment, T: int) -> list:
    """Encoded realizable histories to depth T in canonical order."""
    g = _explore([agent], env, 0, T)
    return list(g.paths(0, T))


def agents_equal(a: Agent, b: Agent) -> bool:
    """Behavioral equality on every history (exact for finite machines)."""
    g = product_all_inputs([a, b])
    return all(g.output(i, 0) == g.output(i, 1) for i in range(len(g)))


def first_difference(a: Agent, b: Agent) -> History | None:
    """Shortest canonical history where the two agents' outputs differ."""
    g = product_all_inputs([a, b])
    for i in range(len(g)):
        if g.output(i, 0) != g.output(i, 1):
            return g.interface.decode(g.history_to(i))
    return None


def bisimilar(e1: FsmEnvironment, e2: FsmEnvironment) -> bool:
    """Probabilistic bisimilarity of the two initial states (partition refinement).

    Two states are related when, for every action, they put equal mass on each
    (observation, block of next state). Reward tables must coincide as well.
    """
    if e1.interface != e2.interface:
        return False
    if e1._reward != e2._reward:
        return False
    iface = e1.interface
    envs = (e1, e2)
    universe = [(k, s) for k, e in enumerate(envs) for s in range(len(e.states))]
    block = {u: 0 for u in universe}
    while True:
        sigs = {}
        for k, s in universe:
            sig = []
            for a in range(iface.n_actions):
                acc: dict = {}
                for nxt, o, p in envs[k].outcomes(s, a):
                    key = (o, block[(k, nxt)])
                    acc[key] = acc.get(key, Fraction(0)) + p
                sig.append(tuple(sorted(acc.items())))
            sigs[(k, s)] = (block[(k, s)], tuple(sig))
        ids: dict = {}
        new_block = {u: ids.setdefault(sigs[u], len(ids)) for u in universe}
        if len(ids) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    return block[(0, e1.initial_state)] == block[(1, e2.initial_state)]


def history_probability(agent: Agent, env: FsmEnvironment, h: History) -> Fraction:
    """Probability of ``h`` by direct forward computation over hidden env states."""
    iface = agent.interface
    code = iface.encode(h)
    belief = {env.initial_state: Fraction(1)}
    s_agent = agent.initial_state
    for a, o in code:
        pa = agent.output(s_agent).probs[a]
        nb: dict = {}
        for s, w in belief.items():
            for nxt, oo, p in env.outcomes(s, a):
                if oo == o:
                    nb[nxt] = nb.get(nxt, Fraction(0)) + w * pa * p
        belief = nb
        s_agent = agent.next_state(s_agent, a, o)
    return sum(belief.values(), Fraction(0))


def as_agent_list(agents: Any) -> list:
    if isinstance(agents, Agent):
        return [agents]
    return list(agents)
