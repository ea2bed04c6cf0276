"""Builders for switching-MDP and continual supervised learning environments."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .core import FsmEnvironment, Interface, as_fraction
from .errors import DistinctnessUnachievable, PreconditionError, SpecError
from .linalg import solve

GRID_ACTIONS = ("up", "down", "left", "right")
_MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
IGNORE = "_"


@dataclass
class TabularMdp:
    """A finite MDP with rational transitions and rewards r(s, a, s').

    ``transition[s][a]`` maps next states to probabilities, ``reward[s][a][s2]``
    gives the reward (missing entries are 0).
    """

    states: tuple
    actions: tuple
    transition: dict
    reward: dict
    start: object
    terminals: frozenset = frozenset()
    name: str | None = None
    layout: dict | None = None  # gridworld metadata for describe()

    def __post_init__(self):
        self.states = tuple(self.states)
        self.actions = tuple(self.actions)
        self.terminals = frozenset(self.terminals)
        if self.start not in self.states:
            raise SpecError(f"start state {self.start!r} not among the states")
        if self.start in self.terminals:
            raise SpecError("start state cannot be terminal")
        for s in self.states:
            for a in self.actions:
                row = self.transition[s][a]
                row = {n: as_fraction(p) for n, p in row.items()}
                if any(n not in self.states for n in row):
                    raise SpecError(f"transition from {s!r} leaves the state space")
                if any(p < 0 for p in row.values()) or sum(row.values()) != 1:
                    raise SpecError(f"transition row ({s!r}, {a!r}) is not a distribution")
                self.transition[s][a] = row

    def r(self, s, a, s2) -> Fraction:
        return as_fraction(self.reward.get(s, {}).get(a, {}).get(s2, 0))

    def reward_values(self) -> set:
        vals = {Fraction(0)}
        for s in self.states:
            for a in self.actions:
                for s2, p in self.transition[s][a].items():
                    if p:
                        vals.add(self.r(s, a, s2))
        return vals


@dataclass
class SwitchingSpec:
    mdps: list
    p_switch: Fraction = Fraction(1, 1000)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p_switch = as_fraction(self.p_switch)
        if not self.mdps:
            raise SpecError("a switching spec needs at least one MDP")
        if not 0 <= self.p_switch <= 1:
            raise SpecError("switch probability must lie in [0, 1]")
        first = self.mdps[0]
        for m in self.mdps[1:]:
            if m.states != first.states or m.actions != first.actions or m.start != first.start:
                raise PreconditionError("MDPs in a switching suite must share states, actions and start")

    @property
    def n(self) -> int:
        return len(self.mdps)

    def switch_distribution(self, i: int) -> dict:
        """Index distribution for the step after index i (uniform over other indices)."""
        if self.n == 1 or self.p_switch == 0:
            return {i: Fraction(1)}
        out = {j: self.p_switch / (self.n - 1) for j in range(self.n) if j != i}
        out[i] = 1 - self.p_switch
        return out


def obs_symbol(state, reward: Fraction) -> str:
    return f"{state}|{reward}"


def _reward_of(symbol: str) -> Fraction:
    return Fraction(symbol.rsplit("|", 1)[1])


def _observation_alphabet(mdp_states, rewards) -> tuple:
    return tuple(obs_symbol(s, r) for s in mdp_states for r in sorted(rewards))


def build_switching_env(spec: SwitchingSpec) -> FsmEnvironment:
    """Hidden-index environment over a suite of MDPs.

    State is (active index, MDP state). Each step first switches the index
    (probability p, uniform over the others), then moves within the active MDP.
    The observation is the landing cell together with the reward just earned;
    entering a terminal cell lands on the start cell instead.
    """
    first = spec.mdps[0]
    rewards = set().union(*(m.reward_values() for m in spec.mdps))
    iface = Interface(first.actions, _observation_alphabet(first.states, rewards))
    states = [(i, s) for i in range(spec.n) for s in first.states]
    dyn = {}
    for i, s in states:
        dyn[(i, s)] = {}
        for a in first.actions:
            rows = []
            for j, pj in spec.switch_distribution(i).items():
                m = spec.mdps[j]
                for s2, p in m.transition[s][a].items():
                    if not p:
                        continue
                    land = m.start if s2 in m.terminals else s2
                    rows.append(((j, land), obs_symbol(land, m.r(s, a, s2)), pj * p))
            dyn[(i, s)][a] = rows
    return FsmEnvironment(iface, states, (0, first.start), dyn, lambda a, o: _reward_of(o), name="switching")


def embed_mdp(mdp: TabularMdp, rewards=None) -> FsmEnvironment:
    """A single MDP in the same observation format, without any hidden index."""
    rewards = mdp.reward_values() if rewards is None else rewards
    iface = Interface(mdp.actions, _observation_alphabet(mdp.states, rewards))
    dyn = {}
    for s in mdp.states:
        dyn[s] = {}
        for a in mdp.actions:
            rows = []
            for s2, p in mdp.transition[s][a].items():
                if p:
                    land = mdp.start if s2 in mdp.terminals else s2
                    rows.append((land, obs_symbol(land, mdp.r(s, a, s2)), p))
            dyn[s][a] = rows
    return FsmEnvironment(iface, mdp.states, mdp.start, dyn, lambda a, o: _reward_of(o), name=mdp.name)


# ---------------------------------------------------------------- gridworlds

def gridworld(width: int, height: int, walls, goal: int, hazard: int | None, start: int = 0,
              goal_reward=1, hazard_reward=-1, name=None) -> TabularMdp:
    """Deterministic 4-move gridworld; cells are numbered row-major."""
    walls = frozenset(walls)
    cells = tuple(range(width * height))
    terminals = {goal} | ({hazard} if hazard is not None else set())
    trans, reward = {}, {}
    for c in cells:
        r, col = divmod(c, width)
        trans[c], reward[c] = {}, {}
        for a in GRID_ACTIONS:
            dr, dc = _MOVES[a]
            nr, nc = r + dr, col + dc
            nxt = nr * width + nc
            if c in walls or not (0 <= nr < height and 0 <= nc < width) or nxt in walls:
                nxt = c
            trans[c][a] = {nxt: Fraction(1)}
            if nxt == goal and c != goal:
                reward[c][a] = {nxt: Fraction(goal_reward)}
            elif hazard is not None and nxt == hazard and c != hazard:
                reward[c][a] = {nxt: Fraction(hazard_reward)}
    layout = {"width": width, "height": height, "walls": sorted(walls), "goal": goal, "hazard": hazard, "start": start}
    return TabularMdp(cells, GRID_ACTIONS, trans, reward, start, terminals, name=name, layout=layout)


def _reachable(width, height, walls, blocked, start, goal) -> bool:
    seen = {start}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        if c == goal:
            return True
        r, col = divmod(c, width)
        for dr, dc in _MOVES.values():
            nr, nc = r + dr, col + dc
            if 0 <= nr < height and 0 <= nc < width:
                n = nr * width + nc
                if n not in walls and n not in blocked and n not in seen:
                    seen.add(n)
                    queue.append(n)
    return False


def optimal_policy(mdp: TabularMdp, gamma=Fraction(19, 20)) -> tuple:
    """Exact policy iteration on the episodic MDP (terminals absorb with value 0).

    Returns (policy, values, unique) where ``policy`` maps each non-terminal
    state to its greedy action (lowest index on ties) and ``unique`` tells
    whether every state has a single maximizing action.
    """
    gamma = as_fraction(gamma)
    live = [s for s in mdp.states if s not in mdp.terminals]
    idx = {s: i for i, s in enumerate(live)}
    policy = {s: mdp.actions[0] for s in live}

    def q(s, a, V):
        return sum(
            (p * (mdp.r(s, a, s2) + (gamma * V[idx[s2]] if s2 in idx else 0)) for s2, p in mdp.transition[s][a].items()),
            Fraction(0),
        )

    while True:
        n = len(live)
        A = [[Fraction(0)] * n for _ in range(n)]
        b = [Fraction(0)] * n
        for s in live:
            i = idx[s]
            A[i][i] += 1
            a = policy[s]
            for s2, p in mdp.transition[s][a].items():
                b[i] += p * mdp.r(s, a, s2)
                if s2 in idx:
                    A[i][idx[s2]] -= gamma * p
        V = solve(A, b)
        stable = True
        unique = True
        for s in live:
            qs = [q(s, a, V) for a in mdp.actions]
            best = max(qs)
            if qs.count(best) > 1:
                unique = False
            if q(s, policy[s], V) < best:
                policy[s] = mdp.actions[qs.index(best)]
                stable = False
        if stable:
            # canonical representative: lowest-index argmax everywhere
            for s in live:
                qs = [q(s, a, V) for a in mdp.actions]
                policy[s] = mdp.actions[qs.index(max(qs))]
            return policy, {s: V[idx[s]] for s in live}, unique


def build_gridworld_suite(width: int = 5, height: int = 5, n: int = 10, seed: int = 0,
                          p_switch=Fraction(1, 1000), wall_fraction: float = 0.2, retries: int = 200,
                          gamma=Fraction(19, 20)) -> SwitchingSpec:
    """n gridworld variants over the same cells with distinct optimal policies."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    if width < 2 or height < 2:
        raise PreconditionError("grid must be at least 2x2")
    rng = random.Random(seed)
    start = 0
    cells = list(range(1, width * height))
    mdps: list = []
    policies: list = []
    uniques: list = []
    attempts = 0
    while len(mdps) < n:
        attempts += 1
        if attempts > retries * n:
            raise DistinctnessUnachievable(f"could not place {n} variants with distinct optimal policies")
        k_walls = int(wall_fraction * width * height)
        picks = rng.sample(cells, min(len(cells), k_walls + 2))
        goal, hazard, walls = picks[0], picks[1], set(picks[2:])
        if not _reachable(width, height, walls, {hazard}, start, goal):
            continue
        m = gridworld(width, height, walls, goal, hazard, start, name=f"grid{len(mdps)}")
        pol, _, unique = optimal_policy(m, gamma)
        key = tuple(pol.get(c) for c in m.states)
        if key in policies:
            continue
        mdps.append(m)
        policies.append(key)
        uniques.append(unique)
    notes = {
        "width": width, "height": height, "seed": seed, "gamma": str(gamma),
        "unique_optimal_policy": uniques, "switch_target": "uniform over other indices",
        "rewards": {"goal": 1, "hazard": -1, "step": 0},
    }
    return SwitchingSpec(mdps, p_switch, notes)


def describe(spec: SwitchingSpec) -> str:
    """ASCII maps of every gridworld in the suite (S start, G goal, X hazard, # wall)."""
    blocks = []
    for i, m in enumerate(spec.mdps):
        lay = m.layout
        if lay is None:
            blocks.append(f"[{i}] {m.name or 'mdp'}: {len(m.states)} states (not a gridworld)")
            continue
        w, h = lay["width"], lay["height"]
        lines = [f"[{i}] {m.name or ''}"]
        for r in range(h):
            row = ""
            for c in range(w):
                cell = r * w + c
                if cell == lay["start"]:
                    row += "S"
                elif cell == lay["goal"]:
                    row += "G"
                elif cell == lay["hazard"]:
                    row += "X"
                elif cell in lay["walls"]:
                    row += "#"
                else:
                    row += "."
            lines.append(row)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


# ---------------------------------------------------- continual supervised learning

@dataclass
class CslSchedule:
    """Sequence of (distribution over (input, label), duration) phases.

    The last phase may have duration None (unbounded). With ``repeat`` the
    phases cycle forever and every duration must be finite.
    """

    inputs: tuple
    labels: tuple
    phases: list
    repeat: bool = False

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.labels = tuple(self.labels)
        if not self.phases:
            raise SpecError("a schedule needs at least one phase")
        cleaned = []
        for k, (dist, dur) in enumerate(self.phases):
            d = {}
            for (x, y), p in dict(dist).items():
                if x not in self.inputs:
                    raise SpecError(f"input {x!r} not declared")
                if y not in self.labels:
                    raise SpecError(f"label {y!r} outside the action alphabet")
                d[(x, y)] = as_fraction(p)
            if any(p < 0 for p in d.values()) or sum(d.values()) != 1:
                raise SpecError(f"phase {k} distribution does not sum to 1")
            last = k == len(self.phases) - 1
            if dur is None and (self.repeat or not last):
                raise SpecError("only the final phase of a non-repeating schedule may be unbounded")
            if dur is not None and int(dur) < 1:
                raise SpecError("phase durations must be positive")
            cleaned.append((d, None if dur is None else int(dur)))
        self.phases = cleaned

    def advance(self, phase: int, step: int) -> tuple:
        dur = self.phases[phase][1]
        if dur is None:
            return phase, 0
        if step + 1 < dur:
            return phase, step + 1
        if phase + 1 < len(self.phases):
            return phase + 1, 0
        if self.repeat:
            return 0, 0
        return phase, step  # a finished final phase persists


def csl_obs(x, y) -> str:
    return f"{x}|{y}"


def csl_parse(o: str) -> tuple:
    x, y = o.rsplit("|", 1)
    return x, y


def build_csl_env(schedule: CslSchedule) -> FsmEnvironment:
    """Environment emitting (fresh input, label of the previous input).

    State is (phase, step within phase, pending label). Reward is +1 when the
    action equals the label carried in the observation, -1 otherwise, and 0
    for the placeholder label that accompanies the very first input.
    """
    labels = schedule.labels
    iface = Interface(labels, tuple(csl_obs(x, y) for x in schedule.inputs for y in (*labels, IGNORE)))
    states = []
    for k, (_, dur) in enumerate(schedule.phases):
        for t in range(dur if dur is not None else 1):
            for pend in (*labels, IGNORE):
                states.append((k, t, pend))
    dyn = {}
    for k, t, pend in states:
        nk, nt = schedule.advance(k, t)
        rows = []
        for (x, y), p in schedule.phases[k][0].items():
            if p:
                rows.append(((nk, nt, y), csl_obs(x, pend), p))
        dyn[(k, t, pend)] = {a: rows for a in labels}

    def reward(a, o):
        y = csl_parse(o)[1]
        if y == IGNORE:
            return 0
        return 1 if a == y else -1

    return FsmEnvironment(iface, states, (0, 0, IGNORE), dyn, reward, name="csl")
