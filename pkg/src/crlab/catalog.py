"""Ready-made instances: the worked examples and counterexamples, plus small toys."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import TYPE_CHECKING

from .core import (
    FsmAgent,
    FsmEnvironment,
    Interface,
    constant_agent,
    memoryless_agent,
    period_agent,
)
from .crl import CrlInstance, ModelBasedRule, PerformanceSpec

if TYPE_CHECKING:
    from .environments import CslSchedule


def single_state_env(interface: Interface, obs_probs=None, reward=None, name="flat") -> FsmEnvironment:
    """One hidden state; each action emits observations with fixed probabilities."""
    obs = interface.observations
    if obs_probs is None:
        obs_probs = {o: Fraction(1, len(obs)) for o in obs}
    row = [("s", o, p) for o, p in obs_probs.items()]
    dyn = {"s": {a: row for a in interface.actions}}
    return FsmEnvironment(interface, ["s"], "s", dyn, reward or (lambda a, o: 0), name=name)


def rank_example():
    """Three agents of rank two over A={a0,a1}, O={o0}: two constants and the parity agent.

    Returns (target, pool).
    """
    iface = Interface(("a0", "a1"), ("o0",))
    l0 = constant_agent(iface, "a0", name="lambda0")
    l1 = constant_agent(iface, "a1", name="lambda1")
    l2 = period_agent(iface, ["a0", "a1"], name="lambda2")
    l3 = period_agent(iface, ["a1", "a0"], name="lambda3")
    return [l0, l1, l2], [l0, l1, l2, l3]


def non_uniqueness_set():
    """Four agents: two constants and the two parity agents; two distinct minimal bases."""
    target, pool = rank_example()
    return pool


def memoryless_basis(interface: Interface, prefix="m"):
    """Every deterministic map from (last observation or none) to an action."""
    keys = [None, *interface.observations]
    out = []
    for combo in itertools.product(interface.actions, repeat=len(keys)):
        name = prefix + "[" + ",".join(combo) + "]"
        out.append(memoryless_agent(interface, dict(zip(keys, combo)), name=name))
    return out


def generates_not_commutative():
    """{λi: a1, λj: a2} generates {λi} but not the other way round."""
    iface = Interface(("a1", "a2"), ("o1",))
    li = constant_agent(iface, "a1", name="lambda_i")
    lj = constant_agent(iface, "a2", name="lambda_j")
    env = single_state_env(iface)
    return {"small": [li], "big": [li, lj], "env": env}


def sometimes_reaches_not_commutative():
    """Λ1 = {λi}, Λ2 = {λi, λj}: all of Λ1 reaches Λ2 while λj never reaches Λ1."""
    d = generates_not_commutative()
    return {"lambda1": d["small"], "lambda2": d["big"], "env": d["env"], "lambda_j": d["big"][1]}


def never_reaches_transitivity():
    """A = {a1, a2, a3}; Λ1 = Λ3 use only a1 and a3; Λ2 = {h ↦ a2}."""
    iface = Interface(("a1", "a2", "a3"), ("o1",))
    lam1 = [
        constant_agent(iface, "a1", name="c1"),
        constant_agent(iface, "a3", name="c3"),
        period_agent(iface, ["a1", "a3"], name="alt13"),
    ]
    lam2 = [constant_agent(iface, "a2", name="c2")]
    return {"lambda1": lam1, "lambda2": lam2, "lambda3": lam1, "env": single_state_env(iface)}


def sometimes_reaches_transitivity(steps: int = 10):
    """Ten-step construction over A={a1,a2}, O={o1,o2} with a fair observation coin.

    λ̄1 plays a1 except after the all-o1 prefix of length ``steps``, where it
    switches to a2. Λ2 holds the agent that plays a2 from step ``steps`` on.
    Λ3 holds an agent that agrees with λ2 after the all-o2 prefix but with λ̄1
    nowhere from step ``steps`` on.
    """
    iface = Interface(("a1", "a2"), ("o1", "o2"))
    env = single_state_env(iface, name="fair-coin")

    # state: (t, tag) for t < steps, tag in {"start", "o1", "o2", "mixed"}; then ("done", tag)
    states = [(0, "start")] + [(t, g) for t in range(1, steps) for g in ("o1", "o2", "mixed")]
    states += [("done", g) for g in ("o1", "o2", "mixed")]

    def step(s, a, o):
        t, tag = s
        if t == "done":
            return s
        if tag == "start":
            ntag = o
        elif tag == o:
            ntag = tag
        else:
            ntag = "mixed"
        return ("done", ntag) if t + 1 >= steps else (t + 1, ntag)

    def out_bar1(s):
        return "a2" if s == ("done", "o1") else "a1"

    def out_2(s):
        return "a2" if s[0] == "done" else "a1"

    def out_3(s):
        if s[0] != "done":
            return "a1"
        return "a1" if s[1] == "o1" else "a2"

    bar1 = FsmAgent(iface, states, (0, "start"), out_bar1, step, name="lambda1_bar")
    l2 = FsmAgent(iface, states, (0, "start"), out_2, step, name="lambda2")
    l3 = FsmAgent(iface, states, (0, "start"), out_3, step, name="lambda3")
    return {"lambda1": [bar1], "lambda2": [l2], "lambda3": [l3], "env": env, "steps": steps}


def generates_transitivity_counterexample():
    """Λ1 ⇝ Λ2 and Λ2 ⇝ Λ3 in a one-observation environment, yet not Λ1 ⇝ Λ3.

    Generation is relative to the target's realizable histories, and the
    middle set's realizable histories need not cover the last set's.
    """
    iface = Interface(("a1", "a2"), ("o1",))
    env = single_state_env(iface)
    x = FsmAgent(iface, [0, 1], 0, {0: "a1", 1: "a2"}, lambda s, a, o: 1, name="x")
    y = FsmAgent(iface, [0, 1], 0, {0: "a2", 1: "a1"},
                 lambda s, a, o: 1 if (s == 1 or a == "a2") else 0, name="y")
    m1 = FsmAgent(iface, [0, 1], 0, {0: "a1", 1: "a2"}, lambda s, a, o: 1, name="m1")
    m2 = FsmAgent(iface, [0, 1], 0, {0: "a2", 1: "a1"}, lambda s, a, o: 1, name="m2")
    z = constant_agent(iface, "a1", name="z")
    return {"lambda1": [x, y], "lambda2": [m1, m2], "lambda3": [z], "env": env}


def two_phase_env(p_switch=Fraction(1, 10)) -> FsmEnvironment:
    """Two hidden phases; in phase q action a_q wins. Silent switch with prob p each step.

    Reward is carried by the observation: win pays 1, lose pays 0.
    """
    iface = Interface(("a0", "a1"), ("win", "lose"))
    p = Fraction(p_switch)
    dyn = {}
    for q in (0, 1):
        dyn[q] = {}
        for ai, a in enumerate(iface.actions):
            o = "win" if ai == q else "lose"
            rows = [(q, o, 1 - p)]
            if p:
                rows.append((1 - q, o, p))
            dyn[q][a] = rows
    return FsmEnvironment(iface, [0, 1], 0, dyn, lambda a, o: 1 if o == "win" else 0, name="two-phase")


def win_stay_lose_shift(interface: Interface, name="wsls") -> FsmAgent:
    """Repeat the last action after a win, switch after a loss; opens with a0."""
    def step(s, a, o):
        if o == "win":
            return a
        return "a1" if a == "a0" else "a0"

    return FsmAgent(interface, ["a0", "a1"], "a0", {"a0": "a0", "a1": "a1"}, step, name=name)


def settle_after(interface: Interface, prefix_agent: FsmAgent, action: str, steps: int, name=None) -> FsmAgent:
    """Follow ``prefix_agent`` for ``steps`` steps, then play ``action`` forever."""
    states = [(t, s) for t in range(steps) for s in prefix_agent.states] + ["settled"]

    def out(st):
        if st == "settled":
            return action
        return prefix_agent.output(prefix_agent.states.index(st[1]))

    def step(st, a, o):
        if st == "settled":
            return st
        t, s = st
        i = prefix_agent.states.index(s)
        ns = prefix_agent.states[prefix_agent.next_state(i, interface.action_index(a), interface.observation_index(o))]
        return "settled" if t + 1 >= steps else (t + 1, ns)

    return FsmAgent(interface, states, (0, prefix_agent.initial), out, step, name=name)


def two_phase_toy(p_switch=Fraction(1, 10), gamma=Fraction(9, 10)):
    """CRL-positive toy: memoryless basis, agent set = basis + trackers + settlers.

    Returns a dict with the instance, the model-based rule over the basis and
    its generated agent.
    """
    env = two_phase_env(p_switch)
    iface = env.interface
    perf = PerformanceSpec.discounted(gamma)
    basis = memoryless_basis(iface)
    rule = ModelBasedRule(basis, env, perf)
    mb = rule.agent(name="model-based")
    wsls = win_stay_lose_shift(iface)
    settlers = [settle_after(iface, wsls, a, k, name=f"wsls-then-{a}@{k}") for a in iface.actions for k in (1, 3)]
    agents = [*basis, mb, wsls, *settlers]
    inst = CrlInstance(env, perf, agents, basis)
    return {"instance": inst, "rule": rule, "model_based": mb, "wsls": wsls, "settlers": settlers}


def stationary_bandit(gamma=Fraction(9, 10)):
    """One-state bandit where a0 always wins; constant a0 dominates."""
    iface = Interface(("a0", "a1"), ("win", "lose"))
    dyn = {"s": {"a0": [("s", "win", 1)], "a1": [("s", "lose", 1)]}}
    env = FsmEnvironment(iface, ["s"], "s", dyn, lambda a, o: 1 if o == "win" else 0, name="stationary")
    basis = [constant_agent(iface, "a0", name="c0"), constant_agent(iface, "a1", name="c1")]
    return {"env": env, "basis": basis, "perf": PerformanceSpec.discounted(gamma)}


def _csl_counter_agent(iface: Interface, period: int, decide, name: str) -> FsmAgent:
    """Agent whose state is (history length mod period, last input seen)."""
    from .environments import csl_parse

    xs = sorted({csl_parse(o)[0] for o in iface.observations})
    states = [(c, x) for c in range(period) for x in (None, *xs)]

    def out(s):
        c, x = s
        return iface.actions[0] if x is None else decide(c, x)

    def step(s, a, o):
        return ((s[0] + 1) % period, csl_parse(o)[0])

    return FsmAgent(iface, states, (0, None), out, step, name=name)


def csl_flip_schedule(d: int = 3) -> "CslSchedule":
    """Two inputs; labels follow x_i -> y_i, then flip, alternating every d steps."""
    from .environments import CslSchedule

    half = Fraction(1, 2)
    straight = {("x0", "y0"): half, ("x1", "y1"): half}
    flipped = {("x0", "y1"): half, ("x1", "y0"): half}
    return CslSchedule(("x0", "x1"), ("y0", "y1"), [(straight, d), (flipped, d)], repeat=True)


def csl_stationary_schedule() -> "CslSchedule":
    """Labels drawn independently of the input; y0 is the three-to-one majority."""
    from .environments import CslSchedule

    q = Fraction(1, 4)
    dist = {("x0", "y0"): 3 * q / 2, ("x1", "y0"): 3 * q / 2, ("x0", "y1"): q / 2, ("x1", "y1"): q / 2}
    return CslSchedule(("x0", "x1"), ("y0", "y1"), [(dist, None)])


def csl_agent_pool(env: FsmEnvironment, d: int):
    """Constant-label basis plus classifiers, phase trackers, label followers and settlers.

    Returns (basis, agents). Phase trackers assume two alternating phases of length d.
    """
    from .environments import IGNORE, csl_parse

    iface = env.interface
    y0, y1 = iface.actions
    straight = {"x0": y0, "x1": y1}
    flipped = {"x0": y1, "x1": y0}
    basis = [constant_agent(iface, y, name=f"const-{y}") for y in iface.actions]
    period = 2 * d

    def tracker(shift):
        def decide(c, x):
            phase = (((c - 1 - shift) % period) // d) % 2
            return (straight if phase == 0 else flipped)[x]
        return decide

    agents = list(basis)
    agents.append(_csl_counter_agent(iface, 1, lambda c, x: straight[x], "classify-straight"))
    agents.append(_csl_counter_agent(iface, 1, lambda c, x: flipped[x], "classify-flipped"))
    trackers = [_csl_counter_agent(iface, period, tracker(s), f"tracker+{s}") for s in range(period)]
    agents.extend(trackers)
    follow = {None: y0, **{o: (y0 if csl_parse(o)[1] == IGNORE else csl_parse(o)[1]) for o in iface.observations}}
    agents.append(memoryless_agent(iface, follow, name="follow-last-label"))
    for k in (d, 2 * d):
        agents.append(settle_after(iface, trackers[0], y0, k, name=f"tracker-then-{y0}@{k}"))
    return basis, agents


def csl_flip_instance(d: int = 3, gamma=Fraction(9, 10)) -> CrlInstance:
    """Continual supervised learning with a periodically flipped labelling: a CRL instance."""
    from .environments import build_csl_env

    env = build_csl_env(csl_flip_schedule(d))
    basis, agents = csl_agent_pool(env, d)
    return CrlInstance(env, PerformanceSpec.discounted(gamma), agents, basis)


def csl_stationary_instance(d: int = 3, gamma=Fraction(9, 10)) -> CrlInstance:
    """Stationary label distribution: the majority constant is optimal, so not CRL."""
    from .environments import build_csl_env

    env = build_csl_env(csl_stationary_schedule())
    basis, agents = csl_agent_pool(env, d)
    return CrlInstance(env, PerformanceSpec.discounted(gamma), agents, basis)
