"""Random small agents and environments, and the operator laws checked over them."""
from __future__ import annotations

import random
from fractions import Fraction

from .core import ActionDistribution, FsmAgent, FsmEnvironment, Interface, _explore, agents_equal
from .operators import (
    LearningRuleFsm,
    RuleAgent,
    check_generates,
    check_reaches,
    check_sigma_generates,
    check_uniform_generates,
)

_SPLITS = (Fraction(1, 2), Fraction(1, 3), Fraction(1, 4))


def random_interface(rng: random.Random, max_actions: int = 3, max_obs: int = 2) -> Interface:
    na = rng.randint(2, max_actions)
    no = rng.randint(1, max_obs)
    return Interface(tuple(f"a{i}" for i in range(na)), tuple(f"o{i}" for i in range(no)))


def random_distribution(rng: random.Random, iface: Interface, p_mixed: float = 0.2) -> ActionDistribution:
    n = iface.n_actions
    if rng.random() >= p_mixed:
        return ActionDistribution.point(n, rng.randrange(n))
    i, j = rng.sample(range(n), 2)
    p = rng.choice(_SPLITS)
    probs = [Fraction(0)] * n
    probs[i], probs[j] = p, 1 - p
    return ActionDistribution(tuple(probs))


def random_agent(rng: random.Random, iface: Interface, max_states: int = 2, p_mixed: float = 0.2,
                 name=None) -> FsmAgent:
    k = rng.randint(1, max_states)
    out = {s: random_distribution(rng, iface, p_mixed) for s in range(k)}
    step = {(s, a, o): rng.randrange(k) for s in range(k) for a in iface.actions for o in iface.observations}
    return FsmAgent(iface, list(range(k)), 0, out, step, name=name)


def random_env(rng: random.Random, iface: Interface, max_states: int = 2, name=None) -> FsmEnvironment:
    k = rng.randint(1, max_states)
    dyn = {}
    for s in range(k):
        dyn[s] = {}
        for a in iface.actions:
            if rng.random() < 0.5:
                dyn[s][a] = [(rng.randrange(k), rng.choice(iface.observations), 1)]
            else:
                p = rng.choice(_SPLITS)
                dyn[s][a] = [
                    (rng.randrange(k), rng.choice(iface.observations), p),
                    (rng.randrange(k), rng.choice(iface.observations), 1 - p),
                ]
    rew = {(a, o): rng.randint(-1, 1) for a in iface.actions for o in iface.observations}
    return FsmEnvironment(iface, list(range(k)), 0, dyn, rew, name=name)


def random_rule(rng: random.Random, iface: Interface, n_basis: int, max_states: int = 2) -> LearningRuleFsm:
    k = rng.randint(1, max_states)
    step = {(s, a, o): rng.randrange(k) for s in range(k) for a in iface.actions for o in iface.observations}
    return LearningRuleFsm(iface, list(range(k)), 0, step, {s: rng.randrange(n_basis) for s in range(k)})


def random_set(rng: random.Random, iface: Interface, size: int, over=None, p_derived: float = 0.6,
               max_states: int = 2) -> list:
    """Agents drawn at random, or (with probability p_derived) switched over ``over``."""
    out = []
    for _ in range(size):
        if over and rng.random() < p_derived:
            out.append(RuleAgent(random_rule(rng, iface, len(over), max_states), over))
        else:
            out.append(random_agent(rng, iface, max_states))
    return out


def graph_size(participants, env) -> int:
    return len(_explore(list(participants), env, 0, None))


LAWS = (
    "generates-transitivity",
    "uniform-transitivity",
    "uniform-implies-generates",
    "superset-monotonicity",
    "sometimes-never-complement",
    "always-implies-sometimes",
    "membership-implies-always",
    "pigeonhole",
)


def check_laws(rng: random.Random, max_states: int = 2) -> dict:
    """One random instance; returns {law: None | True | description}.

    None means the premises did not hold (vacuous), True means the law held
    non-vacuously, and a string describes a violation.
    """
    iface = random_interface(rng)
    env = random_env(rng, iface, max_states)
    A = random_set(rng, iface, rng.randint(1, 2), max_states=max_states)
    B = random_set(rng, iface, rng.randint(1, 2), over=A, max_states=max_states)
    C = random_set(rng, iface, rng.randint(1, 2), over=B, max_states=max_states)
    res: dict = {}

    ab, bc = check_generates(A, B, env).holds, check_generates(B, C, env).holds
    if ab and bc:
        res[LAWS[0]] = True if check_generates(A, C, env).holds else "A=>B and B=>C but not A=>C"
    else:
        res[LAWS[0]] = None

    uab, ubc = check_uniform_generates(A, B).holds, check_uniform_generates(B, C).holds
    if uab and ubc:
        res[LAWS[1]] = True if check_uniform_generates(A, C).holds else "uniform A=>B, B=>C but not A=>C"
    else:
        res[LAWS[1]] = None

    if uab:
        res[LAWS[2]] = True if ab else "uniform A=>B without A=>B in env"
    else:
        res[LAWS[2]] = None

    if ab:
        extra = random_set(rng, iface, 1, max_states=max_states)
        ok = check_generates([*A, *extra], B, env).holds and check_generates(A, B[:1], env).holds
        res[LAWS[3]] = True if ok else "adding to the basis or shrinking the target broke generation"
    else:
        res[LAWS[3]] = None

    agent = B[0]
    some = check_reaches(agent, A, env, "sometimes").holds
    never = check_reaches(agent, A, env, "never").holds
    always = check_reaches(agent, A, env, "always").holds
    res[LAWS[4]] = True if some != never else "sometimes and never agree"
    res[LAWS[5]] = (True if some else "always without sometimes") if always else None
    member = check_reaches(A[0], A, env, "always").holds
    res[LAWS[6]] = True if member else "basis member does not always reach its basis"

    rules = [random_rule(rng, iface, len(A), max_states) for _ in range(rng.randint(1, 2))]
    lam = random_set(rng, iface, len(rules) + 1, over=A, max_states=max_states)
    distinct = all(not agents_equal(x, y) for i, x in enumerate(lam) for y in lam[i + 1:])
    if distinct:
        v = check_sigma_generates(A, rules, lam, uniform=True).holds
        res[LAWS[7]] = True if not v else f"{len(rules)} rules generated {len(lam)} distinct agents"
    else:
        res[LAWS[7]] = None
    return res


def run_laws(n: int = 500, seed: int = 0, max_states: int = 2) -> dict:
    """Summary {law: {"checked", "violations", "examples"}} over n random instances."""
    rng = random.Random(seed)
    summary = {law: {"checked": 0, "violations": 0, "examples": []} for law in LAWS}
    for k in range(n):
        for law, r in check_laws(rng, max_states).items():
            if r is None:
                continue
            summary[law]["checked"] += 1
            if r is not True:
                summary[law]["violations"] += 1
                if len(summary[law]["examples"]) < 3:
                    summary[law]["examples"].append({"instance": k, "detail": r})
    return summary
