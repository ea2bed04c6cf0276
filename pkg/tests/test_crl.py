import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crlab import catalog
from crlab.core import FsmEnvironment, Interface, TableAgent, constant_agent, period_agent
from crlab.crl import (
    CrlInstance,
    ModelBasedRule,
    PerformanceSpec,
    augment_with_optimal,
    classify_crl,
    compute_value,
    count_replans,
    markov_chain,
    node_values,
    optimal_agents,
)
from crlab.errors import PreconditionError, SpecError
from crlab.experiments import simulate_value
from crlab.fuzz import random_agent, random_env, random_interface

from oracles import average_value_by_enumeration, discounted_by_enumeration

HALF = Fraction(1, 2)


def rescaled(env, scale, shift):
    """Same dynamics, reward r -> scale * r + shift."""
    iface = env.interface
    dyn = {}
    for s in range(len(env.states)):
        dyn[s] = {}
        for ai, a in enumerate(iface.actions):
            dyn[s][a] = [(n, iface.observations[o], p) for n, o, p in env.outcomes(s, ai)]
    rew = {(a, o): scale * env.reward(ai, oi) + shift
           for ai, a in enumerate(iface.actions) for oi, o in enumerate(iface.observations)}
    return FsmEnvironment(iface, list(range(len(env.states))), env.initial_state, dyn, rew)


# ------------------------------------------------------------------ hand-solved values

def test_constant_reward_one_discounted():
    iface = Interface(("a0", "a1"), ("o",))
    env = catalog.single_state_env(iface, reward=lambda a, o: 1)
    assert compute_value(constant_agent(iface, "a0"), env, PerformanceSpec.discounted(HALF)) == 2


def test_two_node_alternating_chain():
    # V0 = 0 + V1/2, V1 = 1 + V0/2  =>  V0 = 2/3
    iface = Interface(("a0", "a1"), ("r0", "r1"))
    dyn = {s: {a: [(1 - s, f"r{s}", 1)] for a in iface.actions} for s in (0, 1)}
    env = FsmEnvironment(iface, [0, 1], 0, dyn, lambda a, o: 1 if o == "r1" else 0)
    lam = constant_agent(iface, "a0")
    assert compute_value(lam, env, PerformanceSpec.discounted(HALF)) == Fraction(2, 3)
    assert compute_value(lam, env, PerformanceSpec.discounted(HALF), (("a0", "r0"),)) == Fraction(4, 3)


def test_average_of_plus_minus_one():
    iface = Interface(("a0", "a1"), ("up", "down"))
    dyn = {0: {a: [(1, "up", 1)] for a in iface.actions}, 1: {a: [(0, "down", 1)] for a in iface.actions}}
    env = FsmEnvironment(iface, [0, 1], 0, dyn, lambda a, o: 1 if o == "up" else -1)
    lam = constant_agent(iface, "a1")
    assert compute_value(lam, env, PerformanceSpec.average(2)) == 0
    assert compute_value(lam, env, PerformanceSpec.average(3)) == Fraction(1, 3)


def test_performance_spec_validation():
    with pytest.raises(SpecError):
        PerformanceSpec.discounted(1)
    with pytest.raises(SpecError):
        PerformanceSpec.average(0)
    with pytest.raises(SpecError):
        PerformanceSpec("median")


def test_table_agent_discounted_needs_truncation():
    iface = Interface(("a0", "a1"), ("o",))
    env = catalog.single_state_env(iface, reward=lambda a, o: 1)
    t = TableAgent.from_agent(constant_agent(iface, "a0"), 3)
    with pytest.raises(PreconditionError):
        compute_value(t, env, PerformanceSpec.discounted(HALF))
    assert compute_value(t, env, PerformanceSpec.discounted(HALF, truncation=3)) == Fraction(7, 4)


# ------------------------------------------------------------------ enumeration oracles

@given(st.integers(0, 10_000), st.integers(1, 4))
def test_average_value_matches_enumeration(seed, T):
    rng = random.Random(seed)
    iface = random_interface(rng)
    lam, env = random_agent(rng, iface), random_env(rng, iface)
    assert compute_value(lam, env, PerformanceSpec.average(T)) == average_value_by_enumeration(lam, env, T)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_truncated_discounted_matches_enumeration(seed, depth):
    rng = random.Random(seed)
    iface = random_interface(rng)
    lam, env = random_agent(rng, iface), random_env(rng, iface)
    g = Fraction(rng.randint(1, 9), 10)
    perf = PerformanceSpec.discounted(g, truncation=depth)
    assert compute_value(lam, env, perf) == discounted_by_enumeration(lam, env, g, depth)


@given(st.integers(0, 10_000))
def test_discounted_bellman_residual_is_zero(seed):
    rng = random.Random(seed)
    iface = random_interface(rng)
    lam, env = random_agent(rng, iface, 3), random_env(rng, iface, 3)
    g = Fraction(rng.randint(0, 9), 10)
    start = [(lam.initial_state, env.initial_state)]
    nodes, index, P, r = markov_chain(lam, env, start)
    idx, V = node_values(lam, env, PerformanceSpec.discounted(g), start)
    assert idx == index
    for i in range(len(nodes)):
        assert V[i] == r[i] + g * sum((p * V[j] for j, p in P[i].items()), Fraction(0))


@given(st.integers(0, 10_000))
def test_discounted_value_bounded_by_reward_range(seed):
    rng = random.Random(seed)
    iface = random_interface(rng)
    lam, env = random_agent(rng, iface), random_env(rng, iface)
    g = Fraction(rng.randint(0, 9), 10)
    lo, hi = env.reward_bounds()
    v = compute_value(lam, env, PerformanceSpec.discounted(g))
    assert lo / (1 - g) <= v <= hi / (1 - g)


@pytest.mark.slow
def test_monte_carlo_discounted_within_three_se():
    rng = random.Random(77)
    misses = 0
    for i in range(20):
        iface = random_interface(rng)
        lam, env = random_agent(rng, iface), random_env(rng, iface)
        perf = PerformanceSpec.discounted(Fraction(4, 5))
        est = simulate_value(lam, env, perf, rollouts=1000, seed=i)
        misses += not est.within(compute_value(lam, env, perf))
    assert misses <= 1


# ------------------------------------------------------------------ optimal agents and CRL

def test_optimal_agents_ties_and_singleton():
    iface = Interface(("a0", "a1"), ("o",))
    env = catalog.single_state_env(iface, reward=lambda a, o: 1)
    perf = PerformanceSpec.discounted(HALF)
    both = [constant_agent(iface, "a0"), constant_agent(iface, "a1")]
    assert optimal_agents(both, env, perf) == both
    assert optimal_agents(both[:1], env, perf) == both[:1]
    with pytest.raises(PreconditionError):
        optimal_agents([], env, perf)


def test_optimal_agents_bandit():
    d = catalog.stationary_bandit()
    assert [a.name for a in optimal_agents(d["basis"], d["env"], d["perf"])] == ["c0"]


def test_agents_inside_basis_is_not_crl():
    inst = catalog.two_phase_toy()["instance"]
    sub = CrlInstance(inst.env, inst.perf, list(inst.basis), list(inst.basis))
    rep = classify_crl(sub)
    assert not rep.is_crl and not rep.basis_proper
    assert rep.to_json()["is_crl"] is False


def test_toy_is_crl_and_augmenting_breaks_it():
    toy = catalog.two_phase_toy()
    rep = classify_crl(toy["instance"])
    assert rep.is_crl
    assert "model-based" in rep.optimal_ids
    assert rep.basis_generates.holds and rep.basis_subset and rep.basis_proper
    aug = augment_with_optimal(toy["instance"])
    assert len(aug.basis) == len(toy["instance"].basis) + len(rep.optimal_ids)
    assert not classify_crl(aug).is_crl


def test_stationary_bandit_is_not_crl():
    d = catalog.stationary_bandit()
    agents = [*d["basis"], period_agent(d["basis"][0].interface, ["a0", "a1"], name="alt")]
    rep = classify_crl(CrlInstance(d["env"], d["perf"], agents, d["basis"]))
    assert not rep.is_crl and rep.optimal_ids == ["c0"]


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_crl_is_antitone_in_the_basis(seed):
    rng = random.Random(seed)
    iface = random_interface(rng)
    env = random_env(rng, iface)
    small = [random_agent(rng, iface) for _ in range(rng.randint(1, 2))]
    extra = [random_agent(rng, iface) for _ in range(rng.randint(1, 2))]
    agents = [*small, *extra, *(random_agent(rng, iface) for _ in range(2))]
    perf = PerformanceSpec.discounted(Fraction(1, 2))
    if classify_crl(CrlInstance(env, perf, agents, [*small, *extra])).is_crl:
        assert classify_crl(CrlInstance(env, perf, agents, small)).is_crl


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(-3, 3))
def test_crl_invariant_under_positive_affine_rewards(seed, scale, shift):
    rng = random.Random(seed)
    iface = random_interface(rng)
    env = random_env(rng, iface)
    basis = [random_agent(rng, iface) for _ in range(2)]
    agents = [*basis, *(random_agent(rng, iface) for _ in range(3))]
    perf = PerformanceSpec.discounted(Fraction(1, 2))
    a = classify_crl(CrlInstance(env, perf, agents, basis))
    b = classify_crl(CrlInstance(rescaled(env, scale, shift), perf, agents, basis))
    assert a.optimal_ids == b.optimal_ids and a.is_crl == b.is_crl


# ------------------------------------------------------------------ model-based rule

def test_model_based_singleton_basis_always_selects_it():
    d = catalog.stationary_bandit()
    rule = ModelBasedRule(d["basis"][1:], d["env"], d["perf"])
    assert rule.select(()) == 0
    assert rule.select((("a1", "lose"),)) == 0
    rep = count_replans(rule, d["env"], 4)
    assert sum(rep.per_depth.values()) == 0


def test_model_based_ties_go_to_lowest_index():
    iface = Interface(("a0", "a1"), ("o",))
    env = catalog.single_state_env(iface, reward=lambda a, o: 0)
    basis = [constant_agent(iface, "a1"), constant_agent(iface, "a0")]
    rule = ModelBasedRule(basis, env, PerformanceSpec.discounted(HALF))
    assert rule.values(()) == [0, 0]
    assert rule.select(()) == 0


def test_model_based_follows_a_phase_change():
    env = catalog.two_phase_env(Fraction(1, 10))
    iface = env.interface
    basis = [constant_agent(iface, "a0", name="c0"), constant_agent(iface, "a1", name="c1")]
    rule = ModelBasedRule(basis, env, PerformanceSpec.discounted(Fraction(9, 10)))
    assert rule.select(()) == 0
    # a loss is only possible once the phase has switched
    assert rule.select((("a0", "win"),)) == 0
    assert rule.select((("a0", "win"), ("a0", "lose"))) == 1
    assert rule.select((("a0", "win"), ("a0", "lose"), ("a1", "win"))) == 1


def test_model_based_rule_machine_matches_direct_selection():
    toy = catalog.two_phase_toy()
    rule = toy["rule"]
    lr = rule.to_learning_rule()
    from oracles import all_codes
    iface = rule.interface
    for code in all_codes(iface, 3):
        h = iface.decode(code)
        try:
            direct = rule.select(h)
        except PreconditionError:
            continue
        assert lr.select(h) == direct


def test_model_based_refuses_empty_basis():
    env = catalog.two_phase_env()
    with pytest.raises(PreconditionError):
        ModelBasedRule([], env, PerformanceSpec.discounted(HALF))


def test_static_basis_never_replans():
    d = catalog.stationary_bandit()
    rule = ModelBasedRule(d["basis"], d["env"], d["perf"])
    rep = count_replans(rule, d["env"], 5)
    assert all(v == 0 for v in rep.per_depth.values())
    assert not rep.every_history_replans and rep.stuck_history == ()


def test_toy_rule_replans_after_every_history():
    toy = catalog.two_phase_toy()
    rep = count_replans(toy["rule"], toy["instance"].env, 6)
    assert rep.every_history_replans and rep.stuck_history is None
    assert rep.per_depth[1] == 0 and all(rep.per_depth[d] > 0 for d in range(2, 7))
    assert rep.to_json()["total"] == sum(rep.per_depth.values())
    with pytest.raises(PreconditionError):
        count_replans(toy["rule"], toy["instance"].env, 0)
