import random

import pytest
from hypothesis import given, strategies as st

from crlab import catalog
from crlab.core import (
    ActionDistribution,
    Interface,
    TableAgent,
    _explore,
    constant_agent,
    period_agent,
    run_agent,
)
from crlab.errors import PreconditionError
from crlab.fuzz import random_agent, random_env, random_interface, random_rule, random_set
from crlab.operators import (
    LearningRuleFsm,
    RuleAgent,
    agreement_sets,
    check_generates,
    check_reaches,
    check_sigma_generates,
    check_uniform_generates,
    construct_generating_basis,
)

from oracles import all_codes, brute_generates, brute_reaches, brute_uniform, out_at, realizable

IFACE = Interface(("a1", "a2"), ("o1",))


def flat(iface=IFACE):
    return catalog.single_state_env(iface)


# ------------------------------------------------------------------ generates

def test_self_generation():
    c = constant_agent(IFACE, "a1")
    v = check_generates([c], [c], flat())
    assert v.holds and v.tag == "exact" and v.witness is None


def test_generates_not_commutative():
    d = catalog.generates_not_commutative()
    assert check_generates(d["big"], d["small"], d["env"]).holds
    v = check_generates(d["small"], d["big"], d["env"])
    assert not v.holds and v.witness == ()
    assert v.to_json()["witness"] == []


def test_empty_basis_refused():
    with pytest.raises(PreconditionError):
        check_generates([], [constant_agent(IFACE, "a1")], flat())
    with pytest.raises(PreconditionError):
        check_uniform_generates([], [constant_agent(IFACE, "a1")])


def test_witness_is_realizable_and_shortest():
    iface = Interface(("a1", "a2"), ("o1", "o2"))
    env = catalog.single_state_env(iface)
    lam = catalog.memoryless_agent(iface, {None: "a1", "o1": "a1", "o2": "a2"})
    v = check_generates([constant_agent(iface, "a1")], [lam], env)
    assert not v.holds
    assert v.witness == (("a1", "o2"),)


def test_uniform_subset_generation():
    target, pool = catalog.rank_example()
    assert check_uniform_generates(pool, target[:2]).holds


def test_singleton_only_generates_itself():
    target, _ = catalog.rank_example()
    assert not check_uniform_generates(target[:1], target[:2]).holds


def test_two_constants_generate_non_uniqueness_set():
    four = catalog.non_uniqueness_set()
    assert check_uniform_generates(four[:2], four).holds


def test_bounded_semantics_tag_with_table_agents():
    lam = constant_agent(IFACE, "a1")
    t = TableAgent.from_agent(lam, 3)
    v = check_generates([t], [lam], flat())
    assert v.holds and v.semantics == "bounded" and v.horizon == 3 and v.tag == "bounded@3"


@given(st.integers(0, 10_000))
def test_bounded_equals_exact_past_pumping_bound(seed):
    rng = random.Random(seed)
    iface = random_interface(rng)
    env = random_env(rng, iface)
    basis = random_set(rng, iface, 2)
    lam = random_set(rng, iface, 1, over=basis, p_derived=0.5)[0]
    exact = check_generates(basis, [lam], env)
    n = len(_explore([lam, *basis], env, 0, None))
    tabled = [TableAgent.from_agent(b, n) for b in basis]
    bounded = check_generates(tabled, [TableAgent.from_agent(lam, n)], env)
    assert bounded.semantics == "bounded"
    assert bounded.holds == exact.holds


# ------------------------------------------------------------------ sigma-generates

def test_identity_rules_generate_basis():
    target, _ = catalog.rank_example()
    basis = target[:2]
    rules = [LearningRuleFsm.constant(basis[0].interface, i) for i in range(2)]
    assert check_sigma_generates(basis, rules, basis, uniform=True).holds
    assert check_sigma_generates(basis, rules, basis, flat(basis[0].interface)).holds


def test_sigma_pigeonhole():
    iface = Interface(("a1", "a2", "a3"), ("o1",))
    basis = [constant_agent(iface, a) for a in iface.actions]
    rules = [LearningRuleFsm.constant(iface, i) for i in range(2)]
    v = check_sigma_generates(basis, rules, basis, uniform=True)
    assert not v.holds


def test_alternating_rule_generates_parity_agent():
    target, _ = catalog.rank_example()
    c0, c1, parity = target
    iface = parity.interface
    alt = LearningRuleFsm(iface, [0, 1], 0, lambda s, a, o: 1 - s, {0: 0, 1: 1})
    assert check_sigma_generates([c0, c1], [alt], [parity], uniform=True).holds
    induced = RuleAgent(alt, [c0, c1])
    for code in all_codes(iface, 4):
        assert out_at(induced, code) == out_at(parity, code)


def test_sigma_refuses_empty_rules_and_bad_indices():
    target, _ = catalog.rank_example()
    with pytest.raises(PreconditionError):
        check_sigma_generates(target[:2], [], target[:1], uniform=True)
    with pytest.raises(PreconditionError):
        check_sigma_generates(target[:2], [LearningRuleFsm.constant(target[0].interface, 5)], target[:1],
                              uniform=True)


# ------------------------------------------------------------------ reaches

def test_member_always_reaches():
    d = catalog.generates_not_commutative()
    li = d["small"][0]
    assert check_reaches(li, d["big"], d["env"], "always").holds
    assert check_reaches(li, d["big"], d["env"], "sometimes").holds


def test_never_reaches_three_action_counterexample():
    d = catalog.never_reaches_transitivity()
    for lam in d["lambda1"]:
        assert check_reaches(lam, d["lambda2"], d["env"], "never").holds


def test_lambda_j_never_reaches():
    d = catalog.sometimes_reaches_not_commutative()
    assert check_reaches(d["lambda_j"], d["lambda1"], d["env"], "never").holds


def test_unknown_modality_refused():
    c = constant_agent(IFACE, "a1")
    with pytest.raises(PreconditionError):
        check_reaches(c, [c], flat(), "often")


def test_agreement_sets_are_closed():
    iface = Interface(("a1", "a2"), ("o1", "o2"))
    env = catalog.single_state_env(iface)
    rng = random.Random(3)
    for _ in range(30):
        lam = random_agent(rng, iface)
        basis = random_set(rng, iface, 2)
        g = _explore([lam, *basis], env, 0, None)
        for j, s in enumerate(agreement_sets(g, len(basis))):
            for i in range(len(g)):
                if s[i]:
                    assert g.output(i, 0) == g.output(i, 1 + j)
                    assert all(s[k] for k in g.successors(i))


def test_bounded_reaches_watch_prefix():
    d = catalog.generates_not_commutative()
    li = d["small"][0]
    tab = TableAgent.from_agent(li, 4)
    v = check_reaches(tab, d["big"], d["env"], "sometimes")
    assert v.holds and v.tag == "bounded@4" and v.detail["watch"] == 2
    with pytest.raises(PreconditionError):
        check_reaches(tab, d["big"], d["env"], "sometimes", watch=4)


def test_always_fails_with_cycle_witness():
    # agent alternates; basis constant a1: agent never settles
    alt = period_agent(IFACE, ["a1", "a2"])
    v = check_reaches(alt, [constant_agent(IFACE, "a1")], flat(), "always")
    assert not v.holds and v.witness is not None


# ------------------------------------------------------------------ construction

def test_construct_k1_two_alternating_tables():
    iface = Interface(("a1", "a2"), ("o1",))
    env = flat(iface)
    lam = constant_agent(iface, "a1", name="lam")
    b = construct_generating_basis(lam, env, 1, 3)
    assert len(b) == 2
    codes = [c for c, _, _ in realizable(lam, env, 3)]
    a1 = ActionDistribution.point(2, 0)
    assert [run_agent(b[0], iface.decode(c)) == a1 for c in codes] == [True, False, True, False]
    assert [run_agent(b[1], iface.decode(c)) == a1 for c in codes] == [False, True, False, True]
    v = check_generates(b, [lam], env)
    assert v.holds and v.tag == "bounded@3"


def test_construct_needs_enough_histories():
    lam = constant_agent(IFACE, "a1")
    with pytest.raises(PreconditionError):
        construct_generating_basis(lam, flat(), 4, 2)
    with pytest.raises(PreconditionError):
        construct_generating_basis(lam, flat(), 0, 2)


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_construct_excludes_agent_and_generates(seed, k):
    rng = random.Random(seed)
    iface = random_interface(rng)
    lam, env = random_agent(rng, iface), random_env(rng, iface)
    T = 4
    if len(realizable(lam, env, T)) < k + 1:
        return
    b = construct_generating_basis(lam, env, k, T)
    assert check_generates(b, [lam], env).holds
    codes = [c for c, _, _ in realizable(lam, env, T)]
    for member in b:
        assert any(out_at(member, c) != out_at(lam, c) for c in codes)


# ------------------------------------------------------------------ brute-force oracles

def _instances(n, seed):
    rng = random.Random(seed)
    for _ in range(n):
        iface = random_interface(rng)
        env = random_env(rng, iface)
        A = random_set(rng, iface, rng.randint(1, 2))
        L = random_set(rng, iface, rng.randint(1, 2), over=A, p_derived=0.5)
        yield iface, env, A, L


def _depth(g):
    return max(len(g.history_to(i)) for i in range(len(g)))


def test_generates_matches_depth6_enumeration():
    compared = 0
    for iface, env, A, L in _instances(150, 11):
        graphs = [_explore([lam, *A], env, 0, None) for lam in L]
        if max(len(g) for g in graphs) > 50 or max(_depth(g) for g in graphs) > 6:
            continue
        v = check_generates(A, L, env)
        holds, wit = brute_generates(A, L, env, 6)
        assert v.holds == holds
        assert (v.witness is None and wit is None) or iface.encode(v.witness) == wit
        compared += 1
    assert compared > 50


def test_uniform_matches_depth6_enumeration():
    compared = 0
    for iface, env, A, L in _instances(150, 12):
        graphs = [_explore([lam, *A], None, None, None) for lam in L]
        if max(len(g) for g in graphs) > 50 or max(_depth(g) for g in graphs) > 4:
            continue
        v = check_uniform_generates(A, L)
        holds, wit = brute_uniform(A, L, 4)
        assert v.holds == holds
        assert (v.witness is None and wit is None) or iface.encode(v.witness) == wit
        compared += 1
    assert compared > 50


def test_reaches_matches_bounded_enumeration():
    compared = 0
    for iface, env, A, L in _instances(300, 13):
        lam = L[0]
        n = len(_explore([lam, *A], env, 0, None))
        if n > 4:
            continue
        sometimes, always = brute_reaches(lam, A, env, n)
        assert check_reaches(lam, A, env, "sometimes").holds == sometimes
        assert check_reaches(lam, A, env, "never").holds == (not sometimes)
        assert check_reaches(lam, A, env, "always").holds == always
        compared += 1
    assert compared > 50


def test_rule_agent_selects_per_history():
    rng = random.Random(5)
    iface = random_interface(rng)
    basis = random_set(rng, iface, 3)
    rule = random_rule(rng, iface, 3)
    ag = RuleAgent(rule, basis)
    for code in all_codes(iface, 3):
        k = rule.select(iface.decode(code))
        assert out_at(ag, code) == out_at(basis[k], code)
