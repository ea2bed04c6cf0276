import itertools
import random

import pytest
from hypothesis import given, strategies as st

from crlab import catalog
from crlab.basis import (
    CandidatePool,
    are_orthogonal,
    are_parallel,
    is_minimal_over_pool,
    is_universal_fragment,
    minimal_witnesses,
    rank_over_pool,
    relate,
)
from crlab.core import FsmAgent, Interface, agents_equal, constant_agent
from crlab.errors import NoBasisInPool, PreconditionError
from crlab.fuzz import random_agent, random_interface
from crlab.operators import check_uniform_generates

from oracles import all_codes, out_at


def standard():
    target, pool = catalog.rank_example()
    return target, pool


def test_rank_of_three_agent_example_is_two():
    target, pool = standard()
    r = rank_over_pool(target, pool)
    assert r.rank == 2 and r.exhausted and r.refuted_sizes == [1]
    assert [a.name for a in r.witness_basis] == ["lambda0", "lambda1"]
    assert r.to_json()["kind"] == "pool-rank"
    assert check_uniform_generates(r.witness_basis, target).holds


def test_rank_of_singleton_is_one():
    target, pool = standard()
    assert rank_over_pool([target[2]], pool).rank == 1


def test_rank_without_basis_in_pool():
    target, pool = standard()
    with pytest.raises(NoBasisInPool):
        rank_over_pool(target, [pool[0]])


def test_non_uniqueness_two_minimal_witnesses():
    four = catalog.non_uniqueness_set()
    w = minimal_witnesses(four, four)
    assert w == [(0, 1), (2, 3)]
    for combo in w:
        basis = [four[i] for i in combo]
        assert check_uniform_generates(basis, four).holds
        assert is_minimal_over_pool(basis, four)
    # the order of the pool decides which witness rank reports
    assert rank_over_pool(four, four[2:] + four[:2]).witness_indices == (0, 1)


def test_minimality_examples():
    four = catalog.non_uniqueness_set()
    assert is_minimal_over_pool(four[:2], four)
    assert is_minimal_over_pool(four[2:], four)
    dup = constant_agent(four[0].interface, "a0", name="copy")
    assert not is_minimal_over_pool([four[0], dup], four)


def test_pool_flags_duplicates():
    four = catalog.non_uniqueness_set()
    dup = constant_agent(four[0].interface, "a0")
    pool = CandidatePool([*four, dup])
    assert pool.duplicates == [(0, 4)]
    with pytest.raises(PreconditionError):
        CandidatePool([])


def test_memoryless_basis_is_fragment_universal():
    iface = Interface(("a1", "a2"), ("o1", "o2"))
    v = is_universal_fragment(catalog.memoryless_basis(iface))
    assert v.holds and v.tag == "exact" and v.detail["fragment"]


def test_missing_action_fails_at_empty_history():
    iface = Interface(("a1", "a2", "a3"), ("o1",))
    basis = [constant_agent(iface, "a1"), constant_agent(iface, "a3")]
    v = is_universal_fragment(basis)
    assert not v.holds and v.witness == ()


def test_two_constants_universal_and_each_alone_not():
    four = catalog.non_uniqueness_set()
    assert is_universal_fragment(four[:2], depth=2).holds
    assert not is_universal_fragment(four[:1], depth=2).holds
    assert not is_universal_fragment(four[1:2], depth=2).holds


def test_orthogonal_constants():
    four = catalog.non_uniqueness_set()
    v = are_orthogonal(four[:1], four[1:2])
    assert v.holds and v.witness == ()
    assert not are_parallel(four[:1], four[1:2]).holds


def test_shared_member_not_orthogonal():
    four = catalog.non_uniqueness_set()
    assert not are_orthogonal(four[:2], four[1:3]).holds


def test_parallel_examples():
    four = catalog.non_uniqueness_set()
    assert are_parallel(four[:2], four[:2]).holds
    assert are_parallel(four[:2], four[2:]).holds
    assert relate(four[:2], four[2:])["relation"] == "parallel"
    assert relate(four[:1], four[1:2])["relation"] == "orthogonal"
    assert relate(four[:2], four[1:3])["relation"] == "neither"


def _det_agent(rng, iface, k=2):
    return random_agent(rng, iface, k, p_mixed=0.0)


@given(st.integers(0, 10_000))
def test_universal_fragment_never_orthogonal_to_deterministic_bases(seed):
    rng = random.Random(seed)
    iface = Interface(("a1", "a2"), ("o1", "o2"))
    universal = catalog.memoryless_basis(iface)
    other = [_det_agent(rng, iface) for _ in range(rng.randint(1, 2))]
    assert not are_orthogonal(universal, other).holds


@given(st.integers(0, 10_000))
def test_orthogonal_bases_are_disjoint(seed):
    rng = random.Random(seed)
    iface = random_interface(rng, 2, 1)
    b1 = [_det_agent(rng, iface) for _ in range(2)]
    b2 = [_det_agent(rng, iface) for _ in range(2)]
    if are_orthogonal(b1, b2).holds:
        assert not any(agents_equal(x, y) for x in b1 for y in b2)


@given(st.integers(0, 10_000))
def test_parallel_bases_share_rank_and_universality(seed):
    rng = random.Random(seed)
    iface = Interface(("a0", "a1"), ("o0",))
    four = catalog.non_uniqueness_set()
    extra = [_det_agent(rng, iface) for _ in range(2)]
    pool = [*four, *extra]
    for b1, b2 in itertools.combinations([list(c) for c in itertools.combinations(pool, 2)], 2):
        if are_parallel(b1, b2).holds:
            assert rank_over_pool(b1, pool).rank == rank_over_pool(b2, pool).rank
            assert is_universal_fragment(b1).holds == is_universal_fragment(b2).holds


def test_universal_fragment_bounded_by_depth_with_table_agents():
    from crlab.core import TableAgent
    four = catalog.non_uniqueness_set()
    tabled = [TableAgent.from_agent(a, 3) for a in four[:2]]
    v = is_universal_fragment(tabled)
    assert v.holds and v.tag == "bounded@3"


def test_universal_fragment_depth_upgrades_to_exact():
    iface = Interface(("a1", "a2"), ("o1",))
    flip = FsmAgent(iface, [0, 1], 0, {0: "a1", 1: "a2"}, lambda s, a, o: 1 - s)
    flop = FsmAgent(iface, [0, 1], 0, {0: "a2", 1: "a1"}, lambda s, a, o: 1 - s)
    v = is_universal_fragment([flip, flop], depth=10)
    assert v.holds and v.tag == "exact"
    for code in all_codes(iface, 3):
        assert {out_at(flip, code), out_at(flop, code)} == {out_at(constant_agent(iface, a), code) for a in iface.actions}
