"""Rank, minimality, fragment universality, orthogonal and parallel bases.

All searches are relative to a finite candidate pool, and universality is
restricted to agents whose outputs lie in a finite menu of distributions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .core import ActionDistribution, Agent, Interface, _check_interfaces, _explore, agents_equal, as_agent_list
from .errors import NoBasisInPool, PreconditionError
from .operators import Verdict, check_uniform_generates, table_horizon, _verdict


@dataclass
class CandidatePool:
    agents: list
    duplicates: list = field(default_factory=list)  # index pairs of behaviorally identical members

    def __post_init__(self):
        self.agents = as_agent_list(self.agents)
        if not self.agents:
            raise PreconditionError("candidate pool is empty")
        _check_interfaces(self.agents)
        self.duplicates = [
            (i, j)
            for i, j in itertools.combinations(range(len(self.agents)), 2)
            if agents_equal(self.agents[i], self.agents[j])
        ]

    def __len__(self):
        return len(self.agents)

    def __iter__(self):
        return iter(self.agents)


def _pool(pool) -> CandidatePool:
    return pool if isinstance(pool, CandidatePool) else CandidatePool(list(pool))


@dataclass
class RankResult:
    rank: int
    witness_basis: list
    witness_indices: tuple
    exhausted: bool
    refuted_sizes: list

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "kind": "pool-rank",
            "witness": [a.name if a.name is not None else f"pool[{i}]" for a, i in zip(self.witness_basis, self.witness_indices)],
            "witness_indices": list(self.witness_indices),
            "refuted_sizes": list(self.refuted_sizes),
            "exhausted": self.exhausted,
        }


def rank_over_pool(target: Sequence[Agent], pool) -> RankResult:
    """Smallest pool subset that uniformly generates ``target`` (canonical tie-break)."""
    target = as_agent_list(target)
    pool = _pool(pool)
    refuted = []
    for size in range(1, len(pool) + 1):
        for combo in itertools.combinations(range(len(pool)), size):
            basis = [pool.agents[i] for i in combo]
            if check_uniform_generates(basis, target).holds:
                return RankResult(size, basis, combo, True, refuted)
        refuted.append(size)
    raise NoBasisInPool("no subset of the pool uniformly generates the target")


def minimal_witnesses(target: Sequence[Agent], pool) -> list:
    """Every pool subset of minimum size that uniformly generates ``target``."""
    r = rank_over_pool(target, pool)
    pool = _pool(pool)
    return [
        combo
        for combo in itertools.combinations(range(len(pool)), r.rank)
        if check_uniform_generates([pool.agents[i] for i in combo], target).holds
    ]


def is_minimal_over_pool(basis: Sequence[Agent], pool) -> bool:
    """No pool subset smaller than ``basis`` uniformly generates it."""
    basis = as_agent_list(basis)
    pool = _pool(pool)
    for size in range(1, len(basis)):
        for combo in itertools.combinations(pool.agents, size):
            if check_uniform_generates(list(combo), basis).holds:
                return False
    return True


def point_menu(interface: Interface) -> list:
    return [ActionDistribution.point(interface.n_actions, i) for i in range(interface.n_actions)]


def is_universal_fragment(basis: Sequence[Agent], interface: Interface | None = None, menu=None,
                          depth: int | None = None) -> Verdict:
    """Does every menu distribution appear among basis outputs at every history?

    Without ``depth`` the whole joint-state graph is explored and the verdict is
    exact; with a depth the check stops there unless the graph closes earlier.
    """
    basis = as_agent_list(basis)
    if not basis:
        raise PreconditionError("empty basis")
    iface = _check_interfaces(basis, interface)
    menu = point_menu(iface) if menu is None else [ActionDistribution.coerce(iface, m) for m in menu]
    if not menu:
        raise PreconditionError("empty distribution menu")
    T = table_horizon(basis)
    limit = T if depth is None else (depth if T is None else min(depth, T))
    g = _explore(basis, None, None, limit)
    semantics_h = limit
    if limit is not None and T is None:
        # the pumping bound: a graph explored past its node count is complete
        full = _explore(basis, None, None, None)
        if limit >= len(full):
            g, semantics_h = full, None
    for i in range(len(g)):
        outs = {g.output(i, k) for k in range(len(basis))}
        missing = [m for m in menu if m not in outs]
        if missing:
            return _verdict(False, semantics_h, iface.decode(g.history_to(i)),
                            missing=[str(m) for m in missing], fragment=True)
    return _verdict(True, semantics_h, fragment=True)


def are_orthogonal(b1: Sequence[Agent], b2: Sequence[Agent]) -> Verdict:
    """Holds iff at some history the two bases share no output distribution.

    A common generated agent exists exactly when every history has a shared
    output, since the universal rule set may pick freely at each history.
    """
    b1, b2 = as_agent_list(b1), as_agent_list(b2)
    if not b1 or not b2:
        raise PreconditionError("empty basis")
    iface = _check_interfaces([*b1, *b2])
    T = table_horizon([*b1, *b2])
    g = _explore([*b1, *b2], None, None, T)
    n1 = len(b1)
    for i in range(len(g)):
        o1 = {g.output(i, k) for k in range(n1)}
        o2 = {g.output(i, n1 + k) for k in range(len(b2))}
        if not (o1 & o2):
            return _verdict(True, T, iface.decode(g.history_to(i)))
    return _verdict(False, T)


def are_parallel(b1: Sequence[Agent], b2: Sequence[Agent]) -> Verdict:
    """Mutual uniform generation."""
    forward = check_uniform_generates(b1, b2)
    if not forward.holds:
        return Verdict(False, forward.semantics, forward.horizon, forward.witness, {"direction": "b1 -> b2"})
    backward = check_uniform_generates(b2, b1)
    if not backward.holds:
        return Verdict(False, backward.semantics, backward.horizon, backward.witness, {"direction": "b2 -> b1"})
    h = forward.horizon if forward.horizon is not None else backward.horizon
    return _verdict(True, h)


def relate(b1: Sequence[Agent], b2: Sequence[Agent]) -> dict:
    """Classify a pair of bases as orthogonal, parallel or neither."""
    orth = are_orthogonal(b1, b2)
    par = are_parallel(b1, b2)
    if orth.holds:
        rel, v = "orthogonal", orth
    elif par.holds:
        rel, v = "parallel", par
    else:
        rel, v = "neither", par
    return {"relation": rel, "semantics": v.tag,
            "witness": None if v.witness is None else [list(p) for p in v.witness]}
