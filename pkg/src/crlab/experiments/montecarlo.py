"""Monte Carlo estimates of a fixed agent's performance, for cross-checking exact values."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Agent, FsmEnvironment, _check_interfaces
from ..crl import PerformanceSpec
from ..errors import PreconditionError


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    rollouts: int
    horizon: int
    bias: float = 0.0  # bound on the truncated tail

    def within(self, value, k: float = 3.0) -> bool:
        return abs(self.mean - float(value)) <= k * self.se + self.bias + 1e-12


def _tables(agent: Agent, env: FsmEnvironment):
    # float copies of the agent's and env's distributions, built lazily per state
    out_cache: dict = {}
    env_cache: dict = {}

    def act(x):
        c = out_cache.get(x)
        if c is None:
            c = out_cache[x] = np.cumsum([float(p) for p in agent.output(x).probs])
        return c

    def outcome(s, a):
        c = env_cache.get((s, a))
        if c is None:
            rows = env.outcomes(s, a)
            c = env_cache[(s, a)] = (np.cumsum([float(p) for _, _, p in rows]), rows)
        return c

    return act, outcome


def _pick(cum, u: float) -> int:
    k = int(np.searchsorted(cum, u, side="right"))
    return min(k, len(cum) - 1)


def simulate_value(agent: Agent, env: FsmEnvironment, perf: PerformanceSpec, rollouts: int = 2000,
                   seed: int = 0, tolerance: float = 1e-9) -> Estimate:
    """Sample mean and standard error of the performance from the empty history.

    Discounted returns are truncated once the remaining tail is below ``tolerance``.
    """
    _check_interfaces([agent, env])
    if rollouts < 2:
        raise PreconditionError("need at least two rollouts for a standard error")
    if perf.kind == "average":
        H, disc, scale, bias = perf.T, 1.0, 1.0 / perf.T, 0.0
    else:
        g = float(perf.gamma)
        lo, hi = env.reward_bounds()
        rmax = max(abs(float(lo)), abs(float(hi)), 1e-300)
        H = 1 if g == 0 else max(1, math.ceil(math.log(tolerance * (1 - g) / rmax) / math.log(g)))
        disc, scale = g, 1.0
        bias = rmax * g ** H / (1 - g)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2])))
    act, outcome = _tables(agent, env)
    totals = np.empty(rollouts)
    for n in range(rollouts):
        us = rng.random((H, 2))
        x, s = agent.initial_state, env.initial_state
        total, w = 0.0, 1.0
        for t in range(H):
            a = _pick(act(x), us[t, 0])
            cum, rows = outcome(s, a)
            s2, o, _ = rows[_pick(cum, us[t, 1])]
            total += w * float(env.reward(a, o))
            w *= disc
            x, s = agent.next_state(x, a, o), s2
        totals[n] = total * scale
    return Estimate(float(totals.mean()), float(totals.std(ddof=1) / math.sqrt(rollouts)), rollouts, H, bias)
