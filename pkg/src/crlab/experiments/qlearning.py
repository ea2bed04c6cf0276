"""Continual versus annealed epsilon-greedy Q-learning on a switching suite.

Randomness: run r of a study with master seed m draws from two PCG64 streams
seeded by SeedSequence([m + r, 0]) (environment) and SeedSequence([m + r, 1])
(agent). All uniforms are drawn up front, so the environment's event stream
does not depend on the learner and configs share it run by run.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..environments import SwitchingSpec, TabularMdp
from ..errors import PreconditionError, SpecError

RNG_NAME = "numpy.PCG64 via SeedSequence([master_seed + run, stream]); stream 0 = environment, 1 = agent"


def _load_kernel():
    if os.environ.get("CRLAB_PURE_PYTHON") == "1":
        from . import _pykernel
        return _pykernel.simulate, "python"
    try:
        from . import _kernel
        return _kernel.simulate, "compiled"
    except ImportError:
        from . import _pykernel
        return _pykernel.simulate, "python"


_simulate, BACKEND = _load_kernel()


@dataclass(frozen=True)
class QLearnerConfig:
    epsilon: float = 0.15
    alpha0: float = 0.1
    annealing: str = "none"  # "none" | "harmonic"
    kappa: float = 100.0
    gamma: float = 0.95
    q_init: float = 0.0
    name: str | None = None

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise SpecError("epsilon must lie in [0, 1]")
        if not self.alpha0 > 0:
            raise SpecError("alpha0 must be positive")
        if not 0 <= self.gamma < 1:
            raise SpecError("gamma must lie in [0, 1)")
        if self.annealing not in ("none", "harmonic"):
            raise SpecError(f"unknown annealing {self.annealing!r}")
        if self.annealing == "harmonic" and not self.kappa > 0:
            raise SpecError("kappa must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return "continual" if self.annealing == "none" else "annealed"

    def step_size(self, visits: int) -> float:
        if self.annealing == "none":
            return self.alpha0
        return self.alpha0 * self.kappa / (self.kappa + visits)

    @classmethod
    def continual(cls, **kw) -> "QLearnerConfig":
        return cls(annealing="none", **kw)

    @classmethod
    def annealed(cls, **kw) -> "QLearnerConfig":
        return cls(annealing="harmonic", **kw)


@dataclass
class RunStats:
    bin_start: list
    mean: list
    ci_half: list
    runs: int
    seed: int
    bin_width: int
    steps: int
    config: dict
    env: dict
    episode_cap: int
    rng: str = RNG_NAME
    backend: str = BACKEND
    per_run: np.ndarray | None = field(default=None, repr=False)  # runs x bins
    switch_times: list = field(default_factory=list, repr=False)
    max_abs_q: float = 0.0

    def manifest(self) -> dict:
        return {
            "config": self.config, "env": self.env, "runs": self.runs, "seed": self.seed,
            "steps": self.steps, "bin_width": self.bin_width, "episode_cap": self.episode_cap,
            "rng": self.rng, "backend": self.backend, "max_abs_q": self.max_abs_q,
        }

    def to_json(self) -> dict:
        return {**self.manifest(), "bin_start": self.bin_start, "mean": self.mean, "ci_half": self.ci_half}

    def csv_rows(self, config_id=None) -> list:
        cid = config_id or self.config.get("name") or "config"
        return [(b, m, c, cid) for b, m, c in zip(self.bin_start, self.mean, self.ci_half)]


def suite_arrays(env) -> dict:
    """Dense float arrays for the kernel: cumulative transition rows per (index, s, a)."""
    if isinstance(env, TabularMdp):
        env = SwitchingSpec([env], 0)
    if not isinstance(env, SwitchingSpec):
        raise PreconditionError("Q-learning runs need a tabular MDP or switching suite")
    first = env.mdps[0]
    sidx = {s: k for k, s in enumerate(first.states)}
    n, S, A = env.n, len(first.states), len(first.actions)
    K = max(
        sum(1 for p in m.transition[s][a].values() if p) for m in env.mdps for s in first.states for a in first.actions
    )
    cum = np.ones((n, S, A, K))
    nxt = np.zeros((n, S, A, K), dtype=np.int64)
    rew = np.zeros((n, S, A, K))
    term = np.zeros((n, S), dtype=np.uint8)
    for i, m in enumerate(env.mdps):
        for s in m.terminals:
            term[i, sidx[s]] = 1
        for s in first.states:
            for ai, a in enumerate(first.actions):
                acc = 0.0
                row = [(s2, p) for s2, p in m.transition[s][a].items() if p]
                for k, (s2, p) in enumerate(row):
                    acc += float(p)
                    cum[i, sidx[s], ai, k] = acc
                    nxt[i, sidx[s], ai, k] = sidx[s2]
                    rew[i, sidx[s], ai, k] = float(m.r(s, a, s2))
                cum[i, sidx[s], ai, len(row) - 1] = 1.0
                for k in range(len(row), K):  # pad with the last outcome
                    nxt[i, sidx[s], ai, k] = nxt[i, sidx[s], ai, len(row) - 1]
                    rew[i, sidx[s], ai, k] = rew[i, sidx[s], ai, len(row) - 1]
    return {
        "cum": cum, "nxt": nxt, "rew": rew, "term": term, "start": sidx[first.start],
        "p_switch": float(env.p_switch), "n": n, "states": S, "actions": A,
        "r_max": float(np.abs(rew).max()) if rew.size else 0.0,
    }


def _streams(master_seed: int, run: int, steps: int) -> tuple:
    env_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed + run, 0])))
    agent_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed + run, 1])))
    return env_rng.random((3, steps)), agent_rng.random((2, steps))


def single_run(arrays: dict, config: QLearnerConfig, steps: int, seed: int, run: int, bin_width: int,
               episode_cap: int) -> tuple:
    """One run; returns (bin sums, bin counts, switch flags, max |Q|)."""
    n_bins = math.ceil(steps / bin_width)
    env_u, agent_u = _streams(seed, run, steps)
    bin_sum = np.zeros(n_bins)
    bin_cnt = np.zeros(n_bins, dtype=np.int64)
    switched = np.zeros(steps, dtype=np.uint8)
    max_abs = _simulate(
        arrays["cum"], arrays["nxt"], arrays["rew"], arrays["term"], arrays["start"], arrays["p_switch"],
        env_u, agent_u, float(config.epsilon), float(config.alpha0), config.annealing == "harmonic",
        float(config.kappa), float(config.gamma), float(config.q_init), int(bin_width), int(episode_cap),
        bin_sum, bin_cnt, switched,
    )
    return bin_sum, bin_cnt, switched, float(max_abs)


def _aggregate(per_run: np.ndarray) -> tuple:
    runs = per_run.shape[0]
    mean = np.nanmean(per_run, axis=0) if runs else np.zeros(per_run.shape[1])
    if runs > 1:
        sd = np.nanstd(per_run, axis=0, ddof=1)
        counts = np.sum(~np.isnan(per_run), axis=0)
        half = 1.96 * sd / np.sqrt(np.maximum(counts, 1))
    else:
        half = np.zeros(per_run.shape[1])
    return mean, np.nan_to_num(half)


def run_q_learning(env, config: QLearnerConfig, steps: int = 200_000, runs: int = 100, master_seed: int = 0,
                   bin_width: int = 1000, episode_cap: int = 100) -> RunStats:
    """Per-bin mean episodic reward across independent runs, with 95% normal CIs."""
    if steps < 1 or runs < 1:
        raise PreconditionError("steps and runs must be at least 1")
    if bin_width < 1 or episode_cap < 1:
        raise PreconditionError("bin width and episode cap must be at least 1")
    arrays = suite_arrays(env)
    n_bins = math.ceil(steps / bin_width)
    per_run = np.full((runs, n_bins), np.nan)
    switches = []
    max_abs = 0.0
    for run in range(runs):
        bs, bc, sw, mq = single_run(arrays, config, steps, master_seed, run, bin_width, episode_cap)
        with np.errstate(invalid="ignore", divide="ignore"):
            per_run[run] = np.where(bc > 0, bs / np.maximum(bc, 1), np.nan)
        switches.append(tuple(int(t) for t in np.flatnonzero(sw)))
        max_abs = max(max_abs, mq)
    mean, half = _aggregate(per_run)
    return RunStats(
        bin_start=[b * bin_width for b in range(n_bins)],
        mean=[float(x) for x in mean], ci_half=[float(x) for x in half],
        runs=runs, seed=master_seed, bin_width=bin_width, steps=steps,
        config={**asdict(config), "name": config.label},
        env={"n": arrays["n"], "p_switch": arrays["p_switch"], "states": arrays["states"], "actions": arrays["actions"]},
        episode_cap=episode_cap, per_run=per_run, switch_times=switches, max_abs_q=max_abs,
    )


@dataclass
class Comparison:
    baseline: RunStats
    variants: list
    differences: list  # per variant: {"config", "mean", "ci_half"} against the baseline

    def to_json(self) -> dict:
        return {
            "baseline": self.baseline.to_json(),
            "variants": [v.to_json() for v in self.variants],
            "differences": self.differences,
        }

    def csv_rows(self) -> list:
        rows = list(self.baseline.csv_rows())
        for v in self.variants:
            rows.extend(v.csv_rows())
        for d in self.differences:
            cid = f"{d['config']}-minus-{self.baseline.config['name']}"
            rows.extend((b, m, c, cid) for b, m, c in zip(self.baseline.bin_start, d["mean"], d["ci_half"]))
        return rows


def compare_variants(env, configs: list, steps: int = 200_000, runs: int = 100, master_seed: int = 0,
                     bin_width: int = 1000, episode_cap: int = 100) -> Comparison:
    """Run every config on the same per-run random streams; paired differences against configs[0]."""
    if len(configs) < 2:
        raise PreconditionError("compare needs at least two configs")
    stats = [run_q_learning(env, c, steps, runs, master_seed, bin_width, episode_cap) for c in configs]
    base = stats[0]
    diffs = []
    for c, st in zip(configs[1:], stats[1:]):
        mean, half = _aggregate(st.per_run - base.per_run)
        diffs.append({"config": st.config["name"], "mean": [float(x) for x in mean], "ci_half": [float(x) for x in half]})
    return Comparison(base, stats[1:], diffs)


def late_window(stats: RunStats, fraction: float = 0.25) -> tuple:
    """Mean and 95% half-width of the per-run average over the final ``fraction`` of bins."""
    n_bins = len(stats.bin_start)
    k = max(1, int(round(n_bins * fraction)))
    per_run = np.nanmean(stats.per_run[:, -k:], axis=1)
    mean = float(np.mean(per_run))
    half = float(1.96 * np.std(per_run, ddof=1) / math.sqrt(len(per_run))) if len(per_run) > 1 else 0.0
    return mean, half


def write_csv(rows, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_start", "mean", "ci_half", "config_id"])
    w.writerows(rows)
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def write_manifest(stats, path) -> None:
    data = stats.to_json() if hasattr(stats, "to_json") else stats
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
