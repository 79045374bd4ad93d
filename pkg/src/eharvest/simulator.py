"""Seeded sample paths, policy execution and Monte Carlo estimates.

Path ``i`` of a run with master seed ``s`` is drawn from
``numpy.random.Generator(PCG64(SeedSequence(s, spawn_key=(i,))))``, so every
path can be regenerated on its own and results do not depend on the order
in which paths are evaluated. Within a path, arrivals for all slots are
drawn first, then channel indices (node 1 before node 2 in both cases).
"""
from __future__ import annotations

import csv
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .model import ProblemSpec, SamplePath, TwoNodeSpec, check
from .single import decide_binary, solve_binary
from .twonode import Action

TRAJECTORY_HEADER = ["path", "slot", "arrival", "gain", "available", "transmitted", "payoff"]


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(path_index,))
    return np.random.Generator(np.random.PCG64(seq))


def sample_path(spec: Union[ProblemSpec, TwoNodeSpec], master_seed: int, path_index: int) -> SamplePath:
    rng = path_rng(master_seed, path_index)
    n = spec.horizon
    if isinstance(spec, TwoNodeSpec):
        arrivals = np.stack([rng.random(n) < spec.p1, rng.random(n) < spec.p2], axis=1).astype(int)
        idx = np.stack([rng.choice(spec.channel1.size, size=n, p=spec.channel1.probs),
                        rng.choice(spec.channel2.size, size=n, p=spec.channel2.probs)], axis=1)
        gains = np.stack([np.asarray(spec.channel1.gains)[idx[:, 0]],
                          np.asarray(spec.channel2.gains)[idx[:, 1]]], axis=1)
    else:
        arrivals = rng.choice(len(spec.arrivals.probs), size=n, p=spec.arrivals.probs)
        idx = rng.choice(spec.channel.size, size=n, p=spec.channel.probs)
        gains = np.asarray(spec.channel.gains)[idx]
    return SamplePath(arrivals, gains, idx)


class PolicyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Per-slot record of one policy run.

    For two nodes ``available`` and ``transmitted`` have one column per node.
    """

    path: SamplePath
    available: np.ndarray
    transmitted: np.ndarray
    increments: np.ndarray
    total: float


def run_policy(decide: Callable, path: SamplePath, spec: Union[ProblemSpec, TwoNodeSpec]) -> Trajectory:
    """Run ``decide`` along ``path`` under the capped battery recursion.

    Single node: ``decide(k, u, h) -> units``; two nodes:
    ``decide(k, u1, u2, h1, h2) -> Action``. The slot-k arrival is banked
    before the slot-k decision.
    """
    B, n = spec.battery, spec.horizon
    if isinstance(spec, TwoNodeSpec):
        carry = list(spec.initial)
        available = np.zeros((n, 2), dtype=int)
        sent = np.zeros((n, 2), dtype=int)
        inc = np.zeros(n)
        for k in range(1, n + 1):
            u = [min(carry[i] + int(path.arrivals[k - 1, i]), B) for i in range(2)]
            h1, h2 = (float(x) for x in path.gains[k - 1])
            a = Action(decide(k, u[0], u[1], h1, h2))
            available[k - 1] = u
            if a is not Action.IDLE:
                node = int(a) - 1
                if u[node] < 1:
                    raise PolicyError(f"slot {k}: policy chose {a.name} with node {node + 1} empty")
                sent[k - 1, node] = 1
                inc[k - 1] = math.log1p((h1, h2)[node])
            carry = [u[i] - sent[k - 1, i] for i in range(2)]
    else:
        carry = spec.initial
        available = np.zeros(n, dtype=int)
        sent = np.zeros(n, dtype=int)
        inc = np.zeros(n)
        for k in range(1, n + 1):
            u = min(carry + int(path.arrivals[k - 1]), B)
            h = float(path.gains[k - 1])
            f = int(decide(k, u, h))
            if not 0 <= f <= spec.max_spend(u):
                raise PolicyError(f"slot {k}: policy spent {f} with {u} available ({spec.mode.value} mode)")
            available[k - 1], sent[k - 1] = u, f
            inc[k - 1] = math.log1p(f * h)
            carry = u - f
    return Trajectory(path, available, sent, inc, math.fsum(inc))


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    n_paths: int
    seed: int


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    # exactly-rounded sums: identical samples give stderr 0, not 1e-16
    vals = [float(v) for v in values]
    return math.fsum(vals) / len(vals), statistics.stdev(vals) / math.sqrt(len(vals))


def _summarize(payoffs: np.ndarray, seed: int) -> MonteCarloResult:
    mean, stderr = _mean_stderr(payoffs)
    return MonteCarloResult(mean, stderr, len(payoffs), seed)


def monte_carlo(decide: Callable, spec: Union[ProblemSpec, TwoNodeSpec], n_paths: int,
                master_seed: int) -> MonteCarloResult:
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    check(spec)
    payoffs = np.array([run_policy(decide, sample_path(spec, master_seed, i), spec).total
                        for i in range(n_paths)])
    return _summarize(payoffs, master_seed)


@dataclass(frozen=True)
class DivergenceReport:
    """First slots where two policies part ways, keyed by S's decoupled requests (F1, F2)."""

    slots_compared: int
    first_divergences: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.first_divergences.values())

    @property
    def violations(self) -> int:
        """First divergences at slots where some node requested to transmit."""
        return sum(c for key, c in self.first_divergences.items() if key != (0, 0))


@dataclass(frozen=True)
class Comparison:
    a: MonteCarloResult
    b: MonteCarloResult
    diff_mean: float
    diff_stderr: float
    divergence: DivergenceReport


def decoupled_classifier(spec: TwoNodeSpec) -> Callable:
    """(k, u1, u2, h1, h2) -> (F1, F2), each node's stand-alone threshold decision."""
    t1, t2 = solve_binary(spec.marginal(1)), solve_binary(spec.marginal(2))

    def classify(k, u1, u2, h1, h2):
        return decide_binary(t1, k, u1, h1), decide_binary(t2, k, u2, h2)
    return classify


def compare_on_common_paths(decide_a: Callable, decide_b: Callable, spec: TwoNodeSpec, n_paths: int,
                            master_seed: int, classify: Optional[Callable] = None) -> Comparison:
    """Run two two-node policies on the same paths.

    While the action histories of the two policies coincide their batteries
    coincide too; the first slot at which their actions differ is recorded
    and labelled with ``classify`` (by default policy S's decoupled requests).
    """
    if n_paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    check(spec)
    if classify is None:
        classify = decoupled_classifier(spec)
    pa, pb = np.zeros(n_paths), np.zeros(n_paths)
    compared = 0
    firsts: Counter = Counter()
    for i in range(n_paths):
        path = sample_path(spec, master_seed, i)
        ta = run_policy(decide_a, path, spec)
        tb = run_policy(decide_b, path, spec)
        pa[i], pb[i] = ta.total, tb.total
        for k in range(spec.horizon):
            compared += 1
            if not np.array_equal(ta.transmitted[k], tb.transmitted[k]):
                u1, u2 = (int(x) for x in ta.available[k])
                h1, h2 = (float(x) for x in path.gains[k])
                firsts[tuple(int(x) for x in classify(k + 1, u1, u2, h1, h2))] += 1
                break
    diff_mean, diff_stderr = _mean_stderr(pa - pb)
    return Comparison(_summarize(pa, master_seed), _summarize(pb, master_seed), diff_mean, diff_stderr,
                      DivergenceReport(compared, firsts))


def write_trajectories(fh, trajectories) -> None:
    """CSV dump; two-node fields hold ``node1;node2``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)

    def fmt(x):
        if np.ndim(x):
            return ";".join(fmt(v) for v in x)
        return f"{x:.17g}" if isinstance(x, (float, np.floating)) else str(int(x))

    for p, t in enumerate(trajectories):
        for k in range(len(t.increments)):
            writer.writerow([p, k + 1, fmt(t.path.arrivals[k]), fmt(t.path.gains[k]), fmt(t.available[k]),
                             fmt(t.transmitted[k]), fmt(float(t.increments[k]))])
