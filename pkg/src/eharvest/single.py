"""Threshold tables for a single energy-harvesting node.

``gamma(k, m)`` is the expected optimal payoff from slot ``k`` onward when
``m`` units are carried into slot ``k`` (before that slot's arrival).
Decisions take the post-arrival available energy instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ConsumptionMode, ProblemSpec, check


@dataclass(frozen=True)
class GammaTable:
    spec: ProblemSpec
    values: np.ndarray  # row k-1 holds slot k, k = 1..n+1

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    @property
    def battery(self) -> int:
        return self.values.shape[1] - 1

    def gamma(self, k: int, m: int) -> float:
        if not 1 <= k <= self.horizon + 1:
            raise IndexError(f"slot {k} outside 1..{self.horizon + 1}")
        if not 0 <= m <= self.battery:
            raise IndexError(f"energy {m} outside 0..{self.battery}")
        return float(self.values[k - 1, m])

    def row(self, k: int) -> np.ndarray:
        return self.values[k - 1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_table_csv(fh, self.values)

    @classmethod
    def from_csv(cls, path, spec: ProblemSpec) -> "GammaTable":
        return cls(spec, read_table_csv(path, ndim=1))


class BinaryThresholdTable(GammaTable):
    pass


class DiscreteGammaTable(GammaTable):
    pass


def write_table_csv(fh, values: np.ndarray) -> None:
    """Write a gamma array as ``slot,energy[1,energy2],gamma`` rows, 17 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    if values.ndim == 2:
        writer.writerow(["slot", "energy", "gamma"])
    else:
        writer.writerow(["slot", "energy1", "energy2", "gamma"])
    for idx in np.ndindex(*values.shape):
        writer.writerow([idx[0] + 1, *idx[1:], f"{values[idx]:.17g}"])


def read_table_csv(path, ndim: int) -> np.ndarray:
    expected = ["slot", "energy", "gamma"] if ndim == 1 else ["slot", "energy1", "energy2", "gamma"]
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
        rows = [r for r in reader if r]
    idx = np.array([[int(x) for x in r[:-1]] for r in rows])
    vals = np.array([float(r[-1]) for r in rows])
    shape = tuple(idx.max(axis=0) + np.array([0] + [1] * ndim))
    out = np.full(shape, np.nan)
    out[(idx[:, 0] - 1, *idx[:, 1:].T)] = vals
    if np.isnan(out).any():
        raise ValueError(f"{path}: table has missing entries")
    return out


def _mix_arrivals(w: np.ndarray, arrival_probs, battery: int) -> np.ndarray:
    """gamma[c] = sum_e P(e) * w[min(c + e, B)]."""
    out = np.zeros(battery + 1)
    for e, p in enumerate(arrival_probs):
        if p:
            out += p * w[np.minimum(np.arange(battery + 1) + e, battery)]
    return out


def solve_binary(spec: ProblemSpec) -> BinaryThresholdTable:
    """Backward induction for unit arrivals and unit transmissions."""
    check(spec)
    if spec.mode is not ConsumptionMode.BINARY:
        raise ValueError("solve_binary needs a spec in binary consumption mode")
    n, B = spec.horizon, spec.battery
    h = np.array(spec.channel.gains)
    q = np.array(spec.channel.probs)
    r1 = np.log1p(h)
    gamma = np.zeros((n + 1, B + 1))
    for k in range(n, 0, -1):
        nxt = gamma[k]
        best = np.empty((B + 1, len(h)))
        best[0] = nxt[0]
        best[1:] = np.maximum(r1[None, :] + nxt[:-1, None], nxt[1:, None])
        gamma[k - 1] = _mix_arrivals(best @ q, spec.arrivals.probs, B)
    return BinaryThresholdTable(spec, gamma)


def _alpha(nxt: np.ndarray, gains: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """alpha[u, j] = max over feasible spend f of log(1 + f*h_j) + nxt[u - f]."""
    B = spec.battery
    out = np.full((B + 1, len(gains)), -np.inf)
    for u in range(B + 1):
        f = np.arange(spec.max_spend(u) + 1)
        cand = np.log1p(f[:, None] * gains[None, :]) + nxt[u - f][:, None]
        out[u] = cand.max(axis=0)
    return out


def solve_discrete(spec: ProblemSpec) -> DiscreteGammaTable:
    """Backward induction for multi-unit arrivals and transmissions.

    The spend set at each slot is ``0..U`` in discrete mode and ``{0, 1}``
    (capped by ``U``) in binary mode, so binary specs are accepted too.
    """
    check(spec)
    n, B = spec.horizon, spec.battery
    gains = np.array(spec.channel.gains)
    q = np.array(spec.channel.probs)
    gamma = np.zeros((n + 1, B + 1))
    for k in range(n, 0, -1):
        alpha = _alpha(gamma[k], gains, spec)
        gamma[k - 1] = _mix_arrivals(alpha @ q, spec.arrivals.probs, B)
    return DiscreteGammaTable(spec, gamma)


def solve(spec: ProblemSpec) -> GammaTable:
    if spec.mode is ConsumptionMode.BINARY:
        return solve_binary(spec)
    return solve_discrete(spec)


def _check_slot_energy(table: GammaTable, k: int, m: int) -> None:
    if not 1 <= k <= table.horizon:
        raise ValueError(f"slot {k} outside 1..{table.horizon}")
    if not 0 <= m <= table.battery:
        raise ValueError(f"energy {m} outside 0..{table.battery}")


def decide_binary(table: GammaTable, k: int, m: int, h: float) -> int:
    """Transmit one unit iff the immediate payoff beats the value of keeping it."""
    _check_slot_energy(table, k, m)
    if m == 0:
        return 0
    nxt = table.values[k]
    return int(math.log1p(h) + nxt[m - 1] > nxt[m])


def channel_cutoff(table: GammaTable, k: int, m: int) -> float:
    """Gain above which :func:`decide_binary` transmits at ``(k, m)``."""
    _check_slot_energy(table, k, m)
    if m == 0:
        raise ValueError("no cutoff with an empty battery")
    nxt = table.values[k]
    return math.expm1(nxt[m] - nxt[m - 1])


def decide_discrete(table: GammaTable, k: int, m: int, h: float) -> int:
    """Units to spend: argmax of log(1 + j*h) + gamma(k+1, m-j), smallest j on ties."""
    _check_slot_energy(table, k, m)
    if h < 0:
        raise ValueError(f"gain must be >= 0, got {h}")
    nxt = table.values[k]
    best_j, best = 0, nxt[m]
    for j in range(1, table.spec.max_spend(m) + 1):
        v = math.log1p(j * h) + nxt[m - j]
        if v > best:
            best_j, best = j, v
    return best_j


def decide(table: GammaTable, k: int, m: int, h: float) -> int:
    if table.spec.mode is ConsumptionMode.BINARY:
        return decide_binary(table, k, m, h)
    return decide_discrete(table, k, m, h)


def policy_value(table: GammaTable) -> float:
    """Expected total payoff of the optimal policy from the spec's initial battery."""
    return float(table.values[0, table.spec.initial])
