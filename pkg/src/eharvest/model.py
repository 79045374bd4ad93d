"""Problem definitions shared by the solvers, the oracles and the simulator.

Energy is counted in integer units ``0..B``; channel gains come from a
finite-support distribution so every expectation is an exact finite sum.
Payoffs are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

PROB_TOL = 1e-12


class ConsumptionMode(Enum):
    BINARY = "binary"
    DISCRETE = "discrete"


class SpecError(ValueError):
    """Raised when a problem definition violates its invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def reward(h: float, f: int) -> float:
    """Payoff log(1 + f*h) of spending ``f`` units on a channel of gain ``h``."""
    if h < 0 or f < 0:
        raise ValueError(f"reward needs h >= 0 and f >= 0, got h={h}, f={f}")
    return math.log1p(f * h)


@dataclass(frozen=True)
class ChannelDistribution:
    """Finite-support distribution of the channel gain."""

    gains: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        object.__setattr__(self, "probs", tuple(float(q) for q in self.probs))

    @classmethod
    def point(cls, h: float) -> "ChannelDistribution":
        return cls((h,), (1.0,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "ChannelDistribution":
        return cls(tuple(h for h, _ in pairs), tuple(q for _, q in pairs))

    @property
    def support(self) -> list[tuple[float, float]]:
        return list(zip(self.gains, self.probs))

    @property
    def size(self) -> int:
        return len(self.gains)

    def mean(self) -> float:
        return float(np.dot(self.gains, self.probs))

    def violations(self, prefix: str = "channel") -> list[str]:
        out = []
        if len(self.gains) == 0:
            out.append(f"{prefix}: support is empty")
            return out
        if len(self.gains) != len(self.probs):
            out.append(f"{prefix}: {len(self.gains)} gains but {len(self.probs)} probabilities")
            return out
        if not all(math.isfinite(g) for g in self.gains):
            out.append(f"{prefix}: gains must be finite")
        if any(g < 0 for g in self.gains):
            out.append(f"{prefix}: gains must be >= 0")
        if any(not (q > 0) or q > 1 for q in self.probs):
            out.append(f"{prefix}: probabilities must lie in (0, 1]")
        if any(b <= a for a, b in zip(self.gains, self.gains[1:])):
            out.append(f"{prefix}: gains must be strictly increasing")
        if abs(math.fsum(self.probs) - 1.0) > PROB_TOL:
            out.append(f"{prefix}: channel probabilities sum ≠ 1 (got {math.fsum(self.probs)!r})")
        return out


def expected_reward(dist: ChannelDistribution, f: int) -> float:
    """Mean payoff of spending ``f`` units, averaged over the channel."""
    if f < 0:
        raise ValueError(f"f must be >= 0, got {f}")
    return math.fsum(q * math.log1p(f * h) for h, q in zip(dist.gains, dist.probs))


@dataclass(frozen=True)
class ArrivalDistribution:
    """Per-slot harvested energy: ``probs[i]`` is P(i units arrive)."""

    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def bernoulli(cls, p: float, battery: int) -> "ArrivalDistribution":
        probs = [0.0] * (battery + 1)
        probs[0] = 1.0 - p
        probs[1] = p
        return cls(tuple(probs))

    @classmethod
    def uniform(cls, battery: int) -> "ArrivalDistribution":
        return cls((1.0 / (battery + 1),) * (battery + 1))

    @classmethod
    def point(cls, units: int, battery: int) -> "ArrivalDistribution":
        probs = [0.0] * (battery + 1)
        probs[units] = 1.0
        return cls(tuple(probs))

    @property
    def max_units(self) -> int:
        return len(self.probs) - 1

    def is_binary(self) -> bool:
        return all(p == 0 for p in self.probs[2:])

    def mean(self) -> float:
        return math.fsum(i * p for i, p in enumerate(self.probs))

    def violations(self, battery: int, prefix: str = "arrival") -> list[str]:
        out = []
        if len(self.probs) != battery + 1:
            out.append(f"{prefix}: expected {battery + 1} probabilities (0..B), got {len(self.probs)}")
        if any(not math.isfinite(p) or p < 0 or p > 1 for p in self.probs):
            out.append(f"{prefix}: probabilities must lie in [0, 1]")
        if abs(math.fsum(self.probs) - 1.0) > PROB_TOL:
            out.append(f"{prefix}: arrival probabilities sum ≠ 1 (got {math.fsum(self.probs)!r})")
        return out


@dataclass(frozen=True)
class ProblemSpec:
    horizon: int
    battery: int
    arrivals: ArrivalDistribution
    channel: ChannelDistribution
    mode: ConsumptionMode = ConsumptionMode.DISCRETE
    initial: int = 0

    @classmethod
    def bernoulli(cls, horizon: int, battery: int, p: float, channel: ChannelDistribution,
                  mode: ConsumptionMode = ConsumptionMode.BINARY, initial: int = 0) -> "ProblemSpec":
        return cls(horizon, battery, ArrivalDistribution.bernoulli(p, battery), channel, mode, initial)

    def max_spend(self, available: int) -> int:
        """Largest feasible transmission with ``available`` units."""
        return min(available, 1) if self.mode is ConsumptionMode.BINARY else available


@dataclass(frozen=True)
class TwoNodeSpec:
    """Two Bernoulli-harvesting nodes sharing the medium (one transmits per slot)."""

    horizon: int
    battery: int
    p1: float
    p2: float
    channel1: ChannelDistribution
    channel2: ChannelDistribution
    initial: tuple[int, int] = (0, 0)

    def marginal(self, node: int) -> ProblemSpec:
        """Single-node binary problem seen by ``node`` (1 or 2) when it ignores the other."""
        if node not in (1, 2):
            raise ValueError(f"node must be 1 or 2, got {node}")
        p = self.p1 if node == 1 else self.p2
        channel = self.channel1 if node == 1 else self.channel2
        return ProblemSpec.bernoulli(self.horizon, self.battery, p, channel,
                                     ConsumptionMode.BINARY, self.initial[node - 1])

    def arrival(self, node: int) -> ArrivalDistribution:
        return ArrivalDistribution.bernoulli(self.p1 if node == 1 else self.p2, self.battery)

    def channel(self, node: int) -> ChannelDistribution:
        return self.channel1 if node == 1 else self.channel2


Spec = Union[ProblemSpec, TwoNodeSpec]


def _common_violations(horizon, battery) -> list[str]:
    out = []
    if not isinstance(horizon, (int, np.integer)) or isinstance(horizon, bool) or horizon < 1:
        out.append(f"horizon: must be a positive integer, got {horizon!r}")
    if not isinstance(battery, (int, np.integer)) or isinstance(battery, bool) or battery < 1:
        out.append(f"battery: must be a positive integer, got {battery!r}")
    return out


def validate(spec: Spec) -> list[str]:
    """Return every invariant violation of ``spec``; an empty list means valid."""
    out = _common_violations(spec.horizon, spec.battery)
    battery_ok = not any(v.startswith("battery") for v in out)
    if isinstance(spec, ProblemSpec):
        if battery_ok:
            out += spec.arrivals.violations(spec.battery)
        out += spec.channel.violations()
        if not isinstance(spec.mode, ConsumptionMode):
            out.append(f"mode: unknown consumption mode {spec.mode!r}")
        elif spec.mode is ConsumptionMode.BINARY and not spec.arrivals.is_binary():
            out.append("arrival: binary mode requires {0,1} arrivals")
        if battery_ok and not (0 <= spec.initial <= spec.battery):
            out.append(f"initial: must lie in 0..{spec.battery}, got {spec.initial}")
    elif isinstance(spec, TwoNodeSpec):
        for i, p in ((1, spec.p1), (2, spec.p2)):
            if not (isinstance(p, (int, float)) and 0 <= p <= 1):
                out.append(f"node{i}.arrival: Bernoulli rate must lie in [0, 1], got {p!r}")
        out += spec.channel1.violations("node1.channel")
        out += spec.channel2.violations("node2.channel")
        if len(spec.initial) != 2 or (battery_ok and not all(0 <= c <= spec.battery for c in spec.initial)):
            out.append(f"initial: need two levels in 0..{spec.battery}, got {spec.initial!r}")
    else:
        out.append(f"unsupported spec type {type(spec).__name__}")
    return out


def check(spec: Spec) -> Spec:
    """Raise :class:`SpecError` listing all violations, else return ``spec``."""
    problems = validate(spec)
    if problems:
        raise SpecError(problems)
    return spec


@dataclass(frozen=True)
class SamplePath:
    """One realization of arrivals and channel gains over the horizon.

    Single node: arrays of shape ``(n,)``. Two nodes: shape ``(n, 2)``.
    ``gain_index`` holds the support indices the gains were drawn at.
    """

    arrivals: np.ndarray
    gains: np.ndarray
    gain_index: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("arrivals", "gains", "gain_index"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return len(self.arrivals)


# --- continuous channel models -------------------------------------------------

def exponential_cdf(rate: float = 1.0) -> Callable[[float], float]:
    return lambda x: 0.0 if x <= 0 else -math.expm1(-rate * x)


def uniform_cdf(low: float, high: float) -> Callable[[float], float]:
    def cdf(x):
        if x <= low:
            return 0.0
        if x >= high:
            return 1.0
        return (x - low) / (high - low)
    return cdf


def _quantile_from_cdf(cdf: Callable[[float], float]) -> Callable[[float], float]:
    def quantile(u: float) -> float:
        # smallest x >= 0 with cdf(x) >= u
        if cdf(0.0) >= u:
            return 0.0
        lo, hi = 0.0, 1.0
        while cdf(hi) < u:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                raise ValueError("cdf does not reach the requested level")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        return hi
    return quantile


def _quantile_from_table(table: Sequence[tuple[float, float]]) -> Callable[[float], float]:
    us = np.array([u for u, _ in table], dtype=float)
    xs = np.array([x for _, x in table], dtype=float)
    if us[0] > 0 or us[-1] < 1:
        raise ValueError("tabulated quantiles must cover probability levels 0 and 1")
    if np.any(np.diff(us) <= 0):
        raise ValueError("tabulated quantile levels must be strictly increasing")
    if np.any(np.diff(xs) < 0) or xs[0] < 0:
        raise ValueError("tabulated quantiles are not monotone (non-monotone cdf)")
    return lambda u: float(np.interp(u, us, xs))


def _check_monotone(cdf: Callable[[float], float]) -> None:
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 2001)])
    vals = np.array([cdf(float(x)) for x in grid])
    if np.any(vals < -PROB_TOL) or np.any(vals > 1 + PROB_TOL):
        raise ValueError("cdf values must lie in [0, 1]")
    if np.any(np.diff(vals) < -PROB_TOL):
        raise ValueError("cdf is not monotone")


def quantize(cdf: Union[Callable[[float], float], Sequence[tuple[float, float]]],
             levels: int) -> ChannelDistribution:
    """Collapse a continuous gain law on [0, inf) to ``levels`` equal-mass cells.

    ``cdf`` is either a callable distribution function or a table of
    ``(probability level, quantile)`` pairs that is linearly interpolated.
    Each cell is represented by its conditional mean with mass 1/levels;
    cells whose means coincide are merged.
    """
    if not isinstance(levels, (int, np.integer)) or levels < 1:
        raise ValueError(f"levels must be a positive integer, got {levels!r}")
    if callable(cdf):
        _check_monotone(cdf)
        quantile = _quantile_from_cdf(cdf)
    else:
        quantile = _quantile_from_table(cdf)

    means = []
    for i in range(levels):
        a, b = i / levels, (i + 1) / levels
        val, _ = integrate.quad(quantile, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
        means.append(val * levels)

    gains: list[float] = []
    probs: list[float] = []
    for m in means:
        if gains and abs(m - gains[-1]) <= 1e-12 * max(1.0, abs(m)):
            w = probs[-1]
            gains[-1] = (gains[-1] * w + m / levels) / (w + 1 / levels)
            probs[-1] = w + 1 / levels
        else:
            gains.append(m)
            probs.append(1 / levels)
    if len(probs) == 1:
        probs = [1.0]
    return ChannelDistribution(tuple(gains), tuple(probs))
