"""Experiment configs: flat ``dotted.key = value`` text (a TOML subset).

Example::

    mode = "single-binary"
    horizon = 2
    battery = 2
    arrival.p = 0.5
    channel.support = [1.718281828459045]
    channel.probs = [1.0]
    paths = 100000
    seed = 1

Two-node configs use ``node1.arrival.p`` / ``node1.channel.*`` and the same
for ``node2``; a missing node section falls back to the top-level
``arrival`` / ``channel`` keys. ``horizons = [..]`` replaces ``horizon`` for
sweeps. Continuous channels are given as ``channel.family`` (``exponential``
with ``rate``, or ``uniform`` with ``low``/``high``) plus ``channel.levels``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import tomli

from .model import (ArrivalDistribution, ChannelDistribution, ConsumptionMode, ProblemSpec, TwoNodeSpec,
                    exponential_cdf, quantize, uniform_cdf, validate)

MODES = ("single-binary", "single-discrete", "two-node")
FAMILIES = ("exponential", "uniform")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ArrivalConfig:
    p: Optional[float] = None
    probs: Optional[tuple[float, ...]] = None
    uniform: bool = False


@dataclass(frozen=True)
class ChannelConfig:
    support: Optional[tuple[float, ...]] = None
    probs: Optional[tuple[float, ...]] = None
    family: Optional[str] = None
    rate: float = 1.0
    low: float = 0.0
    high: float = 1.0
    levels: int = 8

    def distribution(self) -> ChannelDistribution:
        if self.family is None:
            return ChannelDistribution(self.support or (), self.probs or ())
        if self.family == "exponential":
            return quantize(exponential_cdf(self.rate), self.levels)
        return quantize(uniform_cdf(self.low, self.high), self.levels)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    horizons: tuple[int, ...]
    battery: int
    arrivals: tuple[ArrivalConfig, ...]  # one per node
    channels: tuple[ChannelConfig, ...]
    sweep: bool = False
    initial: tuple[int, ...] = (0,)
    paths: int = 10000
    seed: int = 1
    out: Optional[str] = None
    name: Optional[str] = None

    @property
    def horizon(self) -> int:
        return self.horizons[-1]

    def spec(self, horizon: Optional[int] = None) -> Union[ProblemSpec, TwoNodeSpec]:
        n = self.horizon if horizon is None else horizon
        if self.mode == "two-node":
            a1, a2 = self.arrivals
            return TwoNodeSpec(n, self.battery, a1.p, a2.p, self.channels[0].distribution(),
                               self.channels[1].distribution(), tuple(self.initial))
        mode = ConsumptionMode.BINARY if self.mode == "single-binary" else ConsumptionMode.DISCRETE
        return ProblemSpec(n, self.battery, _arrival_distribution(self.arrivals[0], self.battery),
                           self.channels[0].distribution(), mode, self.initial[0])

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _arrival_distribution(a: ArrivalConfig, battery: int) -> ArrivalDistribution:
    if a.uniform:
        return ArrivalDistribution.uniform(battery)
    if a.probs is not None:
        return ArrivalDistribution(a.probs)
    return ArrivalDistribution.bernoulli(a.p, battery)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


_NUM = (int, float)


def _num_list(flat, key, problems):
    v = flat.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(x, _NUM) and not isinstance(x, bool) for x in v):
        problems.append(f"{key}: expected a list of numbers")
        return None
    return tuple(float(x) for x in v)


def _number(flat, key, problems, default=None, kind=float):
    v = flat.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, _NUM) or (kind is int and not isinstance(v, int)):
        problems.append(f"{key}: expected {'an integer' if kind is int else 'a number'}, got {v!r}")
        return default
    return kind(v)


def _arrival(flat, prefix, problems) -> ArrivalConfig:
    p = _number(flat, f"{prefix}arrival.p", problems)
    probs = _num_list(flat, f"{prefix}arrival.probs", problems)
    uniform = flat.get(f"{prefix}arrival.uniform", False)
    if not isinstance(uniform, bool):
        problems.append(f"{prefix}arrival.uniform: expected true/false")
        uniform = False
    given = sum(x is not None and x is not False for x in (p, probs, uniform or None))
    if given != 1:
        problems.append(f"{prefix}arrival: give exactly one of p, probs, uniform")
    return ArrivalConfig(p, probs, uniform)


def _channel(flat, prefix, problems) -> ChannelConfig:
    base = f"{prefix}channel"
    family = flat.get(f"{base}.family")
    if family is not None:
        if family not in FAMILIES:
            problems.append(f"{base}.family: expected one of {', '.join(FAMILIES)}, got {family!r}")
        levels = _number(flat, f"{base}.levels", problems, 8, int)
        if levels is not None and levels < 1:
            problems.append(f"{base}.levels: must be >= 1")
        cfg = ChannelConfig(family=family, rate=_number(flat, f"{base}.rate", problems, 1.0),
                            low=_number(flat, f"{base}.low", problems, 0.0),
                            high=_number(flat, f"{base}.high", problems, 1.0), levels=levels)
        if family == "exponential" and not cfg.rate > 0:
            problems.append(f"{base}.rate: must be > 0")
        if family == "uniform" and not (0 <= cfg.low < cfg.high):
            problems.append(f"{base}: uniform family needs 0 <= low < high")
        return cfg
    support = _num_list(flat, f"{base}.support", problems)
    probs = _num_list(flat, f"{base}.probs", problems)
    if support is None:
        problems.append(f"{base}.support: missing (or give {base}.family)")
    if probs is None:
        probs = (1.0,) if support is not None and len(support) == 1 else None
        if probs is None:
            problems.append(f"{base}.probs: missing")
    return ChannelConfig(support=support, probs=probs)


_KNOWN_TOP = {"mode", "horizon", "horizons", "battery", "initial", "paths", "seed", "out", "name"}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem by field path."""
    try:
        flat = _flatten(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    problems: list[str] = []
    mode = flat.get("mode")
    if mode not in MODES:
        problems.append(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
    nodes = 2 if mode == "two-node" else 1

    for key in flat:
        head = key.split(".")[0]
        if head in _KNOWN_TOP or head in ("arrival", "channel") or (nodes == 2 and head in ("node1", "node2")):
            continue
        problems.append(f"{key}: unknown key")

    sweep = "horizons" in flat
    if sweep and "horizon" in flat:
        problems.append("horizon: give either horizon or horizons, not both")
    if sweep:
        hs = flat["horizons"]
        if not isinstance(hs, list) or not hs or not all(isinstance(h, int) and not isinstance(h, bool) for h in hs):
            problems.append("horizons: expected a non-empty list of integers")
            hs = [1]
        elif any(b <= a for a, b in zip(hs, hs[1:])):
            problems.append("horizons: sweep list must be strictly increasing")
        horizons = tuple(hs)
    else:
        h = _number(flat, "horizon", problems, None, int)
        if h is None:
            problems.append("horizon: missing")
            h = 1
        horizons = (h,)
    battery = _number(flat, "battery", problems, None, int)
    if battery is None:
        problems.append("battery: missing")
        battery = 1
    elif battery < 1:
        problems.append(f"battery: must be a positive integer, got {battery}")
        battery = 1
    if any(h < 1 for h in horizons):
        problems.append("horizon: horizons must be positive integers")

    def node_prefix(i, section):
        p = f"node{i}."
        return p if any(k.startswith(p + section + ".") for k in flat) else ""

    if nodes == 2:
        arrivals = tuple(_arrival(flat, node_prefix(i, "arrival"), problems) for i in (1, 2))
        channels = tuple(_channel(flat, node_prefix(i, "channel"), problems) for i in (1, 2))
        for i, a in enumerate(arrivals, 1):
            if a.p is None:
                problems.append(f"node{i}.arrival.p: two-node mode needs Bernoulli rates")
    else:
        arrivals = (_arrival(flat, "", problems),)
        channels = (_channel(flat, "", problems),)

    init = flat.get("initial", [0] * nodes if nodes == 2 else 0)
    init = tuple(init) if isinstance(init, list) else (init,)
    if len(init) != nodes or not all(isinstance(c, int) and not isinstance(c, bool) for c in init):
        problems.append(f"initial: expected {nodes} integer level(s)")
        init = (0,) * nodes
    paths = _number(flat, "paths", problems, 10000, int)
    if paths is not None and paths < 2:
        problems.append("paths: must be >= 2")
    seed = _number(flat, "seed", problems, 1, int)
    if seed is not None and seed < 0:
        problems.append("seed: must be >= 0")
    out = flat.get("out")
    if out is not None and not isinstance(out, str):
        problems.append("out: expected a string path")
    name = flat.get("name")

    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(mode, horizons, battery, arrivals, channels, sweep, init, paths, seed, out, name)
    check_config(cfg)
    return cfg


def check_config(cfg: ExperimentConfig) -> None:
    """Resolve to a problem spec and report its violations as config errors."""
    try:
        violations = [] if not cfg.horizons else validate(cfg.spec(cfg.horizons[0]))
    except (TypeError, ValueError) as exc:
        violations = [str(exc)]
    if violations:
        raise ConfigError(violations)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), str(path))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    return str(v)


def to_text(cfg: ExperimentConfig) -> str:
    lines = [f"mode = {_fmt(cfg.mode)}"]
    if cfg.name is not None:
        lines.append(f"name = {_fmt(cfg.name)}")
    if cfg.sweep:
        lines.append(f"horizons = {_fmt(list(cfg.horizons))}")
    else:
        lines.append(f"horizon = {cfg.horizon}")
    lines.append(f"battery = {cfg.battery}")
    lines.append(f"initial = {_fmt(list(cfg.initial)) if cfg.mode == 'two-node' else cfg.initial[0]}")
    prefixes = ("node1.", "node2.") if cfg.mode == "two-node" else ("",)
    for pre, a, c in zip(prefixes, cfg.arrivals, cfg.channels):
        if a.uniform:
            lines.append(f"{pre}arrival.uniform = true")
        elif a.probs is not None:
            lines.append(f"{pre}arrival.probs = {_fmt(a.probs)}")
        else:
            lines.append(f"{pre}arrival.p = {_fmt(float(a.p))}")
        if c.family is None:
            lines.append(f"{pre}channel.support = {_fmt(c.support)}")
            lines.append(f"{pre}channel.probs = {_fmt(c.probs)}")
        else:
            lines.append(f"{pre}channel.family = {_fmt(c.family)}")
            if c.family == "exponential":
                lines.append(f"{pre}channel.rate = {_fmt(float(c.rate))}")
            else:
                lines.append(f"{pre}channel.low = {_fmt(float(c.low))}")
                lines.append(f"{pre}channel.high = {_fmt(float(c.high))}")
            lines.append(f"{pre}channel.levels = {c.levels}")
    lines.append(f"paths = {cfg.paths}")
    lines.append(f"seed = {cfg.seed}")
    if cfg.out is not None:
        lines.append(f"out = {_fmt(cfg.out)}")
    return "\n".join(lines) + "\n"


# --- presets ---------------------------------------------------------------------
# The channel law behind the published figures is not stated; exponential(1)
# power gain (Rayleigh fading) quantized to 8 cells stands in for it.

PRESET_CHANNEL = ChannelConfig(family="exponential", rate=1.0, levels=8)
PRESET_HORIZONS = tuple(range(1, 21))


def preset(name: str, paths: int = 2000, seed: int = 1) -> list[ExperimentConfig]:
    if name == "fig1":
        common = dict(horizons=PRESET_HORIZONS, battery=10, channels=(PRESET_CHANNEL,), sweep=True,
                      paths=paths, seed=seed)
        return [
            ExperimentConfig("single-discrete", arrivals=(ArrivalConfig(uniform=True),), name="uniform", **common),
            ExperimentConfig("single-binary", arrivals=(ArrivalConfig(p=0.5),), name="bernoulli", **common),
        ]
    if name == "fig2":
        return [ExperimentConfig("two-node", PRESET_HORIZONS, 10, (ArrivalConfig(p=0.5), ArrivalConfig(p=0.5)),
                                 (PRESET_CHANNEL, PRESET_CHANNEL), sweep=True, initial=(0, 0), paths=paths,
                                 seed=seed, name="two-node")]
    raise ValueError(f"unknown preset {name!r}")
