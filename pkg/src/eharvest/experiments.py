"""Config-driven runs behind the CLI: solve, simulate, sweep, compare, verify."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import oracle
from .config import ExperimentConfig
from .model import TwoNodeSpec
from .single import decide, policy_value, read_table_csv, solve, solve_binary
from .simulator import compare_on_common_paths, monte_carlo
from .twonode import TwoNodeGammaTable, decide_decoupled, decide_two_node, solve_two_node

SIM_HEADER = ["mode", "horizon", "battery", "policy", "mean", "stderr", "paths", "seed"]
COMPARE_HEADER = ["horizon", "battery", "mean_o", "mean_s", "diff", "diff_stderr", "paths", "seed",
                  "slots_compared", "first_divergences", "div_00", "div_01", "div_10", "div_11"]


def fmt(x: float) -> str:
    return f"{x:.17g}"


def solve_spec(spec):
    return solve_two_node(spec) if isinstance(spec, TwoNodeSpec) else solve(spec)


def table_value(table) -> float:
    if isinstance(table, TwoNodeGammaTable):
        return float(table.values[(0, *table.spec.initial)])
    return policy_value(table)


def optimal_policy(spec) -> Callable:
    """Decision function of the DP-optimal policy (policy O for two nodes)."""
    table = solve_spec(spec)
    if isinstance(spec, TwoNodeSpec):
        return lambda k, u1, u2, h1, h2: decide_two_node(table, k, u1, u2, h1, h2)
    return lambda k, u, h: decide(table, k, u, h)


def decoupled_policy(spec: TwoNodeSpec) -> Callable:
    """Policy S built from each node's stand-alone threshold table."""
    t1, t2 = solve_binary(spec.marginal(1)), solve_binary(spec.marginal(2))
    return lambda k, u1, u2, h1, h2: decide_decoupled(t1, t2, k, u1, u2, h1, h2)


def simulate_rows(cfg: ExperimentConfig, policies=("optimal",)) -> list[list[str]]:
    rows = []
    label = cfg.name or cfg.mode
    for n in cfg.horizons:
        spec = cfg.spec(n)
        for pol in policies:
            decide_fn = decoupled_policy(spec) if pol == "S" else optimal_policy(spec)
            r = monte_carlo(decide_fn, spec, cfg.paths, cfg.seed)
            rows.append([label, str(n), str(cfg.battery), pol, fmt(r.mean), fmt(r.stderr), str(r.n_paths),
                         str(r.seed)])
    return rows


def sweep_rows(cfgs: list[ExperimentConfig]) -> list[list[str]]:
    rows = []
    for cfg in cfgs:
        pols = ("O", "S") if cfg.mode == "two-node" else ("optimal",)
        rows += simulate_rows(cfg, pols)
    return rows


def compare_rows(cfg: ExperimentConfig) -> list[list[str]]:
    rows = []
    for n in cfg.horizons:
        spec = cfg.spec(n)
        c = compare_on_common_paths(optimal_policy(spec), decoupled_policy(spec), spec, cfg.paths, cfg.seed)
        d = c.divergence.first_divergences
        rows.append([str(n), str(cfg.battery), fmt(c.a.mean), fmt(c.b.mean), fmt(c.diff_mean), fmt(c.diff_stderr),
                     str(cfg.paths), str(cfg.seed), str(c.divergence.slots_compared), str(c.divergence.total),
                     *(str(d.get(key, 0)) for key in ((0, 0), (0, 1), (1, 0), (1, 1)))])
    return rows


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass
class VerifyReport:
    lines: list[str] = field(default_factory=list)
    failed: bool = False
    guard_skipped: bool = False


def _first_mismatch(a: np.ndarray, b: np.ndarray, tol: float) -> Optional[tuple]:
    bad = np.argwhere(np.abs(a - b) > tol)
    if len(bad) == 0:
        return None
    idx = tuple(int(i) for i in bad[0])
    return idx, float(a[idx]), float(b[idx])


def verify_spec(spec, table_values: Optional[np.ndarray] = None, guard: int = oracle.DEFAULT_GUARD,
                tol: float = 1e-12, report: Optional[VerifyReport] = None) -> VerifyReport:
    """Solver (or a supplied table) against value iteration, then policy enumeration."""
    report = report or VerifyReport()
    n = spec.horizon
    if isinstance(spec, TwoNodeSpec):
        vi = oracle.value_iteration_two(spec)
    else:
        vi = oracle.value_iteration_single(spec)
    ours = solve_spec(spec).values if table_values is None else table_values
    source = "solver" if table_values is None else "table"
    if ours.shape != vi.shape:
        report.failed = True
        report.lines.append(f"n={n}: FAIL {source} shape {ours.shape} != expected {vi.shape}")
        return report
    dev = float(np.max(np.abs(ours - vi)))
    miss = _first_mismatch(ours, vi, tol)
    if miss is None:
        report.lines.append(f"n={n}: PASS {source} vs value iteration, max deviation {dev:.3e}")
    else:
        (k, *m), got, want = miss
        report.failed = True
        report.lines.append(f"n={n}: FAIL {source} vs value iteration, max deviation {dev:.3e}; first mismatch at "
                            f"slot {k + 1}, energy {','.join(map(str, m))}: {got!r} != {want!r}")
    try:
        res = oracle.enumerate_markov_policies(spec, guard=guard)
    except oracle.GuardRefusal as exc:
        report.guard_skipped = True
        report.lines.append(f"n={n}: skipped enumeration (guard): {exc.count} policies > {exc.guard}")
        return report
    v0 = float(vi[(0, *spec.initial)]) if isinstance(spec, TwoNodeSpec) else float(vi[0, spec.initial])
    gap = abs(res.value - v0)
    status = "PASS" if gap <= tol else "FAIL"
    report.failed |= gap > tol
    report.lines.append(f"n={n}: {status} enumeration over {res.count} Markov policies, best {res.value!r}, "
                        f"deviation {gap:.3e}")
    return report


def verify_config(cfg: ExperimentConfig, table_path=None, guard: int = oracle.DEFAULT_GUARD) -> VerifyReport:
    report = VerifyReport()
    horizons = cfg.horizons if table_path is None else (cfg.horizon,)
    for n in horizons:
        spec = cfg.spec(n)
        values = None
        if table_path is not None:
            values = read_table_csv(table_path, ndim=2 if isinstance(spec, TwoNodeSpec) else 1)
        verify_spec(spec, values, guard, report=report)
    return report

