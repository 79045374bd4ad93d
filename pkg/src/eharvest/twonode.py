"""Two nodes sharing one channel slot: joint DP and the decoupled heuristic."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .model import TwoNodeSpec, check
from .single import GammaTable, decide_binary, read_table_csv, write_table_csv


class Action(IntEnum):
    IDLE = 0
    TX1 = 1
    TX2 = 2


@dataclass(frozen=True)
class TwoNodeGammaTable:
    spec: TwoNodeSpec
    values: np.ndarray  # values[k-1, m1, m2], k = 1..n+1

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

    def gamma(self, k: int, m1: int, m2: int) -> float:
        if not 1 <= k <= self.horizon + 1:
            raise IndexError(f"slot {k} outside 1..{self.horizon + 1}")
        if not (0 <= m1 <= self.battery and 0 <= m2 <= self.battery):
            raise IndexError(f"energies ({m1}, {m2}) outside 0..{self.battery}")
        return float(self.values[k - 1, m1, m2])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_table_csv(fh, self.values)

    @classmethod
    def from_csv(cls, path, spec: TwoNodeSpec) -> "TwoNodeGammaTable":
        return cls(spec, read_table_csv(path, ndim=2))


def solve_two_node(spec: TwoNodeSpec) -> TwoNodeGammaTable:
    check(spec)
    n, B = spec.horizon, spec.battery
    r1 = np.log1p(np.array(spec.channel1.gains))
    r2 = np.log1p(np.array(spec.channel2.gains))
    q = np.outer(spec.channel1.probs, spec.channel2.probs)
    gamma = np.zeros((n + 1, B + 1, B + 1))
    levels = np.arange(B + 1)
    for k in range(n, 0, -1):
        nxt = gamma[k]
        # best[u1, u2, j1, j2]
        best = np.broadcast_to(nxt[:, :, None, None], (B + 1, B + 1, len(r1), len(r2))).copy()
        best[1:] = np.maximum(best[1:], r1[None, None, :, None] + nxt[:-1, :, None, None])
        best[:, 1:] = np.maximum(best[:, 1:], r2[None, None, None, :] + nxt[:, :-1, None, None])
        w = np.einsum("abij,ij->ab", best, q)
        mixed = np.zeros((B + 1, B + 1))
        for e1, pe1 in ((0, 1 - spec.p1), (1, spec.p1)):
            for e2, pe2 in ((0, 1 - spec.p2), (1, spec.p2)):
                if pe1 and pe2:
                    u1 = np.minimum(levels + e1, B)
                    u2 = np.minimum(levels + e2, B)
                    mixed += pe1 * pe2 * w[np.ix_(u1, u2)]
        gamma[k - 1] = mixed
    return TwoNodeGammaTable(spec, gamma)


def _check_state(horizon: int, battery: int, k: int, energies: Sequence[int]) -> None:
    if not 1 <= k <= horizon:
        raise ValueError(f"slot {k} outside 1..{horizon}")
    for m in energies:
        if not 0 <= m <= battery:
            raise ValueError(f"energy {m} outside 0..{battery}")


def decide_two_node(table: TwoNodeGammaTable, k: int, m1: int, m2: int,
                    h1: float, h2: float) -> Action:
    """Optimal joint action; idle wins ties, then the larger gain, then node 1."""
    _check_state(table.horizon, table.battery, k, (m1, m2))
    nxt = table.values[k]
    idle = nxt[m1, m2]
    v1 = math.log1p(h1) + nxt[m1 - 1, m2] if m1 >= 1 else -math.inf
    v2 = math.log1p(h2) + nxt[m1, m2 - 1] if m2 >= 1 else -math.inf
    if v1 > v2 or (v1 == v2 and h1 >= h2):
        tx, v = Action.TX1, v1
    else:
        tx, v = Action.TX2, v2
    return tx if v > idle else Action.IDLE


def decide_decoupled(table1: GammaTable, table2: GammaTable, k: int, m1: int, m2: int,
                     h1: float, h2: float) -> Action:
    """Policy S: each node decides alone; a double request goes to the better channel."""
    f1 = decide_binary(table1, k, m1, h1)
    f2 = decide_binary(table2, k, m2, h2)
    if f1 and f2:
        return Action.TX1 if h1 >= h2 else Action.TX2
    if f1:
        return Action.TX1
    if f2:
        return Action.TX2
    return Action.IDLE


def decide_decoupled_n(tables: Sequence[GammaTable], k: int, energies: Sequence[int],
                       gains: Sequence[float]) -> int | None:
    """Policy S for any number of nodes. Returns the 1-based node number, or None to idle."""
    if not (len(tables) == len(energies) == len(gains)):
        raise ValueError("need one table, energy and gain per node")
    chosen = None
    for i, (t, m, h) in enumerate(zip(tables, energies, gains)):
        if decide_binary(t, k, m, h) and (chosen is None or h > gains[chosen]):
            chosen = i
    return None if chosen is None else chosen + 1
