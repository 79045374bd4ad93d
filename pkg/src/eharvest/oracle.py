"""Brute-force ground truth with no threshold structure.

Both the single-node and the two-node problems are flattened into one
tabular finite-horizon MDP (carry-over states, an arrival kernel, a finite
channel alphabet and per-state action lists). On top of it sit plain value
iteration, exact policy evaluation by pushing the state distribution
forward, and exhaustive enumeration of Markov policies.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .model import ConsumptionMode, ProblemSpec, TwoNodeSpec, check
from .twonode import Action

DEFAULT_GUARD = 10**7


class GuardRefusal(RuntimeError):
    """The instance has more Markov policies than the enumeration guard allows."""

    def __init__(self, count: int, guard: int):
        self.count = count
        self.guard = guard
        super().__init__(f"instance too large: {count} Markov policies exceed guard {guard}")


class InfeasiblePolicy(ValueError):
    pass


@dataclass(frozen=True)
class TabularModel:
    """Stationary finite-horizon MDP.

    States are carry-over levels (single node) or flattened pairs
    ``c1 * (B + 1) + c2``. ``arrive[c, u]`` is the probability that carry
    ``c`` becomes available energy ``u``. For every post-arrival state ``u``
    and channel outcome ``j``, ``reward[u, j, a]`` and ``next_state[u, j, a]``
    describe action ``a``; ``feasible[u, j, a]`` masks illegal actions.
    """

    horizon: int
    arrive: np.ndarray
    channel_probs: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    feasible: np.ndarray
    initial: int
    shape: tuple[int, ...]  # (B+1,) or (B+1, B+1)

    @property
    def n_states(self) -> int:
        return self.arrive.shape[0]


def _single_model(spec: ProblemSpec, reward_scale: float = 1.0) -> TabularModel:
    B = spec.battery
    S = B + 1
    arrive = np.zeros((S, S))
    for c in range(S):
        for e, p in enumerate(spec.arrivals.probs):
            arrive[c, min(c + e, B)] += p
    J = spec.channel.size
    A = S  # action = units spent
    reward = np.zeros((S, J, A))
    nxt = np.zeros((S, J, A), dtype=int)
    feas = np.zeros((S, J, A), dtype=bool)
    for u in range(S):
        fmax = min(u, 1) if spec.mode is ConsumptionMode.BINARY else u
        for j, h in enumerate(spec.channel.gains):
            for f in range(fmax + 1):
                feas[u, j, f] = True
                reward[u, j, f] = reward_scale * math.log(1 + f * h)
                nxt[u, j, f] = u - f
    return TabularModel(spec.horizon, arrive, np.array(spec.channel.probs), reward, nxt, feas,
                        spec.initial, (S,))


def _two_model(spec: TwoNodeSpec, reward_scale: float = 1.0) -> TabularModel:
    B = spec.battery
    L = B + 1
    S = L * L
    pairs = list(itertools.product(range(L), repeat=2))
    arrive = np.zeros((S, S))
    for s, (c1, c2) in enumerate(pairs):
        for e1, pe1 in ((0, 1 - spec.p1), (1, spec.p1)):
            for e2, pe2 in ((0, 1 - spec.p2), (1, spec.p2)):
                arrive[s, min(c1 + e1, B) * L + min(c2 + e2, B)] += pe1 * pe2
    outcomes = list(itertools.product(range(spec.channel1.size), range(spec.channel2.size)))
    probs = np.array([spec.channel1.probs[a] * spec.channel2.probs[b] for a, b in outcomes])
    J = len(outcomes)
    reward = np.zeros((S, J, 3))
    nxt = np.zeros((S, J, 3), dtype=int)
    feas = np.zeros((S, J, 3), dtype=bool)
    for s, (u1, u2) in enumerate(pairs):
        for j, (a, b) in enumerate(outcomes):
            h1, h2 = spec.channel1.gains[a], spec.channel2.gains[b]
            feas[s, j, Action.IDLE] = True
            nxt[s, j, Action.IDLE] = s
            if u1 >= 1:
                feas[s, j, Action.TX1] = True
                reward[s, j, Action.TX1] = reward_scale * math.log(1 + h1)
                nxt[s, j, Action.TX1] = (u1 - 1) * L + u2
            if u2 >= 1:
                feas[s, j, Action.TX2] = True
                reward[s, j, Action.TX2] = reward_scale * math.log(1 + h2)
                nxt[s, j, Action.TX2] = u1 * L + (u2 - 1)
    initial = spec.initial[0] * L + spec.initial[1]
    return TabularModel(spec.horizon, arrive, probs, reward, nxt, feas, initial, (L, L))


def build_model(spec: Union[ProblemSpec, TwoNodeSpec], reward_scale: float = 1.0) -> TabularModel:
    check(spec)
    if isinstance(spec, TwoNodeSpec):
        return _two_model(spec, reward_scale)
    return _single_model(spec, reward_scale)


def _backward(model: TabularModel) -> np.ndarray:
    n, S = model.horizon, model.n_states
    V = np.zeros((n + 1, S))
    for k in range(n - 1, -1, -1):
        q_values = np.where(model.feasible, model.reward + V[k + 1][model.next_state], -np.inf)
        w = q_values.max(axis=2) @ model.channel_probs
        V[k] = model.arrive @ w
    return V


def value_iteration_single(spec: ProblemSpec) -> np.ndarray:
    """V[k-1, c] for slots k = 1..n+1 by full-state backward induction."""
    return _backward(build_model(spec))


def value_iteration_two(spec: TwoNodeSpec) -> np.ndarray:
    """V[k-1, c1, c2] for slots k = 1..n+1."""
    model = build_model(spec)
    return _backward(model).reshape((spec.horizon + 1, *model.shape))


def optimal_actions(spec: Union[ProblemSpec, TwoNodeSpec], k: int, state, j: int,
                    tol: float = 1e-12) -> set[int]:
    """All actions within ``tol`` of the best at post-arrival ``state`` and channel index ``j``.

    ``state`` is ``u`` or ``(u1, u2)``; for two nodes ``j`` indexes the
    joint channel outcome ``j1 * J2 + j2``.
    """
    model = build_model(spec)
    V = _backward(model)
    s = int(np.ravel_multi_index(tuple(np.atleast_1d(state)), model.shape))
    vals = model.reward[s, j] + V[k][model.next_state[s, j]]
    vals = np.where(model.feasible[s, j], vals, -np.inf)
    return {int(a) for a in np.flatnonzero(vals >= vals.max() - tol)}


# --- policies -------------------------------------------------------------------

PolicyMap = np.ndarray
"""Action index per (slot-1, post-arrival state index, channel outcome index)."""


def tabulate_policy(decide: Callable, spec: Union[ProblemSpec, TwoNodeSpec]) -> PolicyMap:
    """Turn a Markov decision function into a :data:`PolicyMap`.

    Single node: ``decide(k, u, h) -> units``. Two nodes:
    ``decide(k, u1, u2, h1, h2) -> Action``.
    """
    model = build_model(spec)
    n, S, J = spec.horizon, model.n_states, len(model.channel_probs)
    pol = np.zeros((n, S, J), dtype=int)
    if isinstance(spec, TwoNodeSpec):
        L = spec.battery + 1
        outcomes = list(itertools.product(spec.channel1.gains, spec.channel2.gains))
        for k in range(1, n + 1):
            for s in range(S):
                u1, u2 = divmod(s, L)
                for j, (h1, h2) in enumerate(outcomes):
                    pol[k - 1, s, j] = int(decide(k, u1, u2, h1, h2))
    else:
        for k in range(1, n + 1):
            for u in range(S):
                for j, h in enumerate(spec.channel.gains):
                    pol[k - 1, u, j] = int(decide(k, u, h))
    return pol


def _evaluate_batch(model: TabularModel, policies: np.ndarray) -> np.ndarray:
    """Exact expected payoff of each policy in ``policies`` (shape (P, n, S, J))."""
    P, n, S, J = policies.shape
    dist = np.zeros((P, S))
    dist[:, model.initial] = 1.0
    total = np.zeros(P)
    rows = np.arange(P)
    for k in range(n):
        post = dist @ model.arrive
        new = np.zeros((P, S))
        for u in range(S):
            mass_u = post[:, u]
            if not mass_u.any():
                continue
            for j in range(J):
                a = policies[:, k, u, j]
                w = mass_u * model.channel_probs[j]
                total += w * model.reward[u, j, a]
                np.add.at(new, (rows, model.next_state[u, j, a]), w)
        dist = new
    return total


def _check_feasible(model: TabularModel, policy: np.ndarray) -> None:
    n, S, J = policy.shape
    A = model.feasible.shape[2]
    if policy.min() < 0 or policy.max() >= A:
        raise InfeasiblePolicy("policy uses an unknown action")
    ok = np.take_along_axis(np.broadcast_to(model.feasible, (n, S, J, A)), policy[..., None], axis=3)
    if not ok.all():
        k, s, j = np.argwhere(~ok[..., 0])[0]
        state = np.unravel_index(s, model.shape)
        raise InfeasiblePolicy(
            f"infeasible action {policy[k, s, j]} at slot {k + 1}, energy {tuple(int(x) for x in state)},"
            f" channel outcome {j}")


def evaluate_fixed_policy(policy: Union[PolicyMap, Callable], spec: Union[ProblemSpec, TwoNodeSpec],
                          reward_scale: float = 1.0) -> float:
    """Exact expected total payoff of a Markov policy, with no sampling."""
    model = build_model(spec, reward_scale)
    if callable(policy):
        policy = tabulate_policy(policy, spec)
    policy = np.asarray(policy, dtype=int)
    expected = (spec.horizon, model.n_states, len(model.channel_probs))
    if policy.shape != expected:
        raise ValueError(f"policy shape {policy.shape} does not match {expected}")
    _check_feasible(model, policy)
    return float(_evaluate_batch(model, policy[None])[0])


def _decision_points(model: TabularModel) -> tuple[list[tuple[int, int, int]], list[np.ndarray]]:
    """Reachable (slot, state, channel) triples with more than one legal action."""
    reach = np.zeros(model.n_states, dtype=bool)
    reach[model.initial] = True
    points, choices = [], []
    for k in range(model.horizon):
        post = (reach.astype(float) @ (model.arrive > 0)) > 0
        nxt = np.zeros_like(reach)
        for u in np.flatnonzero(post):
            for j in range(len(model.channel_probs)):
                acts = np.flatnonzero(model.feasible[u, j])
                nxt[model.next_state[u, j, acts]] = True
                if len(acts) > 1:
                    points.append((k, int(u), j))
                    choices.append(acts)
        reach = nxt
    return points, choices


def count_markov_policies(spec: Union[ProblemSpec, TwoNodeSpec]) -> int:
    _, choices = _decision_points(build_model(spec))
    return math.prod(len(c) for c in choices)


@dataclass(frozen=True)
class EnumerationResult:
    value: float
    policy: PolicyMap
    count: int


def enumerate_markov_policies(spec: Union[ProblemSpec, TwoNodeSpec], guard: int = DEFAULT_GUARD,
                              batch: int = 1 << 14) -> EnumerationResult:
    """Evaluate every Markov policy exactly and return the best.

    Only decisions at reachable states with a real choice are enumerated;
    elsewhere the policy idles. Ties keep the lowest policy index, so the
    result does not depend on ``batch``.
    """
    model = build_model(spec)
    points, choices = _decision_points(model)
    radices = np.array([len(c) for c in choices], dtype=np.int64)
    count = math.prod(int(r) for r in radices)
    if count > guard:
        raise GuardRefusal(count, guard)

    n, S, J = model.horizon, model.n_states, len(model.channel_probs)
    base = np.zeros((n, S, J), dtype=int)  # action 0 (idle) is always legal
    strides = np.cumprod(np.concatenate([[1], radices[:-1]])) if len(radices) else radices
    best_val, best_idx = -math.inf, 0
    for start in range(0, count, batch):
        idx = np.arange(start, min(start + batch, count), dtype=np.int64)
        pols = np.broadcast_to(base, (len(idx), n, S, J)).copy()
        for d, (k, u, j) in enumerate(points):
            pols[:, k, u, j] = choices[d][(idx // strides[d]) % radices[d]]
        vals = _evaluate_batch(model, pols)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_idx = float(vals[i]), int(idx[i])
    best = base.copy()
    for d, (k, u, j) in enumerate(points):
        best[k, u, j] = choices[d][(best_idx // int(strides[d])) % int(radices[d])]
    return EnumerationResult(best_val, best, count)
