"""Exact evaluation of threshold policies on the untruncated AoI chain.

Under a threshold policy the AoI chain renews at 1 after every update, so the
stationary weights follow ``w(1) = 1, w(d+1) = w(d) * (1 - Q_phi(d))``.
From the last threshold on the action is fixed and the weights are
geometric, which lets every tail sum be written in closed form.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    Action,
    Scenario,
    ThresholdPolicy,
    VehicleClass,
    classify_structure,
    recruit_costs,
    stage_cost_table,
    success_prob,
    success_probs,
    threshold_bounds,
    zero_wait_policy,
)

BRUTE_FORCE_LIMIT = 500


class NotRecurrentError(ValueError):
    """The policy never recruits from some AoI on, so the chain never renews."""


def _geometric_moments(start: int, ratio: float) -> tuple[float, float, float]:
    """Sums of ``ratio**k * (start + k)**j`` over k >= 0 for j = 0, 1, 2."""
    q = 1.0 - ratio
    m0 = 1.0 / q
    m1 = start / q + ratio / q**2
    m2 = start * start / q + 2.0 * start * ratio / q**2 + ratio * (1.0 + ratio) / q**3
    return m0, m1, m2


@dataclass(frozen=True)
class StationaryDistribution:
    head: np.ndarray  # pi(1), ..., pi(tail_start - 1)
    tail_start: int
    tail_mass: float  # pi(tail_start)
    tail_ratio: float

    def pmf(self, delta: int) -> float:
        if delta < 1:
            return 0.0
        if delta < self.tail_start:
            return float(self.head[delta - 1])
        return self.tail_mass * self.tail_ratio ** (delta - self.tail_start)

    def probabilities(self, n: int) -> np.ndarray:
        """pi(1..n) as an array."""
        return np.array([self.pmf(d) for d in range(1, n + 1)])

    def total(self) -> float:
        return float(self.head.sum()) + self.tail_mass / (1.0 - self.tail_ratio)


@dataclass(frozen=True)
class EvaluationReport:
    avg_cost: float
    aoi_loss_component: float
    recruit_cost_component: float
    mean_aoi: float

    def to_dict(self) -> dict:
        return {
            "avg_cost": self.avg_cost,
            "aoi_loss_component": self.aoi_loss_component,
            "recruit_cost_component": self.recruit_cost_component,
            "mean_aoi": self.mean_aoi,
        }


def _weights(s: Scenario, policy: ThresholdPolicy):
    q = success_probs(s)
    tail_start = policy.last_threshold
    tail_action = policy.tail_action
    tail_q = q[tail_action]
    if tail_q <= 0.0:
        raise NotRecurrentError(
            f"policy takes {tail_action.name} for every AoI >= {tail_start}; the chain has no recurrent state"
        )
    head_actions = policy.action_table(tail_start - 1)
    decay = 1.0 - q[head_actions]
    w = np.concatenate(([1.0], np.cumprod(decay)))
    return w[:-1], float(w[-1]), head_actions, tail_start, tail_action


def stationary_distribution(s: Scenario, policy: ThresholdPolicy) -> StationaryDistribution:
    head_w, tail_w, _, tail_start, tail_action = _weights(s, policy)
    ratio = 1.0 - success_prob(s, tail_action)
    z = head_w.sum() + tail_w / (1.0 - ratio)
    return StationaryDistribution(head_w / z, tail_start, tail_w / z, ratio)


def exact_average_cost(s: Scenario, policy: ThresholdPolicy) -> EvaluationReport:
    head_w, tail_w, head_actions, tail_start, tail_action = _weights(s, policy)
    q = success_probs(s)
    e = recruit_costs(s)
    n = len(head_actions)
    d = np.arange(1, n + 1, dtype=float)
    ratio = 1.0 - q[tail_action]
    m0, m1, m2 = _geometric_moments(tail_start, ratio)
    z = head_w.sum() + tail_w * m0
    aoi = s.beta * (np.dot(head_w, (1.0 - q[head_actions]) * d * d) + tail_w * ratio * m2)
    spend = (1.0 - s.beta) * (np.dot(head_w, e[head_actions]) + tail_w * e[tail_action] * m0)
    mean = (np.dot(head_w, d) + tail_w * m1) / z
    aoi, spend = aoi / z, spend / z
    return EvaluationReport(float(aoi + spend), float(aoi), float(spend), float(mean))


def zero_wait_cost_closed_form(s: Scenario) -> float:
    qb = success_prob(s, Action.B)
    second_moment = (2.0 - qb) / qb**2
    return (1.0 - s.beta) * recruit_costs(s)[Action.B] + s.beta * (1.0 - qb) * second_moment


# --- brute-force oracle ----------------------------------------------------

def _segment_tables(u: np.ndarray, ratio: float, K: int):
    """G[s, e] = sum_{d=s}^{e-1} ratio**(d-s) u(d), Z likewise with u = 1, P = ratio**(e-s).

    Indices are 1-based AoI values; only ``s <= e <= K`` is meaningful.
    """
    G = np.zeros((K + 2, K + 2))
    Z = np.zeros((K + 2, K + 2))
    for s in range(K, 0, -1):
        G[s, s + 1:] = u[s] + ratio * G[s + 1, s + 1:]
        Z[s, s + 1:] = 1.0 + ratio * Z[s + 1, s + 1:]
    idx = np.arange(K + 2)
    gap = np.clip(idx[None, :] - idx[:, None], 0, None)
    P = ratio ** gap.astype(float)
    return G, Z, P


def brute_force_optimal(s: Scenario, table_path=None) -> tuple[ThresholdPolicy, float]:
    """Exhaustive search over threshold tuples inside the bound box.

    Every tuple ``t_1 <= t_2 (<= t_3)`` with ``t_i <= bound_i`` is scored,
    where ``t_i`` is the first AoI at which the policy has reached the i-th
    recruiting action of the structure (an intermediate action is skipped
    when its tuple entry equals the next one).  Returns the cheapest policy
    (lexicographically smallest tuple on exact ties) and its exact cost.
    """
    structure = classify_structure(s)
    bounds = threshold_bounds(s)
    K = bounds.last
    if K > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"B-threshold bound {K} exceeds {BRUTE_FORCE_LIMIT}; the enumeration is intractable, "
            "use a larger beta"
        )
    acts = structure.recruit_order
    caps = [bounds[a] for a in acts]
    q = success_probs(s)
    u = np.vstack([np.zeros(4), stage_cost_table(s, K + 1)])  # row index = AoI

    qb = q[Action.B]
    m0, _, _ = _geometric_moments(1, 1.0 - qb)
    tail_c = np.array([
        (1.0 - s.beta) * recruit_costs(s)[Action.B] * m0
        + s.beta * (1.0 - qb) * _geometric_moments(b, 1.0 - qb)[2]
        if b >= 1 else 0.0
        for b in range(K + 2)
    ])
    tail_z = np.full(K + 2, m0)
    sq = np.arange(K + 2, dtype=float) ** 2
    head_c = s.beta * np.concatenate(([0.0], np.cumsum(sq[:-1])))  # beta * sum_{d < t} d^2
    head_z = np.arange(K + 2, dtype=float) - 1.0

    segs = {a: _segment_tables(u[:, a], 1.0 - q[a], K) for a in acts[:-1]}
    rows = []
    best = (math.inf, None)

    if len(acts) == 2:
        G1, Z1, P1 = segs[acts[0]]
        t2 = np.arange(1, caps[1] + 1)
        for t1 in range(1, caps[0] + 1):
            c = head_c[t1] + G1[t1, t2] + P1[t1, t2] * tail_c[t2]
            z = head_z[t1] + Z1[t1, t2] + P1[t1, t2] * tail_z[t2]
            cost = np.where(t2 >= t1, c / z, np.inf)
            i = int(np.argmin(cost))
            if cost[i] < best[0]:
                best = (float(cost[i]), (t1, int(t2[i])))
            if table_path is not None:
                rows.extend((t1, int(b), float(v)) for b, v in zip(t2, cost) if b >= t1)
    else:
        G1, Z1, P1 = segs[acts[0]]
        G2, Z2, P2 = segs[acts[1]]
        t2 = np.arange(1, caps[1] + 1)
        t3 = np.arange(1, caps[2] + 1)
        inner_c = G2[np.ix_(t2, t3)] + P2[np.ix_(t2, t3)] * tail_c[t3][None, :]
        inner_z = Z2[np.ix_(t2, t3)] + P2[np.ix_(t2, t3)] * tail_z[t3][None, :]
        valid23 = t3[None, :] >= t2[:, None]
        for t1 in range(1, caps[0] + 1):
            g1, z1, p1 = G1[t1, t2][:, None], Z1[t1, t2][:, None], P1[t1, t2][:, None]
            c = head_c[t1] + g1 + p1 * inner_c
            z = head_z[t1] + z1 + p1 * inner_z
            ok = valid23 & (t2[:, None] >= t1)
            cost = np.where(ok, c / z, np.inf)
            i = int(np.argmin(cost))
            j, k = divmod(i, cost.shape[1])
            if cost[j, k] < best[0]:
                best = (float(cost[j, k]), (t1, int(t2[j]), int(t3[k])))
            if table_path is not None:
                jj, kk = np.nonzero(ok)
                rows.extend((t1, int(t2[a]), int(t3[b]), float(cost[a, b])) for a, b in zip(jj, kk))

    if table_path is not None:
        _write_candidates(table_path, acts, rows)

    tup = best[1]
    thresholds = {}
    for i, a in enumerate(acts):
        if a is Action.B or tup[i] < tup[i + 1]:
            thresholds[a] = tup[i]
    policy = ThresholdPolicy(structure, thresholds)
    return policy, exact_average_cost(s, policy).avg_cost


def _write_candidates(path, acts, rows) -> None:
    cols = {"L": None, "H": None, "B": None}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_L", "delta_H", "delta_B", "avg_cost"])
        for row in rows:
            vals = dict(cols)
            for a, t in zip(acts, row[:-1]):
                vals[a.name] = t
            w.writerow(["" if vals[k] is None else vals[k] for k in ("L", "H", "B")] + [repr(row[-1])])


# --- baselines -------------------------------------------------------------

def planning_scenario_ignoring_capability(s: Scenario) -> Scenario:
    """The scenario as seen by a planner that treats every report as qualified."""
    return Scenario(
        s.beta,
        VehicleClass(s.low.p, s.low.c, 1.0),
        VehicleClass(s.high.p, s.high.c, 1.0),
    )


def dynamic_pricing_surrogate(s: Scenario, cfg=None) -> ThresholdPolicy:
    """Dynamic-pricing baseline: plan as if both vehicle types always deliver
    qualified data.  Evaluate the returned policy against the true ``s``."""
    from .solver import solve

    return solve(planning_scenario_ignoring_capability(s), cfg).thresholds


__all__ = [
    "EvaluationReport",
    "NotRecurrentError",
    "StationaryDistribution",
    "brute_force_optimal",
    "dynamic_pricing_surrogate",
    "exact_average_cost",
    "planning_scenario_ignoring_capability",
    "stationary_distribution",
    "zero_wait_cost_closed_form",
    "zero_wait_policy",
]
