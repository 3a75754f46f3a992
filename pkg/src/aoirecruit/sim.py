"""Seeded Monte-Carlo simulation of the recruit / sense / update loop.

Random numbers come from numpy's PCG64 bit generator.  The 64-bit seed is
expanded with ``SeedSequence(seed).spawn(4)`` into four independent
substreams, in this order: Low arrivals, High arrivals, Low qualification,
High qualification.  Each slot consumes exactly one double from each
substream, whether or not the draw ends up mattering, so a run is a
deterministic function of (scenario, policy, seed, horizon).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .model import Action, Scenario, ThresholdPolicy

RNG_ALGORITHM = "numpy.PCG64/SeedSequence.spawn(4)"
CHUNK = 1 << 20
TRAJECTORY_COLUMNS = ("t", "delta", "action", "arrived_L", "arrived_H", "qualified", "update")


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seed: int = 0
    record_histogram: bool = False

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class SimStats:
    empirical_avg_cost: float
    update_count: int
    mean_aoi: float
    max_aoi: int
    horizon: int
    recruit_spend_per_slot: float  # raw payments, before the (1 - beta) weight
    histogram: np.ndarray | None = None  # histogram[d] = slots spent at AoI d

    def to_dict(self) -> dict:
        out = {
            "empirical_avg_cost": self.empirical_avg_cost,
            "update_count": self.update_count,
            "mean_aoi": self.mean_aoi,
            "max_aoi": self.max_aoi,
            "horizon": self.horizon,
            "recruit_spend_per_slot": self.recruit_spend_per_slot,
            "rng": RNG_ALGORITHM,
        }
        if self.histogram is not None:
            out["histogram"] = {str(d): int(c) for d, c in enumerate(self.histogram) if c}
        return out


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(ss)) for ss in np.random.SeedSequence(seed).spawn(4)]


def simulate(s: Scenario, policy: ThresholdPolicy, cfg: SimConfig, trajectory=None) -> SimStats:
    """Run one sample path of ``cfg.horizon`` slots starting from AoI 1.

    Each slot charges ``(1 - beta)`` times the payments to recruited vehicles
    that showed up (qualified or not), plus ``beta * delta**2`` when no
    qualified report arrived.  ``trajectory`` is an optional CSV path that
    receives one row per slot.
    """
    last = policy.last_threshold
    actions = np.zeros(last + 1, dtype=np.int64)
    actions[1:] = policy.action_table(last)
    tail = int(policy.tail_action)
    gens = _streams(cfg.seed)

    delta = 1
    cost = spend = 0.0
    updates = 0
    aoi_sum = 0
    max_aoi = 0
    hist = np.zeros(0, dtype=np.int64)
    writer = fh = None
    if trajectory is not None:
        fh = Path(trajectory).open("w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
    try:
        done = 0
        while done < cfg.horizon:
            n = min(CHUNK, cfg.horizon - done)
            draws = [g.random(n) for g in gens]
            out_delta = np.empty(n, dtype=np.int64)
            out_action = np.empty(n, dtype=np.int64)
            out_flags = np.empty(n, dtype=np.int64)
            delta, c, sp, up = _kernels.simulate_chunk(
                actions, tail, delta, *draws,
                s.low.p, s.high.p, s.low.r, s.high.r, s.low.c, s.high.c, s.beta,
                out_delta, out_action, out_flags,
            )
            cost += c
            spend += sp
            updates += up
            aoi_sum += int(out_delta.sum())
            max_aoi = max(max_aoi, int(out_delta.max()))
            if cfg.record_histogram:
                counts = np.bincount(out_delta)
                if len(counts) > len(hist):
                    counts[: len(hist)] += hist
                    hist = counts
                else:
                    hist[: len(counts)] += counts
            if writer is not None:
                names = np.array([a.name for a in Action])[out_action]
                for i in range(n):
                    f = int(out_flags[i])
                    writer.writerow((done + i + 1, int(out_delta[i]), names[i],
                                     f & 1, (f >> 1) & 1, (f >> 2) & 1, (f >> 3) & 1))
            done += n
    finally:
        if fh is not None:
            fh.close()

    T = cfg.horizon
    return SimStats(
        empirical_avg_cost=cost / T,
        update_count=updates,
        mean_aoi=aoi_sum / T,
        max_aoi=max_aoi,
        horizon=T,
        recruit_spend_per_slot=spend / T,
        histogram=hist if cfg.record_histogram else None,
    )
