"""Truncated-MDP construction and the three value-iteration engines.

``rvi`` minimizes over all four actions at every state, ``structural_rvi``
additionally assigns B to every state after the first B within a sweep, and
``brvi`` further restricts each minimization to the reduced feasible set
implied by the threshold bounds.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from . import _kernels
from .evaluate import exact_average_cost
from .io import check_schema
from .model import (
    Action,
    PolicyStructure,
    Scenario,
    ThresholdBounds,
    ThresholdPolicy,
    classify_structure,
    feasible_mask,
    stage_cost_table,
    structure_is_boundary,
    success_probs,
    threshold_bounds,
)

logger = logging.getLogger(__name__)

ENGINES = ("rvi", "structural_rvi", "brvi")


class TruncationWarning(UserWarning):
    """The truncation size does not exceed the largest threshold bound."""


class NonThresholdPolicyError(ValueError):
    pass


class BoundViolationError(ValueError):
    pass


@dataclass(frozen=True)
class TruncatedMdp:
    scenario: Scenario
    m: int

    @cached_property
    def q(self) -> np.ndarray:
        return success_probs(self.scenario)

    @cached_property
    def costs(self) -> np.ndarray:
        table = stage_cost_table(self.scenario, self.m)
        table.flags.writeable = False
        return table

    @cached_property
    def bounds(self) -> ThresholdBounds:
        return threshold_bounds(self.scenario)

    @property
    def truncation_warning(self) -> bool:
        return self.m <= self.bounds.last

    def next_state(self, delta: int) -> int:
        return min(delta + 1, self.m)

    def transitions(self, delta: int, a: Action) -> dict[int, float]:
        """Nonzero transition probabilities out of ``delta`` under ``a``."""
        if not 1 <= delta <= self.m:
            raise ValueError(f"state {delta} outside 1..{self.m}")
        qa = float(self.q[Action(a)])
        out: dict[int, float] = {}
        nxt = self.next_state(delta)
        if qa > 0.0:
            out[1] = out.get(1, 0.0) + qa
        out[nxt] = out.get(nxt, 0.0) + (1.0 - qa)
        return out

    def transition_matrix(self, a: Action) -> np.ndarray:
        """Dense ``(m, m)`` transition matrix (state delta at index delta-1)."""
        qa = float(self.q[Action(a)])
        P = np.zeros((self.m, self.m))
        rows = np.arange(self.m)
        P[rows, np.minimum(rows + 1, self.m - 1)] += 1.0 - qa
        P[:, 0] += qa
        return P


def build_truncated_mdp(s: Scenario, m: int) -> TruncatedMdp:
    if int(m) != m or m < 2:
        raise ValueError(f"truncation size m must be an integer >= 2, got {m}")
    mdp = TruncatedMdp(s, int(m))
    if mdp.truncation_warning:
        warnings.warn(
            f"m={m} does not exceed the B-threshold bound {mdp.bounds.last}; "
            "the truncated solution may differ from the untruncated optimum",
            TruncationWarning,
            stacklevel=2,
        )
    return mdp


SOLVER_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "minimum": 2},
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "engine": {"enum": list(ENGINES)},
        "max_iters": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class SolverConfig:
    m: int = 1000
    theta: float = 1e-10
    engine: str = "brvi"
    max_iters: int = 1_000_000

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SolverConfig":
        check_schema(data, SOLVER_CONFIG_SCHEMA)
        return cls(**data)

    def to_dict(self) -> dict:
        return {"m": self.m, "theta": self.theta, "engine": self.engine, "max_iters": self.max_iters}


@dataclass(frozen=True)
class SolveResult:
    engine: str
    policy: np.ndarray  # action index per state delta = 1..m
    iterate: np.ndarray
    thresholds: ThresholdPolicy
    bounds: ThresholdBounds
    avg_cost: float
    iterations: int
    argmin_evals: int
    shortcuts: int
    converged: bool
    truncation_warning: bool
    boundary: bool
    monotone_ok: bool
    absorbing_ok: bool

    @property
    def structure(self) -> PolicyStructure:
        return self.thresholds.structure

    @property
    def m(self) -> int:
        return len(self.policy)

    def realized_order(self) -> list[Action]:
        """Distinct actions in the order they first appear along delta = 1..m."""
        seen: list[Action] = []
        for a in self.policy:
            if not seen or seen[-1] != a:
                seen.append(Action(int(a)))
        return seen

    def policy_rle(self) -> list[list]:
        runs: list[list] = []
        for a in self.policy:
            name = Action(int(a)).name
            if runs and runs[-1][0] == name:
                runs[-1][1] += 1
            else:
                runs.append([name, 1])
        return runs

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "structure": self.structure.value,
            "boundary": self.boundary,
            "thresholds": self.thresholds.to_dict()["thresholds"],
            "bounds": self.bounds.to_dict(),
            "avg_cost": self.avg_cost,
            "iterations": self.iterations,
            "argmin_evals": self.argmin_evals,
            "converged": self.converged,
            "truncation_warning": self.truncation_warning,
            "m": self.m,
            "policy": self.policy_rle(),
        }


def _priority(structure: PolicyStructure) -> np.ndarray:
    order = list(structure.order)
    missing = [a for a in Action if a not in order]
    return np.array(order[:-1] + missing + [Action.B], dtype=np.int64)


def _run(mdp: TruncatedMdp, cfg: SolverConfig, engine: str, debug: bool = False) -> SolveResult:
    if cfg.engine != engine:
        raise ValueError(f"config engine {cfg.engine!r} does not match {engine!r}")
    s = mdp.scenario
    structure = classify_structure(s)
    bounds = mdp.bounds
    if engine == "brvi":
        allowed = feasible_mask(bounds, mdp.m)
    else:
        allowed = np.ones((mdp.m, 4), dtype=bool)
    out = _kernels.relative_value_iteration(
        np.ascontiguousarray(mdp.costs), mdp.q, allowed, _priority(structure),
        engine != "rvi", float(cfg.theta), int(cfg.max_iters),
    )
    policy, J, iterations, evals, shortcuts, converged, monotone_ok, absorbing_ok = out
    if debug and not (monotone_ok and absorbing_ok):
        raise AssertionError(
            f"{engine}: iterate monotonicity={monotone_ok}, B-absorption={absorbing_ok} failed in some sweep"
        )
    if not converged:
        logger.warning("%s did not converge within %d sweeps", engine, cfg.max_iters)
    trunc = mdp.truncation_warning
    thresholds = extract_thresholds(policy, s, check_bounds=not trunc)
    policy.flags.writeable = False
    J.flags.writeable = False
    return SolveResult(
        engine=engine,
        policy=policy,
        iterate=J,
        thresholds=thresholds,
        bounds=bounds,
        avg_cost=exact_average_cost(s, thresholds).avg_cost,
        iterations=int(iterations),
        argmin_evals=int(evals),
        shortcuts=int(shortcuts),
        converged=bool(converged),
        truncation_warning=trunc,
        boundary=structure_is_boundary(s),
        monotone_ok=bool(monotone_ok),
        absorbing_ok=bool(absorbing_ok),
    )


def rvi_solve(mdp: TruncatedMdp, cfg: SolverConfig, debug: bool = False) -> SolveResult:
    return _run(mdp, cfg, "rvi", debug)


def structural_rvi_solve(mdp: TruncatedMdp, cfg: SolverConfig, debug: bool = False) -> SolveResult:
    return _run(mdp, cfg, "structural_rvi", debug)


def brvi_solve(mdp: TruncatedMdp, cfg: SolverConfig, debug: bool = False) -> SolveResult:
    return _run(mdp, cfg, "brvi", debug)


TAIL_TOLERANCE = 1e-12


def default_m(s: Scenario) -> int:
    """Truncation size comfortably above the B-threshold bound.

    Past the bound every state recruits B, so the chance of surviving k more
    slots is ``(1 - Q_B)**k``.  Capping the AoI at m understates the loss in
    that tail, and when Q_B is small the error can flip near-ties at small
    AoI.  So m also runs until the surviving mass times the squared AoI drops
    below ``TAIL_TOLERANCE``.
    """
    b = threshold_bounds(s).last
    decay = 1.0 - success_probs(s)[Action.B]
    k = 0
    while decay**k * (b + k) ** 2 > TAIL_TOLERANCE:
        k += 1
    return max(2 * b, b + k, 16)


def solve(s: Scenario, cfg: SolverConfig | None = None, debug: bool = False) -> SolveResult:
    """Solve ``s`` with the configured engine (BRVI with an automatic ``m`` by default)."""
    if cfg is None:
        cfg = SolverConfig(m=default_m(s))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        mdp = build_truncated_mdp(s, cfg.m)
    return _run(mdp, cfg, cfg.engine, debug)


def extract_thresholds(table, s: Scenario, check_bounds: bool = True) -> ThresholdPolicy:
    """Read the thresholds off a per-state action table (index 0 is delta = 1).

    If B never appears in the table, its threshold is placed just past the
    table (delta = m + 1).
    """
    table = [Action(int(a)) for a in table]
    structure = classify_structure(s)
    order = structure.order
    pos = {a: i for i, a in enumerate(order)}
    thresholds: dict[Action, int] = {}
    prev = 0
    for delta, a in enumerate(table, start=1):
        if a not in pos:
            raise NonThresholdPolicyError(
                f"non-threshold policy: action {a.name} at state {delta} is not in structure {structure.value}"
            )
        if pos[a] < prev:
            raise NonThresholdPolicyError(
                f"non-threshold policy: action {a.name} at state {delta} follows {order[prev].name}"
            )
        if pos[a] > prev:
            thresholds[a] = delta
            prev = pos[a]
    if Action.B not in thresholds:
        thresholds[Action.B] = len(table) + 1
    if check_bounds:
        bounds = threshold_bounds(s)
        for i, a in enumerate(structure.recruit_order):
            # first state at which the policy is at or past ``a`` in the order
            reached = min(thresholds[b] for b in structure.recruit_order[i:] if b in thresholds)
            if reached > bounds[a]:
                raise BoundViolationError(
                    f"bound violated: threshold for {a.name} is {reached} > bound {bounds[a]}"
                )
    return ThresholdPolicy(structure, thresholds)
