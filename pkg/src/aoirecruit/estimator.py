"""scikit-learn style wrapper around the solvers.

``fit`` takes a scenario (a :class:`Scenario`, its JSON mapping, or a flat
parameter mapping) and ``predict`` maps AoI values to recruitment actions,
so a solved policy can be cloned, grid-searched over ``get_params`` and
dropped into code that expects the estimator protocol.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .model import Action, Scenario, scenario_from_dict, validate_scenario
from .solver import SolverConfig, default_m, solve


def check_scenario(X) -> Scenario:
    if isinstance(X, Scenario):
        return X
    if isinstance(X, Mapping):
        if "low" in X or "high" in X:
            return scenario_from_dict(X)
        return validate_scenario(**X)
    raise TypeError(f"expected a Scenario or a mapping of scenario parameters, got {type(X).__name__}")


def check_aoi(X) -> np.ndarray:
    """Validate AoI values: a 1-d array (or column) of integers >= 1."""
    arr = column_or_1d(np.asarray(X))
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("AoI values must be integers")
    elif arr.dtype.kind not in "iu":
        raise ValueError(f"AoI values must be integers, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 1:
        raise ValueError("AoI values must be >= 1")
    return arr


class ThresholdPolicySolver(BaseEstimator):
    """Fit the optimal threshold recruitment policy of a scenario.

    Parameters
    ----------
    engine : {"brvi", "structural_rvi", "rvi"}
    m : int or None
        Truncation size; ``None`` picks twice the B-threshold bound.
    theta : float
        Relative-change stopping tolerance.
    max_iters : int

    Attributes
    ----------
    scenario_, result_, structure_, thresholds_, avg_cost_
    """

    def __init__(self, engine="brvi", m=None, theta=1e-10, max_iters=1_000_000):
        self.engine = engine
        self.m = m
        self.theta = theta
        self.max_iters = max_iters

    def fit(self, X, y=None):
        s = check_scenario(X)
        m = self.m if self.m is not None else default_m(s)
        cfg = SolverConfig(m=m, theta=self.theta, engine=self.engine, max_iters=self.max_iters)
        self.scenario_ = s
        self.result_ = solve(s, cfg)
        self.structure_ = self.result_.structure
        self.thresholds_ = {a.name: t for a, t in self.result_.thresholds.thresholds.items()}
        self.avg_cost_ = self.result_.avg_cost
        return self

    def predict(self, X) -> np.ndarray:
        """Action names (``"N"``, ``"L"``, ``"H"``, ``"B"``) for each AoI in ``X``."""
        check_is_fitted(self, "result_")
        deltas = check_aoi(X)
        policy = self.result_.thresholds
        names = np.array([a.name for a in Action])
        table = policy.action_table(int(deltas.max(initial=1)))
        return names[table[deltas - 1]]

    def score(self, X=None, y=None) -> float:
        """Negative exact average cost of the fitted policy (higher is better)."""
        check_is_fitted(self, "result_")
        return -self.avg_cost_
