"""Scenario parameters, per-action cost quantities and policy-structure analysis.

Everything here is a pure function of a :class:`Scenario`.  Actions are an
``IntEnum`` so they double as column indices into per-action cost tables
(``N=0, L=1, H=2, B=3``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Mapping

import numpy as np


class ScenarioError(ValueError):
    """A scenario parameter violates a model constraint."""


class DegeneratePairError(ValueError):
    """Two actions have the same success probability, so no marginal ratio exists."""


class StructureMismatchError(ValueError):
    """A structure tag was supplied that does not match the scenario's classification."""


class Action(IntEnum):
    N = 0
    L = 1
    H = 2
    B = 3

    def __str__(self) -> str:
        return self.name


class PolicyStructure(Enum):
    LH = "LH"
    HL = "HL"
    NoneL = "NoneL"
    NoneH = "NoneH"

    @property
    def order(self) -> tuple[Action, ...]:
        return _ORDERS[self]

    @property
    def recruit_order(self) -> tuple[Action, ...]:
        """The structure's order without the leading N."""
        return _ORDERS[self][1:]

    def __str__(self) -> str:
        return self.value


_ORDERS = {
    PolicyStructure.LH: (Action.N, Action.L, Action.H, Action.B),
    PolicyStructure.HL: (Action.N, Action.H, Action.L, Action.B),
    PolicyStructure.NoneL: (Action.N, Action.H, Action.B),
    PolicyStructure.NoneH: (Action.N, Action.L, Action.B),
}


@dataclass(frozen=True)
class VehicleClass:
    p: float  # arrival probability per slot
    c: float  # payment per recruited arrival
    r: float  # probability that a report is qualified

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ScenarioError(f"arrival probability p={self.p} must lie in (0, 1)")
        if not self.c > 0.0:
            raise ScenarioError(f"operational cost c={self.c} must be positive")
        if not 0.0 < self.r <= 1.0:
            raise ScenarioError(f"sensing capability r={self.r} must lie in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    """Weight ``beta`` on AoI loss plus the Low and High vehicle classes.

    Constructing a ``Scenario`` directly only checks value ranges.  Use
    :func:`validate_scenario` (or :func:`scenario_from_dict`) to also enforce
    the type ordering ``c_L < c_H`` and ``r_L < r_H``; the planning model of
    the dynamic-pricing baseline deliberately sets both capabilities to 1.
    """

    beta: float
    low: VehicleClass
    high: VehicleClass

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ScenarioError(f"beta={self.beta} must lie in (0, 1)")

    def replace(self, **params: float) -> "Scenario":
        """Copy with flat parameters (``beta``, ``p_L``, ``c_H``, ...) overridden, validated."""
        flat = self.as_flat()
        unknown = set(params) - set(flat)
        if unknown:
            raise KeyError(f"unknown scenario parameter(s): {sorted(unknown)}")
        flat.update(params)
        return validate_scenario(**flat)

    def as_flat(self) -> dict[str, float]:
        return {
            "beta": self.beta,
            "p_L": self.low.p, "c_L": self.low.c, "r_L": self.low.r,
            "p_H": self.high.p, "c_H": self.high.c, "r_H": self.high.r,
        }

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "low": {"p": self.low.p, "c": self.low.c, "r": self.low.r},
            "high": {"p": self.high.p, "c": self.high.c, "r": self.high.r},
        }


def validate_scenario(beta, p_L, c_L, r_L, p_H, c_H, r_H) -> Scenario:
    """Build a Scenario, rejecting anything outside the model's assumptions."""
    values = dict(beta=beta, p_L=p_L, c_L=c_L, r_L=r_L, p_H=p_H, c_H=c_H, r_H=r_H)
    for name, v in values.items():
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
            raise ScenarioError(f"{name} must be a real number, got {v!r}")
        if not math.isfinite(v):
            raise ScenarioError(f"{name} must be finite, got {v!r}")
    if not 0.0 < beta < 1.0:
        raise ScenarioError(f"beta in (0, 1) violated: beta={beta}")
    for tag, p, c, r in (("L", p_L, c_L, r_L), ("H", p_H, c_H, r_H)):
        if not 0.0 < p < 1.0:
            raise ScenarioError(f"0 < p_{tag} < 1 violated: p_{tag}={p}")
        if not c > 0.0:
            raise ScenarioError(f"c_{tag} > 0 violated: c_{tag}={c}")
        if not 0.0 < r <= 1.0:
            raise ScenarioError(f"0 < r_{tag} <= 1 violated: r_{tag}={r}")
    if not c_L < c_H:
        raise ScenarioError(f"c_L < c_H violated: c_L={c_L}, c_H={c_H}")
    if not r_L < r_H:
        raise ScenarioError(f"r_L < r_H violated: r_L={r_L}, r_H={r_H}")
    return Scenario(
        float(beta),
        VehicleClass(float(p_L), float(c_L), float(r_L)),
        VehicleClass(float(p_H), float(c_H), float(r_H)),
    )


_VEHICLE_SCHEMA = {
    "type": "object",
    "properties": {
        "p": {"type": "number"},
        "c": {"type": "number"},
        "r": {"type": "number"},
    },
    "required": ["p", "c", "r"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "beta": {"type": "number"},
        "low": _VEHICLE_SCHEMA,
        "high": _VEHICLE_SCHEMA,
    },
    "required": ["beta", "low", "high"],
    "additionalProperties": False,
}


def scenario_from_dict(data: Mapping) -> Scenario:
    """Parse the Scenario JSON object; unknown fields are rejected."""
    from .io import check_schema

    check_schema(data, SCENARIO_SCHEMA)
    return validate_scenario(
        data["beta"],
        data["low"]["p"], data["low"]["c"], data["low"]["r"],
        data["high"]["p"], data["high"]["c"], data["high"]["r"],
    )


# --- per-action quantities -------------------------------------------------

def success_prob(s: Scenario, a: Action) -> float:
    a = Action(a)
    ql = s.low.r * s.low.p
    qh = s.high.r * s.high.p
    if a is Action.N:
        return 0.0
    if a is Action.L:
        return ql
    if a is Action.H:
        return qh
    return ql + qh - ql * qh


def expected_recruit_cost(s: Scenario, a: Action) -> float:
    a = Action(a)
    if a is Action.N:
        return 0.0
    if a is Action.L:
        return s.low.p * s.low.c
    if a is Action.H:
        return s.high.p * s.high.c
    return s.low.p * s.low.c + s.high.p * s.high.c


def success_probs(s: Scenario) -> np.ndarray:
    """Q_a for all four actions, indexed by ``Action``."""
    return np.array([success_prob(s, a) for a in Action])


def recruit_costs(s: Scenario) -> np.ndarray:
    return np.array([expected_recruit_cost(s, a) for a in Action])


def stage_cost(s: Scenario, delta: int, a: Action) -> float:
    if delta < 1:
        raise ValueError(f"AoI must be >= 1, got {delta}")
    q = success_prob(s, a)
    return (1.0 - s.beta) * expected_recruit_cost(s, a) + s.beta * (1.0 - q) * delta * delta


def stage_cost_table(s: Scenario, m: int) -> np.ndarray:
    """``(m, 4)`` array of u(delta, a) for delta = 1..m."""
    d = np.arange(1, m + 1, dtype=float)
    q = success_probs(s)
    e = recruit_costs(s)
    return (1.0 - s.beta) * e[None, :] + s.beta * (1.0 - q[None, :]) * (d * d)[:, None]


def cost_effectiveness(s: Scenario, a: Action) -> float:
    """Expected spend per expected successful update, ``p_a c_a / Q_a``."""
    a = Action(a)
    if a is Action.N:
        raise ValueError("cost-effectiveness is undefined for action N")
    q = success_prob(s, a)
    if q == 0.0:
        raise ValueError(f"cost-effectiveness undefined: Q_{a.name} = 0")
    if a is Action.L:
        return s.low.c / s.low.r
    if a is Action.H:
        return s.high.c / s.high.r
    return expected_recruit_cost(s, a) / q


def marginal_cost_effectiveness(s: Scenario, a1: Action, a2: Action) -> float:
    q1, q2 = success_prob(s, a1), success_prob(s, a2)
    if q1 == q2:
        raise DegeneratePairError(
            f"degenerate pair ({Action(a1).name}, {Action(a2).name}): equal success probability {q1}"
        )
    return (expected_recruit_cost(s, a2) - expected_recruit_cost(s, a1)) / (q2 - q1)


# --- structure classification ----------------------------------------------

def _ratios(s: Scenario) -> tuple[float, float, float, float]:
    ql, qh = success_prob(s, Action.L), success_prob(s, Action.H)
    eta_ratio = cost_effectiveness(s, Action.L) / cost_effectiveness(s, Action.H)
    kappa = (1.0 - qh) / (1.0 - ql)
    return ql, qh, eta_ratio, kappa


def _classify(s: Scenario) -> tuple[PolicyStructure, bool]:
    ql, qh, ratio, kappa = _ratios(s)
    if ql <= qh and kappa < ratio < 1.0:
        return PolicyStructure.LH, False
    if ql > qh and 1.0 < ratio < kappa:
        return PolicyStructure.HL, False
    if ratio >= max(1.0, kappa):
        return PolicyStructure.NoneL, False
    if ratio < min(1.0, kappa):
        return PolicyStructure.NoneH, False
    # ratio == kappa < 1, or ratio == 1 < kappa: the middle action's window is
    # empty, so the policy escalates straight from its first action to B.
    return PolicyStructure.NoneH, True


def classify_structure(s: Scenario) -> PolicyStructure:
    return _classify(s)[0]


def structure_is_boundary(s: Scenario) -> bool:
    """True when the scenario sits on an equality left open by the four strict regions."""
    return _classify(s)[1]


# --- threshold bounds and reduced feasible sets ----------------------------

def strict_ceil(x: float) -> int:
    """Smallest integer strictly greater than ``x``."""
    return math.floor(x) + 1


@dataclass(frozen=True)
class ThresholdBounds:
    """Strict-ceiling upper bounds on each threshold of a structure.

    ``bounds`` is keyed by the structure's recruiting actions, in order; the
    value for an action bounds the first AoI at which the policy is at or
    beyond that action in the escalation order.
    """

    structure: PolicyStructure
    bounds: Mapping[Action, int] = field(default_factory=dict)

    def __getitem__(self, a: Action) -> int:
        return self.bounds[Action(a)]

    @property
    def last(self) -> int:
        return self.bounds[Action.B]

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.bounds[a] for a in self.structure.recruit_order)

    def to_dict(self) -> dict[str, int]:
        return {a.name: self.bounds[a] for a in self.structure.recruit_order}


def _crossover_ratios(s: Scenario, structure: PolicyStructure) -> dict[Action, float]:
    """Indifference points (in units of (1-beta) * cost ratio) between consecutive actions."""
    ql, qh = success_prob(s, Action.L), success_prob(s, Action.H)
    eta_l = cost_effectiveness(s, Action.L)
    eta_h = cost_effectiveness(s, Action.H)
    if structure is PolicyStructure.LH:
        return {
            Action.L: eta_l,
            Action.H: marginal_cost_effectiveness(s, Action.L, Action.H),
            Action.B: eta_l / (1.0 - qh),
        }
    if structure is PolicyStructure.HL:
        return {
            Action.H: eta_h,
            Action.L: marginal_cost_effectiveness(s, Action.H, Action.L),
            Action.B: eta_h / (1.0 - ql),
        }
    if structure is PolicyStructure.NoneL:
        return {Action.H: eta_h, Action.B: eta_l / (1.0 - qh)}
    return {Action.L: eta_l, Action.B: eta_h / (1.0 - ql)}


def threshold_bounds(s: Scenario, structure: PolicyStructure | None = None) -> ThresholdBounds:
    actual = classify_structure(s)
    if structure is None:
        structure = actual
    structure = PolicyStructure(structure)
    if structure is not actual:
        raise StructureMismatchError(
            f"structure {structure.value} does not match the scenario's structure {actual.value}"
        )
    scale = (1.0 - s.beta) / s.beta
    ratios = _crossover_ratios(s, structure)
    bounds = {a: strict_ceil(math.sqrt(scale * ratios[a])) for a in structure.recruit_order}
    return ThresholdBounds(structure, bounds)


def reduced_feasible_set(bounds: ThresholdBounds, structure: PolicyStructure, delta: int) -> frozenset[Action]:
    """Actions that can still be optimal at AoI ``delta`` given the threshold bounds."""
    if delta < 1:
        raise ValueError(f"AoI must be >= 1, got {delta}")
    structure = PolicyStructure(structure)
    if bounds.structure is not structure:
        raise StructureMismatchError(
            f"bounds were computed for {bounds.structure.value}, not {structure.value}"
        )
    order = structure.order
    start = 0
    for i, a in enumerate(structure.recruit_order):
        if delta >= bounds[a]:
            start = i + 1
    return frozenset(order[start:])


def feasible_mask(bounds: ThresholdBounds, m: int) -> np.ndarray:
    """``(m, 4)`` boolean table of :func:`reduced_feasible_set` for delta = 1..m."""
    mask = np.zeros((m, 4), dtype=bool)
    d = np.arange(1, m + 1)
    order = bounds.structure.order
    # action order[i] stays feasible until the bound of order[i] itself is reached
    for i, a in enumerate(order):
        if a is Action.B:
            mask[:, a] = True
        else:
            mask[:, a] = d < bounds[order[i + 1]]
    return mask


# --- threshold policies ----------------------------------------------------

@dataclass(frozen=True)
class ThresholdPolicy:
    """Escalating stationary policy: N below the first threshold, then each
    listed action from its threshold onwards.

    ``thresholds`` maps recruiting actions to the first AoI at which they are
    taken.  Actions that are never taken are simply absent.  An empty mapping
    is the never-recruit policy.
    """

    structure: PolicyStructure
    thresholds: Mapping[Action, int]

    def __post_init__(self):
        object.__setattr__(self, "structure", PolicyStructure(self.structure))
        order = self.structure.recruit_order
        clean = {}
        for a, t in self.thresholds.items():
            a = Action[a] if isinstance(a, str) else Action(a)
            if a not in order:
                raise ValueError(f"action {a.name} is not part of structure {self.structure.value}")
            if int(t) != t or t < 1:
                raise ValueError(f"threshold for {a.name} must be a positive integer, got {t}")
            clean[a] = int(t)
        ordered = {a: clean[a] for a in order if a in clean}
        values = list(ordered.values())
        if any(x > y for x, y in zip(values, values[1:])):
            raise ValueError(f"thresholds must be nondecreasing along {self.structure.value}: {ordered}")
        object.__setattr__(self, "thresholds", ordered)

    def action_at(self, delta: int) -> Action:
        act = Action.N
        for a, t in self.thresholds.items():
            if delta >= t:
                act = a
        return act

    @property
    def last_threshold(self) -> int:
        return max(self.thresholds.values(), default=1)

    @property
    def tail_action(self) -> Action:
        """Action taken at every AoI from :attr:`last_threshold` on."""
        return self.action_at(self.last_threshold)

    def action_table(self, n: int) -> np.ndarray:
        """Actions for delta = 1..n as an int array."""
        table = np.zeros(n, dtype=np.int64)
        d = np.arange(1, n + 1)
        for a, t in self.thresholds.items():
            table[d >= t] = int(a)
        return table

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "thresholds": {a.name: t for a, t in self.thresholds.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ThresholdPolicy":
        return cls(PolicyStructure(data["structure"]), dict(data["thresholds"]))


def zero_wait_policy(s: Scenario) -> ThresholdPolicy:
    """Recruit both types in every slot."""
    return ThresholdPolicy(classify_structure(s), {Action.B: 1})
