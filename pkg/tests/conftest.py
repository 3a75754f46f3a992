import math

import numpy as np
import pytest

from aoirecruit.model import _ratios, threshold_bounds, validate_scenario

BASE = dict(beta=1e-4, p_L=0.5, c_L=2.0, r_L=0.6, p_H=0.5, c_H=2.5, r_H=0.7)
WEIGHTED = dict(beta=0.3, p_L=0.5, c_L=2.0, r_L=0.6, p_H=0.95, c_H=2.5, r_H=0.7)
BENCH = dict(WEIGHTED, beta=1e-4)

_ACCEPTANCE_LINES: list[str] = []


def random_scenario(rng, beta_range=(1e-3, 0.5), max_bound=None, margin=1e-9):
    """Draw a valid scenario, rejecting near-boundary ones and (optionally)
    ones whose B-threshold bound reaches ``max_bound``."""
    while True:
        p_l, p_h = rng.uniform(0.05, 0.95, 2)
        r_l, r_h = np.sort(rng.uniform(0.1, 1.0, 2))
        c_l, c_h = np.sort(rng.uniform(0.5, 5.0, 2))
        if r_l == r_h or c_l == c_h:
            continue
        lo, hi = np.log(beta_range[0]), np.log(beta_range[1])
        beta = float(np.exp(rng.uniform(lo, hi)))
        s = validate_scenario(beta, p_l, c_l, r_l, p_h, c_h, r_h)
        ql, qh, ratio, kappa = _ratios(s)
        if abs(ratio - kappa) < margin or abs(ratio - 1.0) < margin or abs(ql - qh) < margin:
            continue
        if max_bound is not None and threshold_bounds(s).last >= max_bound:
            continue
        return s


def random_scenarios(n, seed, **kw):
    rng = np.random.default_rng(seed)
    return [random_scenario(rng, **kw) for _ in range(n)]


@pytest.fixture
def base_scn():
    return validate_scenario(**BASE)


@pytest.fixture
def weighted_scn():
    return validate_scenario(**WEIGHTED)


@pytest.fixture
def acceptance_log():
    def log(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def isclose_rel(a, b, tol):
    return math.isclose(a, b, rel_tol=tol, abs_tol=0.0)
