"""Finite-difference verification of reverse-mode gradients."""

from collections.abc import Callable
from dataclasses import dataclass
import logging

import numpy as np

from .params import GradientSet, ParameterSet

log = logging.getLogger(__name__)

LossFn = Callable[[ParameterSet], tuple[float, GradientSet]]


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of a gradient check."""

    max_rel_err: float
    passed: bool
    checked: int


def _relative_error(numeric: float, analytic: float, floor: float) -> float:
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor)


def finite_diff_check(
    params: ParameterSet,
    loss_fn: LossFn,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_coords: int = 64,
    projections: int = 16,
    seed: int = 0,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare the analytic gradient with central differences.

    Small parameter sets are checked coordinate by coordinate; larger ones
    along `projections` random unit directions.
    """
    _, grads = loss_fn(params)
    base = params.values
    n = len(params)
    if n <= max_coords:
        directions = np.eye(n)
    else:
        rng = np.random.default_rng(seed)
        directions = rng.normal(size=(projections, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    worst = 0.0
    for direction in directions:
        plus, _ = loss_fn(params.replace(base + h * direction))
        minus, _ = loss_fn(params.replace(base - h * direction))
        numeric = (plus - minus) / (2.0 * h)
        analytic = float(grads.values @ direction)
        worst = max(worst, _relative_error(numeric, analytic, floor))
    report = GradCheckReport(worst, worst < tolerance, directions.shape[0])
    log.debug("Gradient check over %d directions: max rel err %.3g", report.checked, worst)
    return report
