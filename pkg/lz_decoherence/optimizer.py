"""
Numerical search for the sweep rate that maximizes the success probability.

A coarse log-spaced scan brackets the best point, then a golden-section search
on log v refines it inside the bracket. Every evaluation is kept in the report's
landscape for export.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .constants import (
    DEFAULT_COARSE_GRID_POINTS,
    DEFAULT_REFINE_ITERATIONS,
    FLAT_LANDSCAPE_TOLERANCE,
    LOW_AMP_QUADRANTS,
    RegimeQuadrant,
    ReportFlag,
)
from .ensemble import EnsembleConfig, run_ensemble
from .errors import DomainError
from .model import (
    LindbladDephasing,
    NoiseSpec,
    SystemParams,
    ThermalParams,
    predict,
    thermal_floor,
    thermal_occupation,
)
from .propagator import GridControl, evolve_lindblad
from .seeding import derive_seed

logger = logging.getLogger(__name__)

Decoherence = Union[NoiseSpec, LindbladDephasing]

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2

SLOW_SWEEP_RECOMMENDATION = "slow sweep to thermal equilibrium"


@dataclass(frozen=True)
class LandscapePoint:
    v: float
    p_success: float
    std_err: float


@dataclass(frozen=True)
class OptimizeConfig:
    """
    Search bounds and effort. ensemble is used for classical noise only; the
    Lindblad back end is deterministic.
    """

    v_min: float
    v_max: float
    coarse_grid_points: int = DEFAULT_COARSE_GRID_POINTS
    refine_iterations: int = DEFAULT_REFINE_ITERATIONS
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def __post_init__(self) -> None:
        if not 0 < self.v_min < self.v_max:
            raise DomainError(
                f"sweep-rate bounds must satisfy 0 < v_min < v_max, "
                f"got [{self.v_min}, {self.v_max}]"
            )
        if self.coarse_grid_points < 5:
            raise DomainError(
                f"coarse_grid_points must be >= 5, got {self.coarse_grid_points}"
            )
        if self.refine_iterations < 0:
            raise DomainError(f"refine_iterations must be >= 0, got {self.refine_iterations}")


@dataclass
class OptimumReport:
    v_opt_numeric: Optional[float] = None
    p_max_numeric: Optional[float] = None
    p_max_error: Optional[float] = None
    v_opt_analytic: Optional[float] = None
    ratio: Optional[float] = None
    p_failure_analytic: Optional[float] = None
    quadrant: Optional[RegimeQuadrant] = None
    environment_criterion: Optional[float] = None
    success_ceiling: Optional[float] = None
    recommendation: str = ""
    flags: Set[ReportFlag] = field(default_factory=set)
    landscape: List[LandscapePoint] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {}
        for name in (
            "v_opt_numeric",
            "p_max_numeric",
            "p_max_error",
            "v_opt_analytic",
            "ratio",
            "p_failure_analytic",
            "environment_criterion",
            "success_ceiling",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.quadrant is not None:
            out["quadrant"] = self.quadrant.value
        out["recommendation"] = self.recommendation
        out["flags"] = sorted(flag.value for flag in self.flags)
        out["landscape"] = [
            {"v": p.v, "p_success": p.p_success, "std_err": p.std_err} for p in self.landscape
        ]
        return out


class _Objective:
    """
    Success probability as a function of v, recording every evaluation. The
    k-th evaluation of an ensemble objective uses master seed
    derive_seed(ensemble.master_seed, k).
    """

    def __init__(
        self,
        system: SystemParams,
        decoherence: Decoherence,
        config: OptimizeConfig,
        control: Optional[GridControl],
        threads: int,
    ) -> None:
        self.system = system
        self.decoherence = decoherence
        self.config = config
        self.control = control
        self.threads = threads
        self.landscape: List[LandscapePoint] = []

    def __call__(self, v: float) -> LandscapePoint:
        system = self.system.with_sweep_rate(v)
        if isinstance(self.decoherence, LindbladDephasing):
            result = evolve_lindblad(system, self.decoherence.gamma, self.control)
            point = LandscapePoint(v, result.ground_state_population, 0.0)
        else:
            ensemble = self.config.ensemble
            ensemble = replace(
                ensemble, master_seed=derive_seed(ensemble.master_seed, len(self.landscape))
            )
            result = run_ensemble(system, self.decoherence, ensemble, self.control, self.threads)
            point = LandscapePoint(v, result.success_probability, result.standard_error)
        logger.debug("p_success(v=%.6g) = %.6g +/- %.2g", v, point.p_success, point.std_err)
        self.landscape.append(point)
        return point


def _is_noiseless(decoherence: Decoherence) -> bool:
    if isinstance(decoherence, LindbladDephasing):
        return decoherence.gamma == 0.0
    return decoherence.is_silent


def _separation(a: LandscapePoint, b: LandscapePoint) -> float:
    return max(math.hypot(a.std_err, b.std_err), FLAT_LANDSCAPE_TOLERANCE)


def _is_flat(points: List[LandscapePoint], best: LandscapePoint) -> bool:
    return all(best.p_success - p.p_success <= _separation(best, p) for p in points)


def _is_resolved(points: List[LandscapePoint], best: LandscapePoint) -> bool:
    """
    True when the nearest evaluated rate on each side of best is lower by more
    than one combined standard error.
    """
    distinct = [p for p in points if not math.isclose(p.v, best.v, rel_tol=1e-9)]
    below = [p for p in distinct if p.v < best.v]
    above = [p for p in distinct if p.v > best.v]
    neighbors = []
    if below:
        neighbors.append(max(below, key=lambda p: p.v))
    if above:
        neighbors.append(min(above, key=lambda p: p.v))
    return all(
        best.p_success - p.p_success > math.hypot(best.std_err, p.std_err) for p in neighbors
    )


def _is_unimodal(points: List[LandscapePoint]) -> bool:
    """
    True when the points, ordered by v, rise to their maximum and fall after it,
    allowing dips within one combined standard error.
    """
    ordered = sorted(points, key=lambda p: p.v)
    peak = max(range(len(ordered)), key=lambda i: ordered[i].p_success)
    for i in range(1, len(ordered)):
        previous, current = ordered[i - 1], ordered[i]
        step = current.p_success - previous.p_success
        if i <= peak and step < -_separation(previous, current):
            return False
        if i > peak and step > _separation(previous, current):
            return False
    return True


def golden_section_maximize(
    f: Callable[[float], float], lower: float, upper: float, iterations: int
) -> Tuple[float, float]:
    """
    Shrink [lower, upper] around the maximum of a unimodal f by the golden ratio
    per iteration.

    :param f: The function to maximize.
    :param lower: Left end of the bracket.
    :param upper: Right end of the bracket.
    :param iterations: Number of shrink steps after the first two evaluations.
    :return: The final bracket.
    """
    a, b = min(lower, upper), max(lower, upper)
    h = b - a
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(iterations):
        h = INV_PHI * h
        if yc > yd:
            b, d, yd = d, c, yc
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            d = a + INV_PHI * h
            yd = f(d)
    return (a, d) if yc > yd else (c, b)


def _attach_analytic(report: OptimumReport, decoherence: Decoherence, delta: float) -> None:
    if isinstance(decoherence, LindbladDephasing) or decoherence.is_silent:
        return
    prediction = predict(decoherence, delta)
    report.quadrant = prediction.quadrant
    report.p_failure_analytic = prediction.p_failure
    if prediction.quadrant in LOW_AMP_QUADRANTS:
        report.v_opt_analytic = prediction.v_optimal
    else:
        report.environment_criterion = prediction.environment_criterion


def _set_optimum(report: OptimumReport, point: LandscapePoint) -> None:
    report.v_opt_numeric = point.v
    report.p_max_numeric = point.p_success
    report.p_max_error = point.std_err
    if report.v_opt_analytic is not None:
        report.ratio = point.v / report.v_opt_analytic


def find_optimal_sweep(
    system_template: SystemParams,
    decoherence: Decoherence,
    config: OptimizeConfig,
    control: Optional[GridControl] = None,
    threads: int = 1,
) -> OptimumReport:
    """
    Find the sweep rate with the highest simulated success probability.

    Without decoherence the success probability only grows as v decreases, so
    v_min is reported with the monotone flag. A landscape that is flat within
    its error bars reports no optimum. A maximum on the scan boundary is not
    refined. Otherwise the bracket around the best coarse point is refined by
    golden-section search on log v, falling back to a dense scan of the bracket
    when the refined points are not unimodal. A refined optimum that does not
    beat its nearest neighbors by more than their combined standard error is
    kept but flagged resolution_limited.

    :param system_template: System whose delta is used; windows are chosen per v.
    :param decoherence: Classical noise (ensemble back end) or Lindblad dephasing.
    :param config: Bounds, effort and ensemble settings.
    :param control: Step-control settings.
    :param threads: Worker threads per ensemble.
    :return: The optimum report.
    """
    if not system_template.delta > 0:
        raise DomainError(f"optimization needs delta > 0, got {system_template.delta}")
    objective = _Objective(system_template, decoherence, config, control, threads)
    report = OptimumReport()
    _attach_analytic(report, decoherence, system_template.delta)

    if _is_noiseless(decoherence):
        _set_optimum(report, objective(config.v_min))
        report.flags.add(ReportFlag.monotone)
        report.recommendation = "no decoherence: sweep as slowly as the schedule allows"
        report.landscape = objective.landscape
        return report

    v_grid = np.geomspace(config.v_min, config.v_max, config.coarse_grid_points)
    coarse = [objective(float(v)) for v in v_grid]
    best = max(range(len(coarse)), key=lambda i: coarse[i].p_success)
    report.landscape = objective.landscape

    if _is_flat(coarse, coarse[best]):
        report.flags.add(ReportFlag.resolution_insufficient)
        report.recommendation = (
            "success landscape is flat within its error bars: "
            "increase n_trajectories or widen [v_min, v_max]"
        )
        return report

    if best in (0, len(coarse) - 1):
        _set_optimum(report, coarse[best])
        report.flags.add(ReportFlag.boundary_maximum)
        side = "lower" if best == 0 else "upper"
        report.recommendation = (
            f"maximum at the {side} bound v = {coarse[best].v:.6g}: widen [v_min, v_max]"
        )
        return report

    v_lower, v_upper = float(v_grid[best - 1]), float(v_grid[best + 1])
    logger.info("refining optimum in bracket [%.6g, %.6g]", v_lower, v_upper)
    golden_section_maximize(
        lambda log_v: objective(math.exp(log_v)).p_success,
        math.log(v_lower),
        math.log(v_upper),
        config.refine_iterations,
    )

    def in_bracket() -> List[LandscapePoint]:
        return [p for p in objective.landscape if v_lower <= p.v <= v_upper]

    if not _is_unimodal(in_bracket()):
        logger.info("bracket is not unimodal at the current error bars, scanning it densely")
        report.flags.add(ReportFlag.dense_fallback)
        for v in np.geomspace(v_lower, v_upper, config.coarse_grid_points)[1:-1]:
            objective(float(v))

    refined = in_bracket()
    optimum = max(refined, key=lambda p: p.p_success)
    _set_optimum(report, optimum)
    report.recommendation = f"sweep at v = {report.v_opt_numeric:.6g}"
    if not _is_resolved(refined, optimum):
        report.flags.add(ReportFlag.resolution_limited)
        report.recommendation += (
            " (not resolved from the neighboring rates: increase n_trajectories "
            "or reduce refine_iterations)"
        )
    return report


def apply_thermal_floor(
    report: OptimumReport, delta: float, thermal: ThermalParams
) -> OptimumReport:
    """
    Replace the recommendation by a slow sweep to thermal equilibrium when the
    failure probability exceeds the equilibrium excited-state occupation. The
    analytic failure estimate is used when the report has one, otherwise
    1 - p_max_numeric. When the occupation underflows to zero there is no
    thermal ceiling and the report is returned unchanged.

    :param report: The optimum report.
    :param delta: The gap.
    :param thermal: The temperature.
    :return: The report, or an updated copy when the floor applies.
    """
    if report.p_failure_analytic is not None:
        p_failure = report.p_failure_analytic
    elif report.p_max_numeric is not None:
        p_failure = 1.0 - report.p_max_numeric
    else:
        return report

    occupation = thermal_occupation(delta, thermal)
    if occupation == 0.0 or not p_failure > occupation:
        return report
    logger.info(
        "failure %.3g exceeds thermal occupation %.3g, applying the thermal floor",
        p_failure,
        occupation,
    )
    return replace(
        report,
        success_ceiling=thermal_floor(delta, thermal),
        recommendation=SLOW_SWEEP_RECOMMENDATION,
        flags=report.flags | {ReportFlag.thermal_floor_applied},
        landscape=list(report.landscape),
    )


def landscape_rows(report: OptimumReport) -> Tuple[List[str], List[Tuple[float, float, float]]]:
    """CSV header and rows of the scanned landscape, ordered by v."""
    points = sorted(report.landscape, key=lambda p: p.v)
    return ["v", "p_success", "std_err"], [(p.v, p.p_success, p.std_err) for p in points]
