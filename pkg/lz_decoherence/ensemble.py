"""
Monte Carlo averaging of noisy pure-state trajectories.

Trajectory i draws its noise from derive_seed(master_seed, i). Trajectories are
grouped into batches by index, batches may run on any number of threads, and
the populations are reduced in trajectory order, so a fixed configuration gives
bit-identical results regardless of the thread count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import DEFAULT_BATCH_SIZE, DEFAULT_N_TRAJECTORIES, NORM_DRIFT_LIMIT
from .errors import DomainError, IntegrationError
from .model import NoiseSpec, SystemParams, TimeGrid
from .noise import generate_noise
from .propagator import (
    EvolutionResult,
    GridControl,
    evolve_lindblad,
    evolve_pure,
    ground_state,
    propagate_pure,
    time_grid,
)
from .seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleConfig:
    """
    Trajectory budget and seeding. With target_standard_error set, whole batches
    are added after the first n_trajectories until the target or
    max_trajectories is reached.
    """

    n_trajectories: int = DEFAULT_N_TRAJECTORIES
    master_seed: int = 0
    target_standard_error: Optional[float] = None
    max_trajectories: Optional[int] = None
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self) -> None:
        if self.n_trajectories < 1:
            raise DomainError(f"n_trajectories must be >= 1, got {self.n_trajectories}")
        if self.max_trajectories is not None and self.max_trajectories < self.n_trajectories:
            raise DomainError(
                f"max_trajectories ({self.max_trajectories}) must be >= n_trajectories "
                f"({self.n_trajectories})"
            )
        if self.target_standard_error is not None and not self.target_standard_error > 0:
            raise DomainError(
                f"target_standard_error must be > 0, got {self.target_standard_error}"
            )
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def cap(self) -> int:
        return self.max_trajectories or self.n_trajectories


@dataclass
class EnsembleResult:
    success_probability: float
    standard_error: float
    n_used: int
    seeds: List[int] = field(default_factory=list)
    target_met: Optional[bool] = None

    def to_dict(self, include_seeds: bool = True) -> Dict[str, object]:
        out: Dict[str, object] = {
            "success_probability": self.success_probability,
            "standard_error": self.standard_error,
            "n_used": self.n_used,
        }
        if self.target_met is not None:
            out["target_met"] = self.target_met
        if include_seeds:
            out["seeds"] = list(self.seeds)
        return out


@dataclass(frozen=True)
class CurvePoint:
    v: float
    delta2_over_v: float
    p_success: float
    std_err: float
    n: int


def _run_batch(
    system: SystemParams,
    noise: NoiseSpec,
    grid: TimeGrid,
    seeds: Sequence[int],
    control: GridControl,
) -> np.ndarray:
    """
    Final adiabatic ground populations of one batch of trajectories.
    """
    xi = np.stack(
        [generate_noise(replace(noise, master_seed=seed), grid).values for seed in seeds]
    )
    initial = np.tile(ground_state(system, grid.t_start).as_array(), (len(seeds), 1))
    states, drift, _ = propagate_pure(system, grid, initial, xi, control.chunk_steps)

    failed = np.flatnonzero(drift > NORM_DRIFT_LIMIT)
    if len(failed) > 0:
        index = int(failed[0])
        raise IntegrationError(
            f"norm drift {drift[index]:.3g} exceeds {NORM_DRIFT_LIMIT:g}", seed=seeds[index]
        )
    final_ground = ground_state(system, grid.t_end).as_array()
    populations = np.abs(states @ final_ground.conj()) ** 2
    return np.clip(populations, 0.0, 1.0)


def _batches(start: int, stop: int, batch_size: int) -> List[range]:
    return [range(i, min(i + batch_size, stop)) for i in range(start, stop, batch_size)]


def _standard_error(populations: np.ndarray) -> float:
    if len(populations) < 2:
        return 0.0
    return float(np.std(populations, ddof=1) / math.sqrt(len(populations)))


def run_ensemble(
    system: SystemParams,
    noise: NoiseSpec,
    config: Optional[EnsembleConfig] = None,
    control: Optional[GridControl] = None,
    threads: int = 1,
) -> EnsembleResult:
    """
    Average evolve_pure() over independent noise realizations.

    :param system: The system parameters.
    :param noise: The noise specification; its master_seed is replaced per trajectory.
    :param config: Trajectory budget and master seed.
    :param control: Step-control settings.
    :param threads: Worker threads; affects speed only.
    :return: The ensemble result.
    """
    config = config or EnsembleConfig()
    control = control or GridControl()
    grid = time_grid(system, noise, control)

    if noise.is_silent:
        single = evolve_pure(system, None, control, grid)
        seeds = [derive_seed(config.master_seed, i) for i in range(config.n_trajectories)]
        return EnsembleResult(
            success_probability=single.ground_state_population,
            standard_error=0.0,
            n_used=config.n_trajectories,
            seeds=seeds,
            target_met=True if config.target_standard_error is not None else None,
        )

    logger.info(
        "running %d trajectories on %d steps (%d threads)",
        config.n_trajectories,
        grid.n_steps,
        threads,
    )
    chunks: List[np.ndarray] = []
    seeds: List[int] = []

    def run(indices: range) -> np.ndarray:
        batch_seeds = [derive_seed(config.master_seed, i) for i in indices]
        return _run_batch(system, noise, grid, batch_seeds, control)

    def extend(indices: Iterable[range]) -> None:
        batches = list(indices)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, batches))
        else:
            results = [run(batch) for batch in batches]
        for batch, populations in zip(batches, results):
            seeds.extend(derive_seed(config.master_seed, i) for i in batch)
            chunks.append(populations)

    extend(_batches(0, config.n_trajectories, config.batch_size))
    populations = np.concatenate(chunks)
    standard_error = _standard_error(populations)

    target_met = None
    if config.target_standard_error is not None:
        while standard_error > config.target_standard_error and len(populations) < config.cap:
            start = len(populations)
            stop = min(start + config.batch_size, config.cap)
            extend(_batches(start, stop, config.batch_size))
            populations = np.concatenate(chunks)
            standard_error = _standard_error(populations)
            logger.debug("adaptive stop: n=%d, standard error %.3g", stop, standard_error)
        target_met = standard_error <= config.target_standard_error

    return EnsembleResult(
        success_probability=float(np.mean(populations)),
        standard_error=standard_error,
        n_used=len(populations),
        seeds=seeds,
        target_met=target_met,
    )


def success_curve(
    system_template: SystemParams,
    noise: NoiseSpec,
    v_grid: Sequence[float],
    config: Optional[EnsembleConfig] = None,
    control: Optional[GridControl] = None,
    threads: int = 1,
) -> List[Tuple[float, EnsembleResult]]:
    """
    One ensemble per sweep rate: success probability versus v.

    :param system_template: System whose delta is used; the window is rechosen per v.
    :param noise: The noise specification.
    :param v_grid: Strictly positive sweep rates.
    :param config: Ensemble settings, shared by every point.
    :param control: Step-control settings.
    :param threads: Worker threads per ensemble.
    :return: (v, result) pairs in grid order.
    """
    _check_v_grid(v_grid)
    return [
        (v, run_ensemble(system_template.with_sweep_rate(v), noise, config, control, threads))
        for v in v_grid
    ]


def lindblad_curve(
    system_template: SystemParams,
    gamma: float,
    v_grid: Sequence[float],
    control: Optional[GridControl] = None,
) -> List[Tuple[float, EvolutionResult]]:
    """Success probability versus v from the Lindblad dephasing model."""
    _check_v_grid(v_grid)
    return [
        (v, evolve_lindblad(system_template.with_sweep_rate(v), gamma, control))
        for v in v_grid
    ]


def _check_v_grid(v_grid: Sequence[float]) -> None:
    if len(v_grid) == 0:
        raise DomainError("sweep-rate grid is empty")
    for v in v_grid:
        if not v > 0:
            raise DomainError(f"sweep rates must be > 0, got {v}")


def curve_points(
    delta: float,
    results: Sequence[Tuple[float, Union[EnsembleResult, EvolutionResult]]],
) -> List[CurvePoint]:
    """
    Flatten curve results from either back end into plotting rows. Lindblad
    points carry a zero error and n = 1.

    :param delta: The gap, for the delta^2 / v abscissa.
    :param results: Output of success_curve() or lindblad_curve().
    :return: The curve points.
    """
    points = []
    for v, result in results:
        if isinstance(result, EnsembleResult):
            p, err, n = result.success_probability, result.standard_error, result.n_used
        else:
            p, err, n = result.ground_state_population, 0.0, 1
        points.append(CurvePoint(v, delta**2 / v, p, err, n))
    return points


def curve_rows(points: Sequence[CurvePoint]) -> Tuple[List[str], List[Tuple]]:
    header = ["v", "delta2_over_v", "p_success", "std_err", "n"]
    return header, [(p.v, p.delta2_over_v, p.p_success, p.std_err, p.n) for p in points]
