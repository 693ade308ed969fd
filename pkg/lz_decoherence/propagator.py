"""
Time evolution of the driven two-level system.

The Hamiltonian is held constant over each step (bias at the step midpoint,
noise at the step start), and each step is propagated with its exact 2x2
exponential. Steps are composed chunk by chunk with a pairwise matrix product;
norm, trace and positivity are checked after every chunk.

The Lindblad solver works on the Bloch vector. Each step is a symmetric
(Strang) split of the exact unitary rotation and the exact sz dephasing map,
both of which preserve trace and positivity.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .constants import (
    DEFAULT_CHUNK_STEPS,
    DEFAULT_MAX_STEPS,
    DEFAULT_TAIL_TOLERANCE,
    EDGE_GAP_MULTIPLE,
    EDGE_NOISE_MULTIPLE,
    NOISE_STEP_FRACTION,
    NORM_DRIFT_LIMIT,
    PAULI_STACK,
    POSITIVITY_LIMIT,
    SIGMA_X,
    SIGMA_Z,
    STEP_PHASE_LIMIT,
)
from .errors import DegenerateBasisError, DomainError, IntegrationError, StepControlError
from .model import NoiseSpec, SystemParams, TimeGrid
from .noise import NoiseTrace

logger = logging.getLogger(__name__)

TimeSeriesRecord = Tuple[float, float, float, float]


@dataclass(frozen=True)
class GridControl:
    """
    Step-control settings shared by every propagation.

    tail_tolerance bounds the window-truncation error of the final population,
    max_steps caps the grid size and chunk_steps is the number of steps composed
    between norm checks.
    """

    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    max_steps: int = DEFAULT_MAX_STEPS
    chunk_steps: int = DEFAULT_CHUNK_STEPS

    def __post_init__(self) -> None:
        if not self.tail_tolerance > 0:
            raise DomainError(f"tail_tolerance must be > 0, got {self.tail_tolerance}")
        if self.max_steps < 1 or self.chunk_steps < 1:
            raise DomainError("max_steps and chunk_steps must be >= 1")


@dataclass(frozen=True)
class QuantumState:
    """Pure state in the diabatic {|up>, |down>} basis."""

    c_up: complex
    c_down: complex

    @classmethod
    def from_array(cls, amplitudes: np.ndarray) -> "QuantumState":
        return cls(complex(amplitudes[0]), complex(amplitudes[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.c_up, self.c_down], dtype=complex)

    @property
    def norm_squared(self) -> float:
        return abs(self.c_up) ** 2 + abs(self.c_down) ** 2


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    2x2 density matrix in the diabatic basis. Construction checks hermiticity,
    unit trace and positivity.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape != (2, 2):
            raise DomainError(f"density matrix must be 2x2, got shape {matrix.shape}")
        if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(matrix).real - 1.0) > NORM_DRIFT_LIMIT:
            raise DomainError(f"density matrix trace is {np.trace(matrix).real:.12g}, not 1")
        if np.min(np.linalg.eigvalsh(matrix)) < -POSITIVITY_LIMIT:
            raise DomainError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_bloch(cls, bloch: np.ndarray) -> "DensityMatrix":
        x, y, z = (float(c) for c in bloch)
        return cls(0.5 * np.array([[1.0 + z, x - 1j * y], [x + 1j * y, 1.0 - z]]))

    @classmethod
    def from_state(cls, state: QuantumState) -> "DensityMatrix":
        psi = state.as_array()
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(0.5 * np.eye(2, dtype=complex))

    @property
    def bloch_vector(self) -> np.ndarray:
        return np.real(np.einsum("iab,ba->i", PAULI_STACK, self.matrix))


@dataclass
class EvolutionResult:
    ground_state_population: float
    step_count: int
    max_norm_drift: float
    final_state: Optional[QuantumState] = None
    final_density: Optional[DensityMatrix] = None
    records: List[TimeSeriesRecord] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "ground_state_population": self.ground_state_population,
            "step_count": self.step_count,
            "max_norm_drift": self.max_norm_drift,
        }
        if self.final_state is not None:
            out["final_state"] = {
                "c_up": [self.final_state.c_up.real, self.final_state.c_up.imag],
                "c_down": [self.final_state.c_down.real, self.final_state.c_down.imag],
            }
        if self.final_density is not None:
            out["final_bloch_vector"] = [float(c) for c in self.final_density.bloch_vector]
        return out


def hamiltonian(system: SystemParams, t: float, xi: float = 0.0) -> np.ndarray:
    """
    H = -(delta/2) sx - ((v t + xi)/2) sz

    :param system: The system parameters.
    :param t: Time, 0 at the degeneracy point.
    :param xi: Noise value at t.
    :return: 2x2 Hermitian matrix.
    """
    return -0.5 * system.delta * SIGMA_X - 0.5 * (system.v * t + xi) * SIGMA_Z


def _ground_angle(system: SystemParams, t: float) -> float:
    bias = system.v * t
    if system.delta == 0.0 and bias == 0.0:
        raise DegenerateBasisError(f"adiabatic basis undefined at t={t}: zero gap and zero bias")
    return math.atan2(system.delta, bias)


def _ground_axis(system: SystemParams, t: float) -> Tuple[float, float]:
    theta = _ground_angle(system, t)
    return math.sin(theta), math.cos(theta)


def ground_state(system: SystemParams, t: float) -> QuantumState:
    """
    Instantaneous ground state of the noise-free Hamiltonian at t, with real
    non-negative amplitudes.

    :param system: The system parameters.
    :param t: The evaluation time.
    :return: The ground state.
    """
    theta = _ground_angle(system, t)
    return QuantumState(math.cos(0.5 * theta), math.sin(0.5 * theta))


def adiabatic_ground_population(
    state: Union[QuantumState, DensityMatrix], system: SystemParams, t: float
) -> float:
    """
    Population of the instantaneous ground state of H(t) with the noise left out
    of the measurement basis.

    :param state: A pure state or a density matrix.
    :param system: The system parameters.
    :param t: The evaluation time.
    :return: The population, in [0, 1].
    """
    if isinstance(state, DensityMatrix):
        sin_theta, cos_theta = _ground_axis(system, t)
        x, _, z = state.bloch_vector
        population = 0.5 * (1.0 + sin_theta * x + cos_theta * z)
    else:
        ground = ground_state(system, t)
        overlap = np.vdot(ground.as_array(), state.as_array())
        population = abs(overlap) ** 2
    return min(max(float(population), 0.0), 1.0)


def step_unitaries(delta: float, bias: np.ndarray, dt: float) -> np.ndarray:
    """
    Exact exp(-i H dt) for H = -(delta sx + bias sz)/2, elementwise over bias.

    :param delta: The gap.
    :param bias: Array of total biases (v t + xi), any shape.
    :param dt: The step.
    :return: Array of shape bias.shape + (2, 2).
    """
    bias = np.asarray(bias, dtype=float)
    splitting = np.hypot(delta, bias)
    phase = 0.5 * dt * splitting
    cos_phase = np.cos(phase)
    # sin(phase) / splitting, finite at zero splitting
    sin_over = 0.5 * dt * np.sinc(phase / np.pi)
    unitaries = np.empty(bias.shape + (2, 2), dtype=complex)
    unitaries[..., 0, 0] = cos_phase + 1j * sin_over * bias
    unitaries[..., 0, 1] = 1j * sin_over * delta
    unitaries[..., 1, 0] = 1j * sin_over * delta
    unitaries[..., 1, 1] = cos_phase - 1j * sin_over * bias
    return unitaries


def ordered_product(matrices: np.ndarray) -> np.ndarray:
    """
    Time-ordered product M[n-1] ... M[1] M[0] along axis -3, by pairwise
    reduction.

    :param matrices: Array of shape (..., n, d, d).
    :return: Array of shape (..., d, d).
    """
    while matrices.shape[-3] > 1:
        if matrices.shape[-3] % 2 == 1:
            identity = np.broadcast_to(
                np.eye(matrices.shape[-1], dtype=matrices.dtype),
                matrices.shape[:-3] + (1,) + matrices.shape[-2:],
            )
            matrices = np.concatenate([matrices, identity], axis=-3)
        matrices = matrices[..., 1::2, :, :] @ matrices[..., 0::2, :, :]
    return matrices[..., 0, :, :]


def _noise_extent(noise: Optional[NoiseSpec]) -> float:
    if noise is None or noise.is_silent:
        return 0.0
    return abs(noise.mean_offset) + EDGE_NOISE_MULTIPLE * noise.total_amplitude


def max_step(
    system: SystemParams,
    edge_time: float,
    noise: Optional[NoiseSpec] = None,
    gamma: float = 0.0,
) -> float:
    """
    Largest step allowed by step control: dt * max(|H|, gamma) <= 0.05 over the
    window, and dt <= tau / 10 when noise is present.

    :param system: The system parameters.
    :param edge_time: Largest |t| in the window.
    :param noise: Optional noise, widening |H| by its extent.
    :param gamma: Optional dephasing rate.
    :return: The step bound.
    """
    edge_bias = system.v * edge_time + _noise_extent(noise)
    norm = max(0.5 * math.hypot(system.delta, edge_bias), gamma)
    dt = STEP_PHASE_LIMIT / norm if norm > 0 else math.inf
    if noise is not None and not noise.is_silent:
        dt = min(dt, NOISE_STEP_FRACTION * noise.tau)
    return dt


def _grid_for_window(
    t_start: float, t_end: float, dt_max: float, max_steps: int
) -> TimeGrid:
    n_steps = max(1, math.ceil((t_end - t_start) / dt_max))
    if n_steps > max_steps:
        raise DomainError(
            f"window [{t_start:g}, {t_end:g}] needs {n_steps} steps, above the limit of "
            f"{max_steps}; use a coarser tail_tolerance or raise grid.max_steps"
        )
    return TimeGrid(t_start, t_end, n_steps)


def auto_time_window(
    system: SystemParams,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    noise: Optional[NoiseSpec] = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    gamma: float = 0.0,
) -> TimeGrid:
    """
    Symmetric window and step for a sweep.

    The edge bias is max(20 delta, 20 sqrt(v), (delta v / tail_tolerance)^(1/3)),
    widened by |mean_offset| + 5 A when noise is present. The cube-root term
    bounds the non-adiabatic tail of the measured population, ~ delta v / bias^3.
    The step follows max_step() at the edge.

    :param system: The system parameters; delta > 0.
    :param tail_tolerance: Allowed truncation error in the final population.
    :param noise: Optional noise.
    :param max_steps: Step budget.
    :param gamma: Optional dephasing rate for the Lindblad solver.
    :return: The grid.
    """
    if not system.delta > 0:
        raise DomainError(f"auto_time_window needs delta > 0, got {system.delta}")
    if not tail_tolerance > 0:
        raise DomainError(f"tail_tolerance must be > 0, got {tail_tolerance}")
    edge_bias = max(
        EDGE_GAP_MULTIPLE * system.delta,
        EDGE_GAP_MULTIPLE * math.sqrt(system.v),
        (system.delta * system.v / tail_tolerance) ** (1.0 / 3.0),
    ) + _noise_extent(noise)
    edge_time = edge_bias / system.v
    dt_max = max_step(system, edge_time, noise, gamma)
    grid = _grid_for_window(-edge_time, edge_time, dt_max, max_steps)
    logger.debug(
        "auto window +/-%.6g with %d steps (dt=%.3g)", edge_time, grid.n_steps, grid.dt
    )
    return grid


def time_grid(
    system: SystemParams,
    noise: Optional[NoiseSpec] = None,
    control: Optional[GridControl] = None,
    gamma: float = 0.0,
) -> TimeGrid:
    """
    The propagation grid: the system's own window when it has one, otherwise
    auto_time_window().
    """
    control = control or GridControl()
    if not system.has_window:
        return auto_time_window(
            system, control.tail_tolerance, noise, control.max_steps, gamma
        )
    edge_time = max(abs(system.t_start), abs(system.t_end))
    dt_max = max_step(system, edge_time, noise, gamma)
    return _grid_for_window(system.t_start, system.t_end, dt_max, control.max_steps)


def check_step_control(
    system: SystemParams,
    grid: TimeGrid,
    noise: Optional[NoiseSpec] = None,
    gamma: float = 0.0,
) -> None:
    """Raise StepControlError when the grid step is above max_step()."""
    edge_time = max(abs(grid.t_start), abs(grid.t_end))
    dt_max = max_step(system, edge_time, noise, gamma)
    if grid.dt > dt_max * (1.0 + 1e-9):
        raise StepControlError(f"step {grid.dt:.6g} violates step control", dt_max)


def _step_biases(system: SystemParams, grid: TimeGrid) -> np.ndarray:
    times = grid.times
    return system.v * 0.5 * (times[:-1] + times[1:])


def _safe_population(
    system: SystemParams, t: float, state: Union[QuantumState, DensityMatrix]
) -> float:
    try:
        return adiabatic_ground_population(state, system, t)
    except DegenerateBasisError:
        return math.nan


def propagate_pure(
    system: SystemParams,
    grid: TimeGrid,
    initial: np.ndarray,
    xi: Optional[np.ndarray] = None,
    chunk_steps: int = DEFAULT_CHUNK_STEPS,
    record: bool = False,
) -> Tuple[np.ndarray, np.ndarray, List[TimeSeriesRecord]]:
    """
    Propagate a batch of pure states over a grid.

    :param system: The system parameters.
    :param grid: The propagation grid.
    :param initial: Initial amplitudes, shape (batch, 2).
    :param xi: Optional noise samples on the grid, shape (batch, n_points).
    :param chunk_steps: Steps composed per chunk; norms are checked per chunk.
    :param record: Record (t, p_ground, p_excited, drift) of trajectory 0 after every chunk.
    :return: (final amplitudes, max norm drift per trajectory, records)
    """
    states = np.array(initial, dtype=complex)
    drift = np.zeros(states.shape[0])
    biases = _step_biases(system, grid)
    times = grid.times
    records: List[TimeSeriesRecord] = []

    for start in range(0, grid.n_steps, chunk_steps):
        stop = min(start + chunk_steps, grid.n_steps)
        bias = biases[start:stop]
        if xi is not None:
            bias = bias[np.newaxis, :] + xi[:, start:stop]
        propagator = ordered_product(step_unitaries(system.delta, bias, grid.dt))
        if propagator.ndim == 2:
            states = states @ propagator.T
        else:
            states = np.einsum("bij,bj->bi", propagator, states)
        chunk_drift = np.abs(np.sum(np.abs(states) ** 2, axis=1) - 1.0)
        drift = np.maximum(drift, chunk_drift)
        if record:
            state = QuantumState.from_array(states[0])
            p_ground = _safe_population(system, times[stop], state)
            records.append((float(times[stop]), p_ground, 1.0 - p_ground, float(chunk_drift[0])))
    return states, drift, records


def evolve_pure(
    system: SystemParams,
    trace: Optional[NoiseTrace] = None,
    control: Optional[GridControl] = None,
    grid: Optional[TimeGrid] = None,
    record_every: Optional[int] = None,
) -> EvolutionResult:
    """
    Schrodinger propagation from the instantaneous ground state at t_start,
    returning the adiabatic ground-state population at t_end.

    :param system: The system parameters.
    :param trace: Optional noise trace; its time grid becomes the propagation grid.
    :param control: Step-control settings.
    :param grid: Optional explicit grid (without a trace).
    :param record_every: When set, record a time-series point every this many steps.
    :return: The evolution result.
    """
    control = control or GridControl()
    noise = trace.spec if trace is not None else None
    if trace is not None:
        grid = TimeGrid(float(trace.times[0]), float(trace.times[-1]), len(trace) - 1)
    elif grid is None:
        grid = time_grid(system, None, control)
    check_step_control(system, grid, noise)

    initial = ground_state(system, grid.t_start).as_array()[np.newaxis, :]
    xi = None if trace is None else np.asarray(trace.values)[np.newaxis, :]
    states, drift, records = propagate_pure(
        system,
        grid,
        initial,
        xi,
        chunk_steps=record_every or control.chunk_steps,
        record=record_every is not None,
    )
    max_drift = float(drift[0])
    if max_drift > NORM_DRIFT_LIMIT:
        raise IntegrationError(f"norm drift {max_drift:.3g} exceeds {NORM_DRIFT_LIMIT:g}")

    final = QuantumState.from_array(states[0])
    return EvolutionResult(
        ground_state_population=adiabatic_ground_population(final, system, grid.t_end),
        step_count=grid.n_steps,
        max_norm_drift=max_drift,
        final_state=final,
        records=records,
    )


def dephasing_tail_exponent(system: SystemParams, gamma: float, t: float) -> float:
    """
    Decay exponent of the adiabatic polarization between |t| and infinity.

    Far from the crossing the polarization relaxes at the Lorentzian rate
    delta^2 gamma / (gamma^2 + (v t)^2); integrating it over the tail gives
    (delta^2 / v) atan(gamma / |v t|). Over the whole line the exponent is
    pi delta^2 / v, the strong-dephasing value.

    :param system: The system parameters.
    :param gamma: The dephasing rate, >= 0.
    :param t: The window edge.
    :return: The exponent, 0 without dephasing.
    """
    if gamma == 0.0:
        return 0.0
    return system.delta**2 / system.v * math.atan2(gamma, abs(system.v * t))


def _ground_axis_vector(system: SystemParams, t: float) -> np.ndarray:
    sin_theta, cos_theta = _ground_axis(system, t)
    return np.array([sin_theta, 0.0, cos_theta])


def bloch_rotations(unitaries: np.ndarray) -> np.ndarray:
    """
    SO(3) rotations R[i, j] = Tr(s_i U s_j U^dagger) / 2 of a stack of unitaries.

    :param unitaries: Array of shape (n, 2, 2).
    :return: Array of shape (n, 3, 3).
    """
    rotated = unitaries[:, np.newaxis] @ PAULI_STACK[np.newaxis] @ np.conj(
        np.swapaxes(unitaries, -1, -2)
    )[:, np.newaxis]
    return 0.5 * np.real(np.einsum("iab,njba->nij", PAULI_STACK, rotated))


def evolve_lindblad(
    system: SystemParams,
    gamma: float,
    control: Optional[GridControl] = None,
    grid: Optional[TimeGrid] = None,
    record_every: Optional[int] = None,
    initial: Optional[DensityMatrix] = None,
) -> EvolutionResult:
    """
    Propagate d rho/dt = -i[H, rho] + (gamma/2)(sz rho sz - rho). Diabatic
    coherences decay at rate gamma, so the eigenbasis dephasing rate far from
    the crossing is gamma as well.

    The window stands for the whole sweep. Dephasing keeps transferring
    population outside it, slowly but over a long time, so the polarization
    along the ground axis is scaled by exp(-dephasing_tail_exponent()) for the
    tail before t_start (default initial state only) and for the tail after
    t_end.

    :param system: The system parameters.
    :param gamma: The dephasing rate, >= 0.
    :param control: Step-control settings.
    :param grid: Optional explicit grid.
    :param record_every: When set, record a time-series point every this many steps.
    :param initial: Initial density matrix, default the ground state at t_start.
    :return: The evolution result.
    """
    if not gamma >= 0:
        raise DomainError(f"dephasing rate must be >= 0, got {gamma}")
    control = control or GridControl()
    if grid is None:
        grid = time_grid(system, None, control, gamma)
    check_step_control(system, grid, gamma=gamma)

    if initial is None:
        head = dephasing_tail_exponent(system, gamma, grid.t_start)
        bloch = math.exp(-head) * _ground_axis_vector(system, grid.t_start)
    else:
        bloch = initial.bloch_vector

    half_decay = math.exp(-0.5 * gamma * grid.dt)
    dephase = np.diag([half_decay, half_decay, 1.0])
    biases = _step_biases(system, grid)
    times = grid.times
    chunk_steps = record_every or control.chunk_steps
    max_drift = 0.0
    records: List[TimeSeriesRecord] = []

    for start in range(0, grid.n_steps, chunk_steps):
        stop = min(start + chunk_steps, grid.n_steps)
        rotations = bloch_rotations(step_unitaries(system.delta, biases[start:stop], grid.dt))
        bloch = ordered_product(dephase @ rotations @ dephase) @ bloch
        drift = max(float(np.linalg.norm(bloch)) - 1.0, 0.0)
        max_drift = max(max_drift, drift)
        if drift > POSITIVITY_LIMIT:
            raise IntegrationError(
                f"density matrix eigenvalue {-0.5 * drift:.3g} below -{POSITIVITY_LIMIT:g} "
                f"at t={times[stop]:g}"
            )
        if record_every is not None:
            p_ground = _safe_population(system, times[stop], DensityMatrix.from_bloch(bloch))
            records.append((float(times[stop]), p_ground, 1.0 - p_ground, drift))

    axis = _ground_axis_vector(system, grid.t_end)
    tail = dephasing_tail_exponent(system, gamma, grid.t_end)
    bloch = bloch + math.expm1(-tail) * float(axis @ bloch) * axis
    final = DensityMatrix.from_bloch(bloch)
    return EvolutionResult(
        ground_state_population=adiabatic_ground_population(final, system, grid.t_end),
        step_count=grid.n_steps,
        max_norm_drift=max_drift,
        final_density=final,
        records=records,
    )


def evolution_rows(result: EvolutionResult) -> Tuple[List[str], List[TimeSeriesRecord]]:
    """CSV header and rows of a recorded run."""
    return ["t", "p_ground", "p_excited", "norm_or_trace_drift"], list(result.records)
