"""
Classical noise traces xi(t) with RMS amplitude A and correlation time tau.

Both realizations share the autocorrelation A^2 exp(-|s|/tau): a Gaussian
Ornstein-Uhlenbeck process and a bounded random telegraph process. Traces are
sampled on the integrator grid; the propagator holds each sample constant over
its step.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from .constants import MIN_AUTOCORR_SAMPLES, NoiseModel
from .errors import DomainError
from .model import NoiseSpec, TimeGrid
from .seeding import derive_seed, get_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NoiseTrace:
    times: np.ndarray
    values: np.ndarray
    spec: NoiseSpec

    def __post_init__(self) -> None:
        if len(self.times) < 2 or len(self.times) != len(self.values):
            raise DomainError(
                f"a trace needs >= 2 samples on matching grids, got "
                f"{len(self.times)} times and {len(self.values)} values"
            )
        steps = np.diff(self.times)
        if not np.all(steps > 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise DomainError("trace times must be strictly increasing with a uniform step")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("trace values must be finite")
        self.times.flags.writeable = False
        self.values.flags.writeable = False

    @property
    def dt(self) -> float:
        return (self.times[-1] - self.times[0]) / (len(self.times) - 1)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TraceStats:
    mean: float
    rms: float
    autocorr_time: Optional[float]


def _check_grid(grid: TimeGrid) -> float:
    dt = grid.dt
    if not dt > 0:
        raise DomainError(f"noise grid step must be > 0, got {dt}")
    return dt


def _constant_trace(spec: NoiseSpec, grid: TimeGrid) -> NoiseTrace:
    times = grid.times
    return NoiseTrace(times, np.full(len(times), float(spec.mean_offset)), spec)


def generate_ou(spec: NoiseSpec, grid: TimeGrid) -> NoiseTrace:
    """
    Stationary Ornstein-Uhlenbeck trace from the exact discretization
    x[k+1] = x[k] exp(-dt/tau) + A sqrt(1 - exp(-2dt/tau)) eta[k],
    with x[0] drawn from the stationary distribution. The statistics do not
    depend on the grid step.

    :param spec: Noise spec with model ornstein_uhlenbeck; amplitude is A.
    :param grid: The sampling grid.
    :return: The trace, mean_offset + x.
    """
    if spec.model != NoiseModel.ornstein_uhlenbeck:
        raise DomainError(f"generate_ou needs an ornstein_uhlenbeck spec, got {spec.model.value}")
    dt = _check_grid(grid)
    times = grid.times
    rng = get_rng(spec.master_seed)
    eta = rng.standard_normal(len(times))

    decay = math.exp(-dt / spec.tau)
    kick = spec.amplitude * math.sqrt(-math.expm1(-2.0 * dt / spec.tau))
    x0 = spec.amplitude * eta[0]
    # AR(1) recursion as a first-order IIR filter seeded with the stationary draw
    tail, _ = signal.lfilter([kick], [1.0, -decay], eta[1:], zi=[decay * x0])
    values = spec.mean_offset + np.concatenate(([x0], tail))
    return NoiseTrace(times, values, spec)


def generate_telegraph(spec: NoiseSpec, grid: TimeGrid) -> NoiseTrace:
    """
    Random telegraph trace taking the values mean_offset +/- A. The sign flips
    as a Poisson process with rate 1/(2 tau); per step the sign differs with the
    exact probability (1 - exp(-dt/tau)) / 2.

    :param spec: Noise spec with model telegraph; amplitude is A.
    :param grid: The sampling grid.
    :return: The trace.
    """
    if spec.model != NoiseModel.telegraph:
        raise DomainError(f"generate_telegraph needs a telegraph spec, got {spec.model.value}")
    dt = _check_grid(grid)
    times = grid.times
    rng = get_rng(spec.master_seed)
    initial = 1.0 if rng.random() < 0.5 else -1.0
    flip_probability = -0.5 * math.expm1(-dt / spec.tau)
    flips = rng.random(len(times) - 1) < flip_probability
    parity = np.concatenate(([0], np.cumsum(flips) % 2))
    values = spec.mean_offset + spec.amplitude * initial * (1.0 - 2.0 * parity)
    return NoiseTrace(times, values, spec)


_GENERATORS = {
    NoiseModel.ornstein_uhlenbeck: generate_ou,
    NoiseModel.telegraph: generate_telegraph,
}


def generate_multichannel(
    spec: NoiseSpec, per_channel_amplitude: float, grid: TimeGrid
) -> NoiseTrace:
    """
    Pointwise sum of spec.channels independent traces of amplitude delta each.
    Channel c draws from seed derive_seed(spec.master_seed, c), so the sum has
    RMS sqrt(M) * delta for independent channels.

    :param spec: Noise spec; channels is M and model picks the per-channel process.
    :param per_channel_amplitude: The per-channel amplitude delta.
    :param grid: The sampling grid.
    :return: The aggregate trace, tagged with spec.
    """
    if spec.channels < 1:
        raise DomainError(f"channel count must be >= 1, got {spec.channels}")
    if spec.model == NoiseModel.none:
        return _constant_trace(spec, grid)
    generator = _GENERATORS[spec.model]
    total = np.zeros(grid.n_points)
    for channel in range(spec.channels):
        channel_spec = replace(
            spec,
            amplitude=per_channel_amplitude,
            mean_offset=0.0,
            channels=1,
            master_seed=derive_seed(spec.master_seed, channel),
        )
        total += generator(channel_spec, grid).values
    return NoiseTrace(grid.times, spec.mean_offset + total, spec)


def generate_noise(spec: NoiseSpec, grid: TimeGrid) -> NoiseTrace:
    """
    Generate the trace a spec describes, dispatching on model and channel count.

    :param spec: The noise specification.
    :param grid: The sampling grid.
    :return: The trace.
    """
    if spec.is_silent:
        return _constant_trace(spec, grid)
    if spec.channels > 1:
        return generate_multichannel(spec, spec.amplitude, grid)
    return _GENERATORS[spec.model](spec, grid)


def _autocorrelation(centered: np.ndarray) -> np.ndarray:
    n = len(centered)
    acf = signal.correlate(centered, centered, mode="full", method="fft")[n - 1 :]
    return acf / acf[0]


def trace_stats(trace: NoiseTrace) -> TraceStats:
    """
    Empirical mean, RMS about the mean and 1/e autocorrelation time.

    The autocorrelation time is linearly interpolated between lags, so a trace
    that decorrelates within one step reports a value below dt. It is None when
    the trace is shorter than 100 samples, constant, or never decorrelates
    within half its length.

    :param trace: The trace.
    :return: The statistics.
    """
    values = np.asarray(trace.values, dtype=float)
    mean = float(np.mean(values))
    centered = values - mean
    rms = float(np.sqrt(np.mean(centered**2)))

    autocorr_time = None
    if len(values) >= MIN_AUTOCORR_SAMPLES and rms > 0.0:
        acf = _autocorrelation(centered)[: len(values) // 2]
        below = np.flatnonzero(acf < math.exp(-1.0))
        if len(below) > 0:
            k = int(below[0])
            fraction = (acf[k - 1] - math.exp(-1.0)) / (acf[k - 1] - acf[k])
            autocorr_time = float(trace.dt * (k - 1 + fraction))
        else:
            logger.debug("trace never decorrelates within half its length")
    return TraceStats(mean=mean, rms=rms, autocorr_time=autocorr_time)


def noise_power_spectrum(
    trace: NoiseTrace, segment_length: int = 2**14
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Welch estimate of the two-sided power spectrum in angular frequency,
    normalized so the integral of S(omega) d omega / 2 pi is the variance. An OU
    trace has the Lorentzian 2 A^2 tau / (1 + omega^2 tau^2).

    :param trace: The trace.
    :param segment_length: Welch segment length, capped at the trace length.
    :return: (omega, psd) for omega >= 0.
    """
    values = np.asarray(trace.values, dtype=float)
    frequency, density = signal.welch(
        values - np.mean(values),
        fs=1.0 / trace.dt,
        nperseg=min(segment_length, len(values)),
        scaling="density",
    )
    return 2.0 * math.pi * frequency, 0.5 * density


def spectrum_knee(omega: np.ndarray, psd: np.ndarray, plateau_bins: int = 5) -> Optional[float]:
    """
    First angular frequency at which the spectrum falls below half its
    low-frequency plateau (mean of the lowest non-zero bins).

    :param omega: Angular frequencies from noise_power_spectrum().
    :param psd: Spectral densities from noise_power_spectrum().
    :param plateau_bins: Number of bins averaged into the plateau.
    :return: The knee, or None when the spectrum never rolls off.
    """
    plateau = float(np.mean(psd[1 : 1 + plateau_bins]))
    below = np.flatnonzero(psd[1:] < 0.5 * plateau)
    if len(below) == 0:
        return None
    return float(omega[1 + below[0]])


def write_trace_csv(trace: NoiseTrace, path: str) -> None:
    """
    Write a trace as CSV with a "t,xi" header and 17 significant digits.

    :param trace: The trace.
    :param path: Destination file.
    """
    np.savetxt(
        path,
        np.column_stack([trace.times, trace.values]),
        fmt="%.17g",
        delimiter=",",
        header="t,xi",
        comments="",
    )
