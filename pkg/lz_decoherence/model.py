"""
Domain types and closed-form estimators for Landau-Zener sweeps under noise.

Energies are in units with hbar = 1. The "~" relations of the analytic theory are
implemented as equalities with unit prefactors, so every estimator here is an
order-of-magnitude predictor: compare trends, not prefactors.
"""

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set

import numpy as np
from scipy.special import expit

from .constants import (
    DEFAULT_NEGLIGIBLE_THRESHOLD,
    HIGH_AMP_QUADRANTS,
    LOW_AMP_QUADRANTS,
    NoiseModel,
    RegimeQuadrant,
    ReportFlag,
)
from .errors import DomainError, RegimeMismatchError


@dataclass(frozen=True)
class SystemParams:
    """
    The driven two-level system H(t) = -(delta/2) sx - (v t/2) sz.
    t = 0 is the degeneracy point. Leave the window unset to let the propagator
    choose one from the step-control rules.
    """

    delta: float
    v: float
    t_start: Optional[float] = None
    t_end: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.delta >= 0:
            raise DomainError(f"delta must be >= 0, got {self.delta}")
        if not self.v > 0:
            raise DomainError(f"sweep rate v must be > 0, got {self.v}")
        if (self.t_start is None) != (self.t_end is None):
            raise DomainError("t_start and t_end must be given together")
        if self.t_start is not None and not self.t_start < 0 < self.t_end:
            raise DomainError(
                f"time window must satisfy t_start < 0 < t_end, got [{self.t_start}, {self.t_end}]"
            )

    @property
    def has_window(self) -> bool:
        return self.t_start is not None

    def with_sweep_rate(self, v: float) -> "SystemParams":
        """
        Copy of this system at another sweep rate. The window is dropped because
        it was chosen for the old rate.

        :param v: The new sweep rate.
        :return: A new SystemParams.
        """
        return replace(self, v=v, t_start=None, t_end=None)


@dataclass(frozen=True)
class NoiseSpec:
    """
    Classical noise xi(t) coupled through sz.

    amplitude is the RMS deviation about mean_offset of one channel. With
    channels = M > 1 the M independent channels add in quadrature, so the
    amplitude the system sees is total_amplitude = sqrt(M) * amplitude.
    """

    model: NoiseModel = NoiseModel.none
    amplitude: float = 0.0
    tau: float = 1.0
    mean_offset: float = 0.0
    channels: int = 1
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not self.amplitude >= 0:
            raise DomainError(f"noise amplitude must be >= 0, got {self.amplitude}")
        if not self.tau > 0:
            raise DomainError(f"correlation time tau must be > 0, got {self.tau}")
        if self.channels < 1:
            raise DomainError(f"channel count must be >= 1, got {self.channels}")

    @classmethod
    def from_omega_max(cls, omega_max: float, **kwargs) -> "NoiseSpec":
        if not omega_max > 0:
            raise DomainError(f"omega_max must be > 0, got {omega_max}")
        return cls(tau=1.0 / omega_max, **kwargs)

    @property
    def omega_max(self) -> float:
        return 1.0 / self.tau

    @property
    def total_amplitude(self) -> float:
        return math.sqrt(self.channels) * self.amplitude

    @property
    def is_silent(self) -> bool:
        return self.model == NoiseModel.none or self.amplitude == 0.0


@dataclass(frozen=True)
class LindbladDephasing:
    """sz dephasing at rate gamma, the density-matrix alternative to classical noise."""

    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise DomainError(f"dephasing rate gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class ThermalParams:
    k_b_t: float

    def __post_init__(self) -> None:
        if not self.k_b_t > 0:
            raise DomainError(f"k_b_t must be > 0, got {self.k_b_t}")


@dataclass(frozen=True)
class TimeGrid:
    """
    A uniform time grid with n_steps intervals (n_steps + 1 points).
    """

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise DomainError(f"a time grid needs at least one step, got {self.n_steps}")
        if not self.t_end > self.t_start:
            raise DomainError(
                f"time grid must have t_end > t_start, got [{self.t_start}, {self.t_end}]"
            )

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)


@dataclass
class RegimeReport:
    """
    Analytic predictions for one noise quadrant. Fields that do not apply to the
    quadrant stay None and are left out of to_dict(); they are never zero-filled.
    """

    quadrant: RegimeQuadrant
    excitation_rate: Optional[float] = None
    v_optimal: Optional[float] = None
    p_failure: Optional[float] = None
    p_noise: Optional[float] = None
    photon_order: Optional[int] = None
    v_env: Optional[float] = None
    p_env_lz: Optional[float] = None
    environment_criterion: Optional[float] = None
    crossing_count: Optional[float] = None
    thermal_occupation: Optional[float] = None
    thermal_floor: Optional[float] = None
    n_min: Optional[int] = None
    flags: Set[ReportFlag] = field(default_factory=set)
    diagnostics: List[str] = field(default_factory=list)

    def clamp(self, name: str, value: float) -> float:
        """
        Clamp an estimator to [0, 1], flagging the report when it had to.

        :param name: Field name used in the diagnostic.
        :param value: The raw estimate.
        :return: The clamped probability.
        """
        clamped = min(max(value, 0.0), 1.0)
        if clamped != value:
            self.flags.add(ReportFlag.clamped)
            self.diagnostics.append(f"{name} clamped from {value:.6g} to {clamped:g}")
        return clamped

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"quadrant": self.quadrant.value}
        for name in (
            "excitation_rate",
            "v_optimal",
            "p_failure",
            "p_noise",
            "photon_order",
            "v_env",
            "p_env_lz",
            "environment_criterion",
            "crossing_count",
            "thermal_occupation",
            "thermal_floor",
            "n_min",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out["flags"] = sorted(flag.value for flag in self.flags)
        if self.diagnostics:
            out["diagnostics"] = list(self.diagnostics)
        return out


def int_below(x: float) -> int:
    """
    The highest integer strictly smaller than x, so int_below(3) == 2.

    :param x: A finite real number.
    :return: ceil(x) - 1
    """
    if not math.isfinite(x):
        raise DomainError(f"int_below needs a finite argument, got {x}")
    return math.ceil(x) - 1


def _check_sweep_rate(v: float) -> None:
    if not v > 0:
        raise DomainError(f"sweep rate v must be > 0, got {v}")


def _check_gap(delta: float) -> None:
    if not delta > 0:
        raise DomainError(f"gap delta must be > 0, got {delta}")


def lz_success_probability(delta: float, v: float) -> float:
    """
    Probability of ending in the new ground state after a noiseless sweep,
    1 - exp(-pi delta^2 / 2v).

    :param delta: The gap.
    :param v: The sweep rate, > 0.
    :return: The success probability.
    """
    _check_sweep_rate(v)
    return -math.expm1(-math.pi * delta**2 / (2.0 * v))


def lz_failure_probability(delta: float, v: float) -> float:
    _check_sweep_rate(v)
    return math.exp(-math.pi * delta**2 / (2.0 * v))


def strong_dephasing_success_probability(delta: float, v: float) -> float:
    """
    Success probability in the limit of infinitely strong dephasing,
    (1 - exp(-pi delta^2 / v)) / 2. Saturates at 0.5 for slow sweeps.

    :param delta: The gap.
    :param v: The sweep rate, > 0.
    :return: The success probability.
    """
    _check_sweep_rate(v)
    return -0.5 * math.expm1(-math.pi * delta**2 / v)


def classify_regime(noise: NoiseSpec, delta: float) -> RegimeQuadrant:
    """
    Place noise in one of the four (amplitude, correlation) quadrants.
    A = delta counts as high amplitude and omega_max = delta as long correlation.

    :param noise: The noise specification; its total amplitude is A.
    :param delta: The gap, > 0.
    :return: The quadrant.
    """
    _check_gap(delta)
    low_amplitude = noise.total_amplitude < delta
    short_correlation = noise.omega_max > delta
    if low_amplitude:
        if short_correlation:
            return RegimeQuadrant.low_amp_short_corr
        return RegimeQuadrant.low_amp_long_corr
    if short_correlation:
        return RegimeQuadrant.high_amp_short_corr
    return RegimeQuadrant.high_amp_long_corr


def photon_order(delta: float, omega_max: float) -> int:
    """Order of the multi-photon process needed to bridge the gap."""
    return int_below(delta / omega_max) + 1


# Low-amplitude, short-correlation estimators


def excitation_rate_short_corr(amplitude: float, omega_max: float) -> float:
    return amplitude**2 / omega_max


def v_optimal_short_corr(amplitude: float, omega_max: float, delta: float) -> float:
    return delta**2 / math.log(omega_max * delta / amplitude**2)


def p_failure_short_corr(amplitude: float, omega_max: float, delta: float) -> float:
    return amplitude**2 / (omega_max * delta)


# Low-amplitude, long-correlation estimators


def excitation_rate_long_corr(
    amplitude: float, omega_max: float, delta: float, n: int
) -> float:
    return (amplitude**2 / omega_max) * (amplitude / delta) ** (2 * n - 1)


def log_argument_long_corr(
    amplitude: float, omega_max: float, delta: float, n: int
) -> float:
    """
    ln(omega_max delta^2n / A^(2n+1)), evaluated in log space so large n cannot
    overflow. Infinite when A = 0.
    """
    if amplitude == 0.0:
        return math.inf
    return (
        math.log(omega_max)
        + 2 * n * math.log(delta)
        - (2 * n + 1) * math.log(amplitude)
    )


def v_optimal_long_corr(
    amplitude: float, omega_max: float, delta: float, n: int
) -> float:
    return delta**2 / log_argument_long_corr(amplitude, omega_max, delta, n)


def p_failure_long_corr(
    amplitude: float, omega_max: float, delta: float, n: int
) -> float:
    return (amplitude**2 / (omega_max * delta)) * (amplitude / delta) ** (2 * n - 1)


def excitation_rate(noise: NoiseSpec, delta: float) -> float:
    """
    Noise-induced ground-to-excited rate near the degeneracy point for
    low-amplitude noise.

    :param noise: Low-amplitude noise.
    :param delta: The gap.
    :return: The excitation rate.
    """
    quadrant = classify_regime(noise, delta)
    amplitude, omega_max = noise.total_amplitude, noise.omega_max
    if quadrant == RegimeQuadrant.low_amp_short_corr:
        return excitation_rate_short_corr(amplitude, omega_max)
    if quadrant == RegimeQuadrant.low_amp_long_corr:
        n = photon_order(delta, omega_max)
        return excitation_rate_long_corr(amplitude, omega_max, delta, n)
    raise RegimeMismatchError(
        f"no perturbative excitation rate for {quadrant.value} noise"
    )


def noise_excitation_probability(noise: NoiseSpec, delta: float, v: float) -> float:
    """
    Noise-induced excitation accumulated while crossing the degeneracy region,
    rate * delta / v, clamped to [0, 1].
    """
    _check_sweep_rate(v)
    return min(excitation_rate(noise, delta) * delta / v, 1.0)


def predicted_failure(noise: NoiseSpec, delta: float, v: float) -> float:
    """
    Total failure estimate: noise-induced plus bias-driven LZ excitation. Its
    minimum over v is the optimal sweep rate.

    :param noise: Low-amplitude noise.
    :param delta: The gap.
    :param v: The sweep rate.
    :return: The failure probability, clamped to [0, 1].
    """
    total = noise_excitation_probability(noise, delta, v) + lz_failure_probability(
        delta, v
    )
    return min(total, 1.0)


def _require_quadrant(
    noise: NoiseSpec, delta: float, allowed: tuple
) -> RegimeQuadrant:
    quadrant = classify_regime(noise, delta)
    if quadrant not in allowed:
        raise RegimeMismatchError(
            f"noise (A={noise.total_amplitude:g}, omega_max={noise.omega_max:g}) is "
            f"{quadrant.value} for delta={delta:g}, expected one of "
            f"{', '.join(q.value for q in allowed)}"
        )
    return quadrant


def _attach_v_optimal(report: RegimeReport, log_argument: float, delta: float) -> None:
    if math.isinf(log_argument):
        report.flags.add(ReportFlag.noiseless)
        report.diagnostics.append("noiseless: success increases monotonically as v -> 0")
    elif log_argument <= 0.0:
        report.flags.add(ReportFlag.log_argument_invalid)
        report.diagnostics.append(
            "v_optimal outside the formula's validity range (logarithm argument <= 1)"
        )
    elif log_argument <= 1.0:
        # estimate would be >= delta^2
        report.flags.add(ReportFlag.v_optimal_above_gap_scale)
        report.diagnostics.append(
            f"v_optimal outside the formula's validity range (logarithm argument <= e, "
            f"estimate {delta**2 / log_argument:.6g} >= delta^2)"
        )
    else:
        report.v_optimal = delta**2 / log_argument


def predict_low_amp_short_corr(
    noise: NoiseSpec, delta: float, v: Optional[float] = None
) -> RegimeReport:
    """
    Rate, optimal sweep and failure estimates for weak, fast noise.

    :param noise: Noise in the LowAmpShortCorr quadrant.
    :param delta: The gap.
    :param v: Optional sweep rate for the noise-induced excitation probability.
    :return: The regime report.
    """
    quadrant = _require_quadrant(noise, delta, (RegimeQuadrant.low_amp_short_corr,))
    amplitude, omega_max = noise.total_amplitude, noise.omega_max
    report = RegimeReport(quadrant=quadrant)
    report.excitation_rate = excitation_rate_short_corr(amplitude, omega_max)
    report.p_failure = report.clamp(
        "p_failure", p_failure_short_corr(amplitude, omega_max, delta)
    )
    if v is not None:
        _check_sweep_rate(v)
        report.p_noise = report.clamp("p_noise", report.excitation_rate * delta / v)

    log_argument = (
        math.inf
        if amplitude == 0.0
        else math.log(omega_max * delta / amplitude**2)
    )
    _attach_v_optimal(report, log_argument, delta)
    return report


def predict_low_amp_long_corr(
    noise: NoiseSpec, delta: float, v: Optional[float] = None
) -> RegimeReport:
    """
    Multi-photon estimates for weak, slow noise: n = Int(delta/omega_max) + 1
    noise quanta are needed to excite the system.

    :param noise: Noise in the LowAmpLongCorr quadrant.
    :param delta: The gap.
    :param v: Optional sweep rate for the noise-induced excitation probability.
    :return: The regime report.
    """
    quadrant = _require_quadrant(noise, delta, (RegimeQuadrant.low_amp_long_corr,))
    amplitude, omega_max = noise.total_amplitude, noise.omega_max
    n = photon_order(delta, omega_max)
    report = RegimeReport(quadrant=quadrant, photon_order=n)
    report.excitation_rate = excitation_rate_long_corr(amplitude, omega_max, delta, n)
    report.p_failure = report.clamp(
        "p_failure", p_failure_long_corr(amplitude, omega_max, delta, n)
    )
    if v is not None:
        _check_sweep_rate(v)
        report.p_noise = report.clamp("p_noise", report.excitation_rate * delta / v)
    _attach_v_optimal(
        report, log_argument_long_corr(amplitude, omega_max, delta, n), delta
    )
    return report


def environment_criterion(noise: NoiseSpec, delta: float) -> float:
    """pi delta^2 tau / 2A; environment-driven crossings are negligible when >> 1."""
    return math.pi * delta**2 * noise.tau / (2.0 * noise.total_amplitude)


def crossing_avoidance_rate(noise: NoiseSpec) -> float:
    """Sweep rate A / tau above which the noise drives no extra crossings."""
    return noise.total_amplitude / noise.tau


def predict_high_amp(
    noise: NoiseSpec,
    delta: float,
    v: Optional[float] = None,
    negligible_threshold: float = DEFAULT_NEGLIGIBLE_THRESHOLD,
) -> RegimeReport:
    """
    Environment-driven crossing estimates for noise larger than the gap.

    :param noise: Noise in a high-amplitude quadrant.
    :param delta: The gap.
    :param v: Optional sweep rate, needed for the crossing count.
    :param negligible_threshold: Strength of the ">> 1" in the negligibility criterion.
    :return: The regime report.
    """
    quadrant = _require_quadrant(noise, delta, HIGH_AMP_QUADRANTS)
    report = RegimeReport(quadrant=quadrant)
    criterion = environment_criterion(noise, delta)
    report.environment_criterion = criterion
    report.v_env = noise.total_amplitude * noise.omega_max
    report.p_env_lz = report.clamp("p_env_lz", math.exp(-criterion))
    if criterion > negligible_threshold:
        report.flags.add(ReportFlag.negligible_environment_effect)
    if crossing_avoidance_rate(noise) > delta**2:
        report.flags.add(ReportFlag.avoidance_needs_fast_sweep)

    if quadrant == RegimeQuadrant.high_amp_long_corr:
        report.p_failure = report.p_env_lz
    elif v is not None:
        report.p_failure = report.clamp(
            "p_failure", 1.0 - strong_dephasing_success_probability(delta, v)
        )
    else:
        report.p_failure = 0.5

    if v is not None:
        _check_sweep_rate(v)
        report.crossing_count = noise.total_amplitude / (v * noise.tau)
    return report


def thermal_occupation(delta: float, thermal: ThermalParams) -> float:
    """Equilibrium excited-state occupation 1 / (1 + exp(delta / k_B T))."""
    return float(expit(-delta / thermal.k_b_t))


def thermal_floor(delta: float, thermal: ThermalParams) -> float:
    """
    Success ceiling 1 / (1 + exp(-delta / k_B T)) reached by a sweep slow enough
    to equilibrate.
    """
    return float(expit(delta / thermal.k_b_t))


def n_min_thermal(delta: float, thermal: ThermalParams) -> int:
    """
    Lowest photon order reachable when omega_max cannot exceed k_B T, floored at 1.
    Saturates at sys.maxsize when delta / k_B T overflows.

    :param delta: The gap.
    :param thermal: The temperature.
    :return: max(1, Int(delta / k_B T))
    """
    ratio = delta / thermal.k_b_t
    if math.isinf(ratio):
        return sys.maxsize
    return max(1, min(int_below(ratio), sys.maxsize))


def predict(
    noise: NoiseSpec,
    delta: float,
    v: Optional[float] = None,
    thermal: Optional[ThermalParams] = None,
    negligible_threshold: float = DEFAULT_NEGLIGIBLE_THRESHOLD,
) -> RegimeReport:
    """
    Classify the noise and run the matching predictor, attaching the thermal
    floor when a temperature is given.

    :param noise: The noise specification.
    :param delta: The gap.
    :param v: Optional sweep rate.
    :param thermal: Optional temperature.
    :param negligible_threshold: Passed to predict_high_amp().
    :return: The regime report.
    """
    quadrant = classify_regime(noise, delta)
    if quadrant == RegimeQuadrant.low_amp_short_corr:
        report = predict_low_amp_short_corr(noise, delta, v)
    elif quadrant == RegimeQuadrant.low_amp_long_corr:
        report = predict_low_amp_long_corr(noise, delta, v)
    else:
        report = predict_high_amp(noise, delta, v, negligible_threshold)

    if thermal is not None:
        report.thermal_occupation = thermal_occupation(delta, thermal)
        report.thermal_floor = thermal_floor(delta, thermal)
        report.n_min = n_min_thermal(delta, thermal)
        if (
            quadrant in LOW_AMP_QUADRANTS
            and report.p_failure is not None
            and report.p_failure > report.thermal_occupation
        ):
            report.flags.add(ReportFlag.thermal_limited)
            report.diagnostics.append(
                "p_failure exceeds the equilibrium occupation: sweep slowly to thermal equilibrium"
            )
    return report
