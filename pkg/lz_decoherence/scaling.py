"""
Noise at crossings where M qubits change state together.

Independent per-qubit noise of amplitude delta adds in quadrature, so the
crossing sees an aggregate amplitude sqrt(M) delta. Larger M makes
environment-driven crossings more likely and shrinks the tolerable per-qubit
noise.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .constants import DEFAULT_SCALING_MARGIN, NoiseModel
from .ensemble import EnsembleConfig, run_ensemble
from .errors import DomainError
from .model import NoiseSpec, SystemParams
from .propagator import GridControl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingScenario:
    """
    An M-qubit crossing with gap delta and per-qubit noise of amplitude
    per_qubit_amplitude and correlation time tau. margin is the strength of the
    "much smaller than" in the tolerable-noise bound.
    """

    delta: float
    tau: float
    per_qubit_amplitude: float
    m_qubits: int = 1
    margin: float = DEFAULT_SCALING_MARGIN

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise DomainError(f"delta must be > 0, got {self.delta}")
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if not self.per_qubit_amplitude >= 0:
            raise DomainError(
                f"per_qubit_amplitude must be >= 0, got {self.per_qubit_amplitude}"
            )
        if self.m_qubits < 1:
            raise DomainError(f"m_qubits must be >= 1, got {self.m_qubits}")
        if not self.margin > 0:
            raise DomainError(f"margin must be > 0, got {self.margin}")

    def with_qubits(self, m_qubits: int) -> "ScalingScenario":
        return replace(self, m_qubits=m_qubits)


@dataclass(frozen=True)
class ScalingRow:
    m: int
    agg_amplitude: float
    p_excite: float
    delta_bound: float
    passed: bool


def aggregate_amplitude(delta_per_qubit: float, m: int) -> float:
    """
    Amplitude of the sum of m independent channels of amplitude delta_per_qubit.

    :param delta_per_qubit: The per-qubit amplitude.
    :param m: The number of qubits, >= 1.
    :return: sqrt(m) * delta_per_qubit
    """
    if m < 1:
        raise DomainError(f"qubit count must be >= 1, got {m}")
    return math.sqrt(m) * delta_per_qubit


def scaling_criterion_exponent(scenario: ScalingScenario) -> float:
    """pi delta^2 tau / (2 sqrt(M) delta_q); infinite for noiseless qubits."""
    amplitude = aggregate_amplitude(scenario.per_qubit_amplitude, scenario.m_qubits)
    if amplitude == 0.0:
        return math.inf
    return math.pi * scenario.delta**2 * scenario.tau / (2.0 * amplitude)


def m_qubit_excitation(scenario: ScalingScenario) -> float:
    """
    Probability that the aggregate noise drives the system through the crossing.
    This is an optimistic estimate: it counts a single environment-driven
    crossing at the typical noise sweep rate.

    :param scenario: The crossing.
    :return: exp(-pi delta^2 tau / (2 sqrt(M) delta_q))
    """
    return math.exp(-scaling_criterion_exponent(scenario))


def tolerable_noise_bound(
    delta: float, tau: float, m: int, margin: float = DEFAULT_SCALING_MARGIN
) -> float:
    """
    Largest per-qubit amplitude for which environment-driven crossings stay
    negligible, delta^2 tau / (sqrt(M) margin).

    :param delta: The gap.
    :param tau: The noise correlation time.
    :param m: The number of qubits.
    :param margin: Strength of the "much smaller than".
    :return: The amplitude bound.
    """
    if not margin > 0:
        raise DomainError(f"margin must be > 0, got {margin}")
    if m < 1:
        raise DomainError(f"qubit count must be >= 1, got {m}")
    return delta**2 * tau / (math.sqrt(m) * margin)


def scaling_table(base: ScalingScenario, m_values: Sequence[int]) -> List[ScalingRow]:
    """
    One row per qubit count, with pass meaning the per-qubit amplitude is within
    the tolerable bound.

    :param base: The scenario; its m_qubits is replaced per row.
    :param m_values: Qubit counts.
    :return: The table rows in input order.
    """
    if len(m_values) == 0:
        raise DomainError("m_values must not be empty")
    rows = []
    for m in m_values:
        scenario = base.with_qubits(m)
        bound = tolerable_noise_bound(base.delta, base.tau, m, base.margin)
        rows.append(
            ScalingRow(
                m=m,
                agg_amplitude=aggregate_amplitude(base.per_qubit_amplitude, m),
                p_excite=m_qubit_excitation(scenario),
                delta_bound=bound,
                passed=base.per_qubit_amplitude <= bound,
            )
        )
    return rows


def scaling_rows(rows: Sequence[ScalingRow]) -> Tuple[List[str], List[Tuple]]:
    header = ["m", "agg_amplitude", "p_excite", "delta_bound", "pass"]
    return header, [
        (r.m, r.agg_amplitude, r.p_excite, r.delta_bound, str(r.passed).lower()) for r in rows
    ]


def simulate_crossing_excitation(
    scenario: ScalingScenario,
    config: Optional[EnsembleConfig] = None,
    control: Optional[GridControl] = None,
    threads: int = 1,
) -> Tuple[float, float]:
    """
    Simulate one crossing traversed at the aggregate noise sweep rate
    sqrt(M) delta_q / tau, with M Ornstein-Uhlenbeck channels of amplitude
    delta_q acting on top of the sweep.

    :param scenario: The crossing; per_qubit_amplitude must be > 0.
    :param config: Ensemble settings.
    :param control: Step-control settings.
    :param threads: Worker threads.
    :return: (excitation probability, standard error)
    """
    amplitude = aggregate_amplitude(scenario.per_qubit_amplitude, scenario.m_qubits)
    if amplitude == 0.0:
        raise DomainError("crossing simulation needs per_qubit_amplitude > 0")
    system = SystemParams(delta=scenario.delta, v=amplitude / scenario.tau)
    noise = NoiseSpec(
        model=NoiseModel.ornstein_uhlenbeck,
        amplitude=scenario.per_qubit_amplitude,
        tau=scenario.tau,
        channels=scenario.m_qubits,
    )
    logger.info(
        "simulating M=%d crossing at v=%.6g with aggregate amplitude %.6g",
        scenario.m_qubits,
        system.v,
        amplitude,
    )
    result = run_ensemble(system, noise, config, control, threads)
    return 1.0 - result.success_probability, result.standard_error
