import copy
import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from lz_decoherence.constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_COARSE_GRID_POINTS,
    DEFAULT_N_TRAJECTORIES,
    DEFAULT_NEGLIGIBLE_THRESHOLD,
    DEFAULT_REFINE_ITERATIONS,
    DEFAULT_SCALING_MARGIN,
    NOISE_MODEL_ALIASES,
)
from lz_decoherence.ensemble import EnsembleConfig
from lz_decoherence.errors import ConfigError, DomainError
from lz_decoherence.model import LindbladDephasing, NoiseSpec, SystemParams, ThermalParams
from lz_decoherence.optimizer import OptimizeConfig
from lz_decoherence.propagator import GridControl
from lz_decoherence.scaling import ScalingScenario

Section = Dict[str, Any]

# the only unit conventions a config may declare
SUPPORTED_ENERGY_UNITS = ("delta", "absolute")


@dataclass
class RunConfig:
    """
    A resolved run configuration. document is the JSON document it was read
    from, with command-line overrides applied, and is echoed into every JSON
    output.
    """

    document: Section
    delta: Optional[float] = None
    v: Optional[float] = None
    window: Optional[Tuple[float, float]] = None
    noise: Optional[NoiseSpec] = None
    lindblad: Optional[LindbladDephasing] = None
    thermal: Optional[ThermalParams] = None
    grid: GridControl = field(default_factory=GridControl)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    curve_v: Optional[List[float]] = None
    optimize: Optional[OptimizeConfig] = None
    scaling: Optional[ScalingScenario] = None
    scaling_m_values: List[int] = field(default_factory=list)
    negligible_threshold: float = DEFAULT_NEGLIGIBLE_THRESHOLD

    def require_delta(self) -> float:
        if self.delta is None:
            raise ConfigError("system.delta", "missing required field")
        return self.delta

    def system(self, need_v: bool = True) -> SystemParams:
        """
        The system parameters. Commands that choose v themselves pass
        need_v=False and get a template whose v is replaced per point.

        :param need_v: Whether system.v must be present.
        :return: The system parameters.
        """
        delta = self.require_delta()
        if self.v is None:
            if need_v:
                raise ConfigError("system.v", "missing required field")
            return SystemParams(delta=delta, v=1.0)
        window = self.window or (None, None)
        with _field_errors("system"):
            return SystemParams(delta, self.v, window[0], window[1])

    @property
    def noise_or_silent(self) -> NoiseSpec:
        return self.noise or NoiseSpec()

    def decoherence(self) -> Union[NoiseSpec, LindbladDephasing]:
        return self.lindblad if self.lindblad is not None else self.noise_or_silent

    def with_seed(self, seed: int) -> "RunConfig":
        """
        Override every master seed, in the parsed objects and the echoed document.

        :param seed: The new master seed.
        :return: An updated copy.
        """
        document = copy.deepcopy(self.document)
        document.setdefault("ensemble", {})["master_seed"] = seed
        if "noise" in document:
            document["noise"]["master_seed"] = seed
        ensemble = replace(self.ensemble, master_seed=seed)
        return replace(
            self,
            document=document,
            ensemble=ensemble,
            noise=replace(self.noise, master_seed=seed) if self.noise is not None else None,
            optimize=replace(self.optimize, ensemble=ensemble) if self.optimize else None,
        )


@contextmanager
def _field_errors(path: str) -> Iterator[None]:
    """Re-raise domain errors from a config section as ConfigError naming it."""
    try:
        yield
    except DomainError as error:
        raise ConfigError(path, str(error)) from error


def _section(document: Section, name: str) -> Optional[Section]:
    section = document.get(name)
    if section is None:
        return None
    if not isinstance(section, dict):
        raise ConfigError(name, f"expected an object, got {type(section).__name__}")
    return section


def _typed(
    section: Section,
    key: str,
    path: str,
    kind: Callable[[Any], Any],
    required: bool = False,
    default: Any = None,
) -> Any:
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
    return kind(value)


def _number(section: Section, key: str, path: str, **kwargs) -> Optional[float]:
    return _typed(section, key, path, float, **kwargs)


def _integer(section: Section, key: str, path: str, **kwargs) -> Optional[int]:
    return _typed(section, key, path, int, **kwargs)


def _number_list(value: Any, path: str) -> List[float]:
    """
    A list of numbers, or a log-spaced range given as {min, max, points}.
    """
    if isinstance(value, dict):
        low = _number(value, "min", path, required=True)
        high = _number(value, "max", path, required=True)
        points = _integer(value, "points", path, required=True)
        if not 0 < low < high or points < 2:
            raise ConfigError(path, "range needs 0 < min < max and points >= 2")
        return [float(x) for x in np.geomspace(low, high, points)]
    if not isinstance(value, list) or len(value) == 0:
        raise ConfigError(path, "expected a non-empty list or a {min, max, points} range")
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not item > 0:
            raise ConfigError(path, f"entries must be positive numbers, got {item!r}")
    return [float(x) for x in value]


def _parse_units(document: Section) -> str:
    units = _section(document, "units") or {}
    hbar = units.get("hbar", 1)
    if hbar != 1:
        raise ConfigError("units.hbar", f"only hbar = 1 is supported, got {hbar!r}")
    energy_unit = units.get("energy_unit", "absolute")
    if energy_unit not in SUPPORTED_ENERGY_UNITS:
        raise ConfigError(
            "units.energy_unit",
            f"expected one of {', '.join(SUPPORTED_ENERGY_UNITS)}, got {energy_unit!r}",
        )
    return energy_unit


def _parse_system(config: RunConfig, document: Section, energy_unit: str) -> None:
    section = _section(document, "system") or {}
    delta = _number(section, "delta", "system")
    if energy_unit == "delta":
        if delta is not None and delta != 1.0:
            raise ConfigError("system.delta", "must be 1 when energy_unit is delta")
        delta = 1.0
    if delta is not None and not delta >= 0:
        raise ConfigError("system.delta", f"must be >= 0, got {delta}")
    config.delta = delta
    config.v = _number(section, "v", "system")
    t_start = _number(section, "t_start", "system")
    t_end = _number(section, "t_end", "system")
    if (t_start is None) != (t_end is None):
        raise ConfigError("system.t_start", "t_start and t_end must be given together")
    if t_start is not None:
        config.window = (t_start, t_end)


def _parse_noise(section: Section) -> NoiseSpec:
    name = section.get("model", "none")
    if name not in NOISE_MODEL_ALIASES:
        raise ConfigError(
            "noise.model", f"unknown model {name!r}, expected one of {sorted(NOISE_MODEL_ALIASES)}"
        )
    if "tau" in section and "omega_max" in section:
        raise ConfigError("noise.tau", "give tau or omega_max, not both")
    kwargs = dict(
        model=NOISE_MODEL_ALIASES[name],
        amplitude=_number(section, "amplitude", "noise", default=0.0),
        mean_offset=_number(section, "mean_offset", "noise", default=0.0),
        channels=_integer(section, "channels", "noise", default=1),
        master_seed=_integer(section, "master_seed", "noise", default=0),
    )
    with _field_errors("noise"):
        if "omega_max" in section:
            return NoiseSpec.from_omega_max(
                _number(section, "omega_max", "noise", required=True), **kwargs
            )
        return NoiseSpec(tau=_number(section, "tau", "noise", default=1.0), **kwargs)


def _parse_ensemble(section: Section) -> EnsembleConfig:
    with _field_errors("ensemble"):
        return EnsembleConfig(
            n_trajectories=_integer(
                section, "n_trajectories", "ensemble", default=DEFAULT_N_TRAJECTORIES
            ),
            master_seed=_integer(section, "master_seed", "ensemble", default=0),
            target_standard_error=_number(section, "target_standard_error", "ensemble"),
            max_trajectories=_integer(section, "max_trajectories", "ensemble"),
            batch_size=_integer(section, "batch_size", "ensemble", default=DEFAULT_BATCH_SIZE),
        )


def _parse_grid(section: Section) -> GridControl:
    defaults = GridControl()
    with _field_errors("grid"):
        return GridControl(
            tail_tolerance=_number(
                section, "tail_tolerance", "grid", default=defaults.tail_tolerance
            ),
            max_steps=_integer(section, "max_steps", "grid", default=defaults.max_steps),
            chunk_steps=_integer(section, "chunk_steps", "grid", default=defaults.chunk_steps),
        )


def _parse_curve(config: RunConfig, section: Section) -> None:
    if ("v" in section) == ("delta2_over_v" in section):
        raise ConfigError("curve", "give exactly one of v and delta2_over_v")
    if "v" in section:
        config.curve_v = _number_list(section["v"], "curve.v")
        return
    ratios = _number_list(section["delta2_over_v"], "curve.delta2_over_v")
    delta = config.require_delta()
    config.curve_v = [delta**2 / ratio for ratio in ratios]


def _parse_optimize(section: Section, ensemble: EnsembleConfig) -> OptimizeConfig:
    with _field_errors("optimize"):
        return OptimizeConfig(
            v_min=_number(section, "v_min", "optimize", required=True),
            v_max=_number(section, "v_max", "optimize", required=True),
            coarse_grid_points=_integer(
                section, "coarse_grid_points", "optimize", default=DEFAULT_COARSE_GRID_POINTS
            ),
            refine_iterations=_integer(
                section, "refine_iterations", "optimize", default=DEFAULT_REFINE_ITERATIONS
            ),
            ensemble=ensemble,
        )


def _parse_scaling(config: RunConfig, section: Section) -> None:
    m_values = section.get("m_values", [1])
    if not isinstance(m_values, list) or len(m_values) == 0:
        raise ConfigError("scaling.m_values", "expected a non-empty list of qubit counts")
    for m in m_values:
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            raise ConfigError("scaling.m_values", f"qubit counts must be integers >= 1, got {m!r}")
    delta = _number(section, "delta", "scaling", default=config.delta)
    if delta is None:
        raise ConfigError("scaling.delta", "missing required field")
    with _field_errors("scaling"):
        config.scaling = ScalingScenario(
            delta=delta,
            tau=_number(section, "tau", "scaling", required=True),
            per_qubit_amplitude=_number(section, "per_qubit_amplitude", "scaling", required=True),
            m_qubits=m_values[0],
            margin=_number(section, "margin", "scaling", default=DEFAULT_SCALING_MARGIN),
        )
    config.scaling_m_values = list(m_values)


def parse_run_config(document: Section) -> RunConfig:
    """
    Validate a configuration document and build the run objects it describes.

    :param document: The decoded JSON document.
    :return: The resolved configuration.
    """
    if not isinstance(document, dict):
        raise ConfigError("config", "the configuration must be a JSON object")
    config = RunConfig(document=copy.deepcopy(document))
    energy_unit = _parse_units(document)
    _parse_system(config, document, energy_unit)

    noise = _section(document, "noise")
    lindblad = _section(document, "lindblad")
    if noise is not None and lindblad is not None:
        raise ConfigError("lindblad", "give exactly one of noise and lindblad")
    if noise is not None:
        config.noise = _parse_noise(noise)
    if lindblad is not None:
        with _field_errors("lindblad"):
            config.lindblad = LindbladDephasing(
                _number(lindblad, "gamma", "lindblad", required=True)
            )

    thermal = _section(document, "thermal")
    if thermal is not None:
        with _field_errors("thermal"):
            config.thermal = ThermalParams(_number(thermal, "k_b_t", "thermal", required=True))

    config.grid = _parse_grid(_section(document, "grid") or {})
    config.ensemble = _parse_ensemble(_section(document, "ensemble") or {})

    curve = _section(document, "curve")
    if curve is not None:
        _parse_curve(config, curve)
    optimize = _section(document, "optimize")
    if optimize is not None:
        config.optimize = _parse_optimize(optimize, config.ensemble)
    scaling = _section(document, "scaling")
    if scaling is not None:
        _parse_scaling(config, scaling)

    threshold = document.get("negligible_threshold", DEFAULT_NEGLIGIBLE_THRESHOLD)
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)) or not threshold > 0:
        raise ConfigError("negligible_threshold", f"expected a positive number, got {threshold!r}")
    config.negligible_threshold = float(threshold)
    return config


def import_run_config(config_file_path: str) -> RunConfig:
    """
    Imports a run configuration from a JSON file.

    :param config_file_path: The path to the JSON file.
    :return: The resolved configuration.
    """
    try:
        with open(config_file_path) as file:
            document = json.load(file)
    except OSError as error:
        raise ConfigError("config", f"cannot read {config_file_path}: {error.strerror}") from error
    except json.JSONDecodeError as error:
        raise ConfigError("config", f"{config_file_path} is not valid JSON: {error}") from error
    return parse_run_config(document)
