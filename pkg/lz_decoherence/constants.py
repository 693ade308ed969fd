from enum import Enum

import numpy as np


class NoiseModel(Enum):
    # Classical noise realizations sharing the same (A, tau) characterization
    none = "none"
    ornstein_uhlenbeck = "ornstein_uhlenbeck"
    telegraph = "telegraph"


class RegimeQuadrant(Enum):
    # Noise classification by amplitude (A vs gap) and correlation (omega_max vs gap)
    low_amp_short_corr = "LowAmpShortCorr"
    low_amp_long_corr = "LowAmpLongCorr"
    high_amp_long_corr = "HighAmpLongCorr"
    high_amp_short_corr = "HighAmpShortCorr"


class ReportFlag(Enum):
    # Diagnostics attached to analytic and numeric reports
    clamped = "clamped"
    log_argument_invalid = "log_argument_invalid"
    v_optimal_above_gap_scale = "v_optimal_above_gap_scale"
    noiseless = "noiseless"
    negligible_environment_effect = "negligible_environment_effect"
    avoidance_needs_fast_sweep = "avoidance_needs_fast_sweep"
    thermal_limited = "thermal_limited"
    monotone = "monotone"
    resolution_insufficient = "resolution_insufficient"
    boundary_maximum = "boundary_maximum"
    dense_fallback = "dense_fallback"
    thermal_floor_applied = "thermal_floor_applied"
    resolution_limited = "resolution_limited"


NOISE_MODEL_ALIASES = {
    # Config spellings accepted for each noise model
    "none": NoiseModel.none,
    "None": NoiseModel.none,
    "ou": NoiseModel.ornstein_uhlenbeck,
    "ornstein_uhlenbeck": NoiseModel.ornstein_uhlenbeck,
    "OrnsteinUhlenbeck": NoiseModel.ornstein_uhlenbeck,
    "telegraph": NoiseModel.telegraph,
    "Telegraph": NoiseModel.telegraph,
}

LOW_AMP_QUADRANTS = (
    RegimeQuadrant.low_amp_short_corr,
    RegimeQuadrant.low_amp_long_corr,
)
HIGH_AMP_QUADRANTS = (
    RegimeQuadrant.high_amp_long_corr,
    RegimeQuadrant.high_amp_short_corr,
)

# Pauli matrices in the diabatic {|up>, |down>} basis
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI_STACK = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

# Analytic estimators
DEFAULT_NEGLIGIBLE_THRESHOLD = 10.0
DEFAULT_SCALING_MARGIN = 10.0

# Step control
DEFAULT_TAIL_TOLERANCE = 1e-3
DEFAULT_MAX_STEPS = 20_000_000
DEFAULT_CHUNK_STEPS = 1024
EDGE_GAP_MULTIPLE = 20.0
EDGE_NOISE_MULTIPLE = 5.0
STEP_PHASE_LIMIT = 0.05
NOISE_STEP_FRACTION = 0.1

# Integration tolerances
NORM_DRIFT_LIMIT = 1e-6
POSITIVITY_LIMIT = 1e-6

# Ensemble defaults
DEFAULT_BATCH_SIZE = 64
DEFAULT_N_TRAJECTORIES = 1000

# Optimizer defaults
DEFAULT_COARSE_GRID_POINTS = 15
DEFAULT_REFINE_ITERATIONS = 8
FLAT_LANDSCAPE_TOLERANCE = 1e-9

# Noise statistics
MIN_AUTOCORR_SAMPLES = 100

# Output
CSV_FLOAT_FORMAT = ".17g"
