"""Runtime configuration settings."""

from __future__ import annotations

# ---------------------------------------------------------------------------
# Grids and resolution
# ---------------------------------------------------------------------------

MIN_POINTS = 8
# A bubble of scale lambda is resolvable when lambda >= RESOLUTION_FACTOR * h
RESOLUTION_FACTOR = 4.0
# Rate fits use scales >= FIT_FACTOR * h
FIT_FACTOR = 8.0
FIT_DECADE = 10.0
MIN_FIT_POINTS = 10
# Mass fraction a rescaling may push out of the box
TRUNCATION_TOL = 1e-10
ANCHOR_SCAN_ANGLES = 720

# ---------------------------------------------------------------------------
# Ground state and rho
# ---------------------------------------------------------------------------

SHOOT_BRACKETS = {1: (1.05, 2.0), 2: (1.5, 3.0)}
SHOOT_R0 = 1e-3
SHOOT_R_MAX = 40.0
SHOOT_RTOL = 3e-14
SHOOT_ATOL = 1e-16
SHOOT_MATCH_LEVEL = 1e-6
PROFILE_R_MAX = 30.0
PROFILE_POINTS = 16384
PROFILE_GRADING = 3.0
PROFILE_SPLINE_DEGREE = 7
DECAY_FIT_FROM = 5.0
RHO_POINTS = 6000
RHO_CONDITION_LIMIT = 1e12
GRID_POLISH_RTOL = 1e-14
GRID_POLISH_NEWTON = 6
PROFILE_CACHE_VERSION = 1

# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

MIN_FLATNESS = 5
ENVELOPE_FRACTION = 1.0 / 8.0
DECAY_BOUNDARY_TOL = 1e-6
NOISE_TIME_SLACK = 1e-12

# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

C_DT_DEFAULT = 0.01
C_DT_MAX = 0.5
DT_MIN_DEFAULT = 1e-9
U_CAP_DEFAULT = 1e6
PROGRESS_EVERY = 500

# ---------------------------------------------------------------------------
# Modulation
# ---------------------------------------------------------------------------

NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 8
ORTHOGONALITY_TOL = 1e-10
JACOBIAN_CONDITION_LIMIT = 1e12
SEPARATION_FRACTION = 1.0 / 12.0
BASIN_LADDER = (1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3)

# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

MORAWETZ_A = 10.0
MORAWETZ_A_SWEEP = (5.0, 10.0, 20.0)
MONOTONICITY_FRACTION = 0.95
# |rate - dE/dt| <= ENERGY_RATE_TOL * max(|dE/dt|, 1)
ENERGY_RATE_TOL = 1e-4
CONTRACTION_SLACK = 10.0

# ---------------------------------------------------------------------------
# Run directories
# ---------------------------------------------------------------------------

CONFIG_FILE = "config.yaml"
CHECKPOINT_DIR = "checkpoints"
CHECKPOINT_INDEX = "index.csv"
PHYSICAL_DIR = "physical"
DIAGNOSTICS_FILE = "diagnostics.csv"
PARAMS_FILE = "params.csv"
PAIR_FILE = "pair.csv"
CAUCHY_FILE = "cauchy.csv"
PATHS_FILE = "paths.csv"
SUMMARY_FILE = "summary.txt"
LOG_FILE = "run.log"

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3
EXIT_RESOLUTION = 4
