"""Constants for the pairplan package."""

import math

DEFAULT_HORIZON = 8  # steps
DEFAULT_DT = 0.5  # seconds
DEFAULT_V_MAX = 20.0  # m/s, kinematic spacing bound
DEFAULT_SPEED_LIMIT = 12.0  # m/s

DEFAULT_GRID_CELL = 0.5  # meters
DEFAULT_GRID_CELLS = 128
DEFAULT_GRID_ORIGIN = (-16.0, -32.0)
DEFAULT_EGO_HALF_EXTENTS = (2.2, 0.9)
DEFAULT_AGENT_HALF_EXTENTS = (2.2, 0.9)
DEFAULT_LANE_WIDTH = 3.5
CLOSING_SPEED_FLOOR = 0.1  # m/s

DEFAULT_TTC_THRESHOLD = 1.0  # seconds
DEFAULT_A_MAX = 3.0  # m/s^2
DEFAULT_J_MAX = 5.0  # m/s^3
DEFAULT_LANE_HALF_WIDTH = 1.75
PROGRESS_FLOOR = 0.1  # meters
EC_DISTANCE_SCALE = 2.0  # meters

DEFAULT_TOKEN_DIM = 128
DEFAULT_FEATURE_DIM = 256
DEFAULT_HEADS = 4
DEFAULT_SCENE_TOKENS = 4
POSITION_SCALE = 10.0  # meters per network unit

DEFAULT_GROUP_SIZE = 15
DEFAULT_CLIP_EPS = 0.2
BETA_MIN = 1e-4
BETA_MAX = 10.0
LOG_STD_FLOOR = math.log(0.02)
DEGENERATE_STD = 1e-8

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

DEFAULT_BEST_OF_N = 6
HUMAN_BAD_PDMS = 0.85

CHECKPOINT_FORMAT = "pairplan_ckpt_v1"
SCENARIO_SCHEMA = "scenario_v1"
THREADS_ENV = "PAIRPLAN_THREADS"

ERROR_CODES = {
    0x01: "Invalid configuration",
    0x02: "Shape mismatch",
    0x03: "Contract violation",
    0x04: "Unsupported file format",
    0x05: "Numerical failure",
    0x06: "Input/output failure",
}
