"""Central configuration for the EMIM attention workbench."""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# ── Paths ─────────────────────────────────────────────────────────────────
PROJECT_ROOT = Path(__file__).parent.resolve()
DATA_DIR = PROJECT_ROOT / "data"
LOGS_DIR = Path(os.getenv("EMIM_LOGS_DIR", str(PROJECT_ROOT / "logs")))
OUTPUT_DIR = Path(os.getenv("EMIM_OUTPUT_DIR", str(PROJECT_ROOT / "runs")))
DEFAULTS_PATH = Path(os.getenv("EMIM_DEFAULTS", str(DATA_DIR / "defaults.yaml")))

TOOL_VERSION = "0.3.0"

# ── Reproducibility ───────────────────────────────────────────────────────
DEFAULT_SEED = int(os.getenv("EMIM_SEED", "0"))
# Worker threads for seed-isolated trials; 1 forces fully serial execution
DEFAULT_THREADS = int(os.getenv("EMIM_THREADS", "1"))

# ── Numerics ──────────────────────────────────────────────────────────────
LAYERNORM_EPS = 1e-6
PAD_VALUE = 1e-6
GRAD_STEP = float(os.getenv("EMIM_GRAD_STEP", "1e-5"))
GRAD_TOLERANCE = float(os.getenv("EMIM_GRAD_TOLERANCE", "1e-5"))
ORACLE_TOLERANCE = float(os.getenv("EMIM_ORACLE_TOLERANCE", "1e-10"))
NORMALIZATION_TOLERANCE = 1e-12
# Coordinates where |analytic| + |numeric| is at or below this are not checked
GRAD_CHECK_FLOOR = 1e-12
# Absolute errors at or below this are finite-difference roundoff and never fail a check
GRAD_NOISE_FLOOR = float(os.getenv("EMIM_GRAD_NOISE_FLOOR", "1e-8"))

# ── Logging ───────────────────────────────────────────────────────────────
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_TO_FILE = os.getenv("LOG_TO_FILE", "true").lower() == "true"

# ── Exit codes ────────────────────────────────────────────────────────────
EXIT_OK = 0
EXIT_GATE_FAILED = 1
EXIT_USAGE = 2
