import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def _env_bool(name, default=False):
    value = os.environ.get(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


# Worker pool

WORKERS = int(os.environ.get("ENSEMBLE_WORKERS", "1"))
WORKER_MAX_TASKS_PER_CHILD = 1

# Output

OUTPUT_DIR = Path(os.environ.get("ENSEMBLE_OUTPUT_DIR", BASE_DIR / "runs"))
TABLE_DELIMITER = "\t"
CHECKPOINT_FORMAT = "ensemble-mps"
CHECKPOINT_FORMAT_VERSION = 1

# Numerics

ALPHA_MARGIN = float(os.environ.get("ENSEMBLE_ALPHA_MARGIN", "0.01"))
REL_TOL = float(os.environ.get("ENSEMBLE_REL_TOL", "1e-8"))
ABORT_WEIGHT = float(os.environ.get("ENSEMBLE_ABORT_WEIGHT", "1e-2"))
SINGULAR_VALUE_CUTOFF = 1e-14
ORACLE_MAX_SITES = int(os.environ.get("ENSEMBLE_ORACLE_MAX_SITES", "14"))
ORACLE_OSEE_MAX_SITES = 12
DEGENERACY_GAP = 1e-10
IMAGINARY_RESIDUE_TOL = 1e-8

# Desk-scale limits

MAX_SITES = 32
MAX_BOND = 256
MAX_ORDER = 400

# Default Ising couplings

DEFAULT_MODEL = {
    "J": 1.0,
    "g": -1.05,
    "h": 0.5,
}

RUN_SLOW_TESTS = _env_bool("ENSEMBLE_RUN_SLOW")

LOG_LEVEL = os.environ.get("ENSEMBLE_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": LOG_LEVEL,
    },
}
