"""
Application settings for lawline.

This module manages all configuration settings for the toolkit, including:
- Environment variables
- Parallelism and logging
- Optimizer limits and tolerances
- Parameter bounds and multi-start grids for both scaling-law families
- Comparison defaults
"""

import os
from typing import Optional, Tuple
from dotenv import load_dotenv
from src.core.logger import get_logger

# Set up logger
logger = get_logger("config_settings")

# Load environment variables
load_dotenv()

__version__ = "0.2.0"


def _env_int(key: str, default: int) -> int:
    raw = os.getenv(key)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {key}={raw!r}, using {default}")
        return default


# Parallelism
THREADS: int = max(1, _env_int("LAWLINE_THREADS", os.cpu_count() or 1))

# Logging
LOG_LEVEL: str = os.getenv("LAWLINE_LOG_LEVEL", "WARNING")
LOG_FILE: Optional[str] = os.getenv("LAWLINE_LOG_FILE")

# Optimizer
MAX_ITERATIONS: int = _env_int("LAWLINE_MAX_ITERATIONS", 500)
# Stop on relative sse improvement below FTOL or projected gradient norm below GTOL
FTOL: float = 1e-10
GTOL: float = 1e-12
XTOL: float = 1e-15

# Compute-to-loss bounds; A and B are fitted as ln A, ln B
C2L_MAX_COEF: float = 1e12
C2L_LOG_COEF_MIN: float = -30.0
C2L_EXPONENT_MAX: float = 2.0
C2L_EXPONENT_MIN: float = 1e-6
C2L_MIN_POINTS: int = 6

# Compute-to-loss starts: E as a fraction of the minimum observed loss, exponent grid
C2L_E_FRACTIONS: Tuple[float, ...] = (0.0, 0.5, 0.9)
C2L_EXPONENT_STARTS: Tuple[float, ...] = (0.2, 0.35, 0.5)

# Loss-to-loss bounds and starts
L2L_K_MIN: float = 1e-12
L2L_K_MAX: float = 1e6
L2L_KAPPA_MIN: float = 1e-6
L2L_KAPPA_MAX: float = 10.0
L2L_KAPPA_STARTS: Tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
L2L_MIN_POINTS: int = 3

# Residual base clamp inside (L_x - E_x)^kappa
RESIDUAL_CLAMP: float = 1e-9
# Tolerance for observed losses sitting at/below a supplied irreducible error
EPS_CLIP: float = 1e-6

# Comparison
DEFAULT_INTERVAL: Tuple[float, float] = (0.0, 2.0)
AREA_ABS_TOL: float = 1e-8
# Grid used to bracket crossings between two curves on each panel
CROSSING_SCAN_POINTS: int = 513

# Report
CURVE_SAMPLES: int = 200
SVG_HASH_SALT: str = "lawline"
