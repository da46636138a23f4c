"""Optional numba acceleration.

Kernels are compiled with numba when it is importable and the environment
variable ``LAYERGAUGE_NUMBA`` is not set to ``0``; otherwise the pure-numpy
implementations are dispatched.
"""

import logging
import os

logger = logging.getLogger(__name__)

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAS_NUMBA = False


def _env_enabled() -> bool:
    return os.environ.get("LAYERGAUGE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAS_NUMBA and _env_enabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise.

    Compiled functions are cached on disk so worker processes do not pay the
    compilation cost again.
    """
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


logger.debug("layergauge kernel backend: %s", BACKEND)
