"""numba toggle.

Hot kernels are written once for numba. Setting ``LANEKIT_DISABLE_NUMBA=1``
(or running without numba installed) swaps every kernel for its numpy /
pure-Python twin; results are bit-identical either way.
"""

from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED_BY_ENV = os.environ.get("LANEKIT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}
NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not DISABLED_BY_ENV

# No fastmath: reassociation or FMA contraction would break bit-parity with
# the numpy path.
_NJIT_KW = {"cache": True, "nogil": True}


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it untouched.

    The undecorated function stays reachable as ``.py_func`` either way so the
    benchmark can time both paths in one process.
    """
    if not USE_NUMBA:
        func.py_func = func
        return func
    return numba.njit(**_NJIT_KW)(func)


def pick(fast, slow):
    """Return ``fast`` if the numba path is active, else ``slow``."""
    return fast if USE_NUMBA else slow


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
