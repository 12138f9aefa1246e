"""Numba switch.

Hot kernels are written once as plain Python loops and compiled with
:func:`njit` when numba is importable and ``BIPHOTON_DISABLE_NUMBA`` is not
set to a truthy value. With numba disabled the callers use their numpy
fallback path instead of the (then uncompiled, slow) loop kernel.
"""

import os

_FLAG = os.environ.get("BIPHOTON_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV

NUMBA_OPTS = {"cache": True, "nogil": True}


def njit(func):
    """Compile ``func`` in nopython mode if numba is installed, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(**NUMBA_OPTS)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
