"""JIT switch for the Monte-Carlo kernels.

Set ``MWRELAY_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is not importable the numpy path is used regardless.
"""

import os

_FLAG = os.getenv("MWRELAY_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
    _njit = None

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED

NUMBA_OPTS = {"cache": True, "nogil": True}


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return _njit(**NUMBA_OPTS)(func)
