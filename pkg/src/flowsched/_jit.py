"""numba switch.

Set ``FLOWSCHED_DISABLE_NUMBA=1`` before import to run every kernel on the
vectorized numpy path instead of the compiled one.
"""

import os

DISABLED = os.environ.get("FLOWSCHED_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(fn):
    """Compile ``fn`` with numba when available, else return it untouched."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
