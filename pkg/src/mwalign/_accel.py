"""numba detection.

Set ``MWALIGN_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when
numba is importable.
"""
import logging
import os

logger = logging.getLogger(__name__)

_disabled = os.environ.get("MWALIGN_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("disabled by MWALIGN_DISABLE_NUMBA")
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError as exc:
    logger.debug("numba unavailable (%s); using numpy kernels", exc)

    def njit(pyfunc=None, **kwargs):
        def wrap(func):
            return func
        return wrap if pyfunc is None else wrap(pyfunc)

    HAVE_NUMBA = False
