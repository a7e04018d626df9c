"""JIT switch.

Set ``CRNKIT_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. Numba is also skipped silently when it cannot be imported.
"""
import os

_FLAG = os.environ.get("CRNKIT_DISABLE_NUMBA", "").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

if HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper
