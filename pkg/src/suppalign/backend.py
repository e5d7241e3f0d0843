"""Kernel backend selection.

Hot numeric kernels ship in two flavours: numba @njit loops and vectorized
numpy. The active flavour is chosen once at import time from the
``SUPPALIGN_BACKEND`` environment variable:

    SUPPALIGN_BACKEND=numba   force numba (raises if numba is missing)
    SUPPALIGN_BACKEND=numpy   force the pure-numpy fallback
    unset / "auto"            numba when importable, numpy otherwise

Everything outside the kernels is plain numpy either way.
"""

from __future__ import annotations

import os

_requested = os.environ.get("SUPPALIGN_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"
elif _requested == "numba":
    import numba  # noqa: F401

    BACKEND = "numba"
elif _requested == "numpy":
    BACKEND = "numpy"
else:
    raise ValueError(
        f"SUPPALIGN_BACKEND={_requested!r} not understood; use 'numba', 'numpy' or 'auto'"
    )


def maybe_njit(*args, **kwargs):
    """@njit when the numba backend is active, identity decorator otherwise.

    Usable bare (``@maybe_njit``) or parenthesized (``@maybe_njit(...)``).
    """
    if args and callable(args[0]) and not kwargs:
        fn = args[0]
        if BACKEND == "numba":
            from numba import njit

            return njit(fn, cache=True)
        return fn

    if BACKEND == "numba":
        from numba import njit

        kwargs.setdefault("cache", True)
        return njit(*args, **kwargs)

    def passthrough(fn):
        return fn

    return passthrough
