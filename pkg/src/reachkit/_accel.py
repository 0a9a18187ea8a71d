"""Backend selection for the hot numeric kernels.

Every kernel in ``reachkit._kernels`` exists twice: a vectorized pure-numpy
reference (``*_numpy``) and an ``@njit`` scalar-loop twin (``*_numba``).
The environment variable ``REACHKIT_BACKEND`` picks which one the library
binds to at import time:

    auto   (default) use numba when importable, numpy otherwise
    numba  require numba, raise if missing
    numpy  force the pure-numpy fallback

``benchmarks/bench_kernels.py`` times both flavors side by side.
"""

import os

BACKEND_ENV = "REACHKIT_BACKEND"

_choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{BACKEND_ENV} must be one of auto|numba|numpy, got {_choice!r}"
    )

if _choice == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
        HAVE_NUMBA = False

#: True when the accelerated twins are bound as the active implementations.
USE_NUMBA = HAVE_NUMBA


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
