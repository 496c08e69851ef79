"""Tick-kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
fallback. Set ``TELEOP_SIM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernel_py

BACKEND = "python"
advance = _kernel_py.advance

if os.environ.get("TELEOP_SIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel as _compiled
    except ImportError:
        pass
    else:
        advance = _compiled.advance
        BACKEND = "cython"


def get_advance(backend: str | None = None):
    """Return the kernel for ``backend`` ("python", "cython" or None for the default)."""
    if backend is None:
        return advance
    if backend == "python":
        return _kernel_py.advance
    if backend == "cython":
        from . import _kernel
        return _kernel.advance
    raise ValueError(f"unknown kernel backend {backend!r}")


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _kernel  # noqa: F401
    except ImportError:
        return out
    return out + ["cython"]
