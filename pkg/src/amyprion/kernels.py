"""Kernel selection: compiled extension if available, NumPy otherwise.

Set the environment variable ``AMYPRION_PURE_KERNELS=1`` before import to
force the NumPy path (useful for benchmarking and debugging). The active
choice is exposed as ``IMPLEMENTATION`` / ``HAVE_COMPILED``.
"""

import os

from . import _fvkernel_py

HAVE_COMPILED = False
IMPLEMENTATION = "python"
upwind_step = _fvkernel_py.upwind_step

if os.environ.get("AMYPRION_PURE_KERNELS", "") not in ("1", "true", "yes"):
    try:
        from . import _fvkernel

        upwind_step = _fvkernel.upwind_step
        HAVE_COMPILED = True
        IMPLEMENTATION = "compiled"
    except ImportError:
        pass

__all__ = ["upwind_step", "HAVE_COMPILED", "IMPLEMENTATION"]
