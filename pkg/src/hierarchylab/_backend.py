"""Select the compiled layer kernels when available, else the numpy ones.

Set HIERARCHYLAB_PURE=1 to force the pure-Python kernels.
"""

from __future__ import annotations

import os

from . import _kernels_py

PURE_ENV = "HIERARCHYLAB_PURE"

if os.environ.get(PURE_ENV, "") not in ("", "0"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
