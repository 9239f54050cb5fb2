"""Selects the compiled grid kernels when available.

Set ``WPBC_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
dynamic_kernel = _kernels_py.dynamic_kernel
static_kernel = _kernels_py.static_kernel

if os.environ.get("WPBC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        dynamic_kernel = _kernels.dynamic_kernel
        static_kernel = _kernels.static_kernel
