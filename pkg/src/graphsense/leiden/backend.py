"""Kernel selection.

The compiled kernels are used when the extension was built; otherwise the
pure-Python ones. Set ``GRAPHSENSE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels as python_kernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and not os.environ.get("GRAPHSENSE_PURE_PYTHON"):
    kernels = compiled_kernels
else:
    kernels = python_kernels

BACKEND = kernels.BACKEND
