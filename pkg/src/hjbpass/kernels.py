"""Kernel backend selection.

The hot per-point kernels exist twice: a compiled Cython extension
(``hjbpass._kernels``) and a pure-numpy fallback (``hjbpass._kernels_py``).
The compiled one is used when it imported successfully and the basis size
fits its compile-time limit; setting ``HJBPASS_PURE_PYTHON=1`` forces the
fallback (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_python = os.environ.get("HJBPASS_PURE_PYTHON", "") not in ("", "0")

if not _force_python:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
else:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND


def max_compiled_degree() -> int | None:
    """Per-axis basis limit of the compiled backend, None when unavailable."""
    return None if _compiled is None else _compiled.MAX_DEGREE


def get_kernels(degree: int):
    """Return the kernel module to use for a basis with ``degree`` functions per axis."""
    if _compiled is not None and degree <= _compiled.MAX_DEGREE:
        return _compiled
    return _kernels_py
