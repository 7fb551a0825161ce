"""Kernel backend selection.

At import time the compiled extension is preferred; the pure-numpy fallback
is used when it is missing.  ``QUERYTRACK_KERNELS=python`` or ``=compiled``
forces a backend (``compiled`` raises if the extension was never built).
"""
import os

from . import kernels_numpy


def _select():
    choice = os.environ.get("QUERYTRACK_KERNELS", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise RuntimeError(f"QUERYTRACK_KERNELS must be auto|compiled|python, got {choice!r}")
    if choice == "python":
        return kernels_numpy, "python"
    try:
        from . import _ckernels
        return _ckernels, "compiled"
    except ImportError:
        if choice == "compiled":
            raise
        return kernels_numpy, "python"


kernels, KERNELS_BACKEND = _select()
