"""Kernel backend selection.

The compiled extension is used when importable; setting
``VITALSELECT_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from vitalselect import _pykernels

if os.environ.get("VITALSELECT_PURE_PYTHON"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from vitalselect import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
