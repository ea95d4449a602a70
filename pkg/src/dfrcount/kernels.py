"""Kernel selection: compiled extension when importable, numpy otherwise."""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("DFRCOUNT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
    else:
        BACKEND = "cython"
else:
    _impl = _pykernels

lindley = _impl.lindley
level_durations = _impl.level_durations

__all__ = ["BACKEND", "lindley", "level_durations"]
