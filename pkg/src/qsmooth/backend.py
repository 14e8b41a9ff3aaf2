"""Kernel backend selection.

The compiled Cython extension is used when it imports; otherwise the numpy
fallback is used. ``QSMOOTH_PURE_PYTHON=1`` forces the fallback, and
``QSMOOTH_NUM_THREADS`` sets the OpenMP thread count for large states and the
worker count for per-sample parallelism (default: all available cores).
"""
import os

from . import _pykernels

if os.environ.get("QSMOOTH_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

kernels = _compiled if _compiled is not None else _pykernels
NAME = "cython" if _compiled is not None else "numpy"


def num_threads():
    value = os.environ.get("QSMOOTH_NUM_THREADS")
    if value:
        return max(1, int(value))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def get(name=None):
    """Return the kernel module called ``name`` ("cython" or "numpy"); default is the active one."""
    if name is None:
        return kernels
    if name == "numpy":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; build the extension first")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
