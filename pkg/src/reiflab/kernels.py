"""Kernel selection.

The compiled extension is used when it imports cleanly; otherwise, or when
``REIFLAB_PURE_PYTHON=1`` is set, the numpy/pure-Python versions are used.
Both expose the same functions.
"""
import os

from . import _kernels_py as python_impl

compiled_impl = None
if os.environ.get("REIFLAB_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_impl  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_impl = None

_impl = compiled_impl if compiled_impl is not None else python_impl

IMPLEMENTATION = _impl.IMPLEMENTATION
segment_gap = _impl.segment_gap
plane_deviation = _impl.plane_deviation
deviation_sweep = _impl.deviation_sweep
directed_hausdorff = _impl.directed_hausdorff
label_runs = _impl.label_runs
hull_sorted = _impl.hull_sorted

__all__ = [
    "IMPLEMENTATION",
    "compiled_impl",
    "python_impl",
    "segment_gap",
    "plane_deviation",
    "deviation_sweep",
    "directed_hausdorff",
    "label_runs",
    "hull_sorted",
]
