"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled module ``_ext`` is used when it was built; setting the
environment variable ``TRADEPLEX_PURE=1`` forces the fallback. Both backends
expose the same functions and produce bit-identical output.
"""

import importlib
import os

from . import _pure

_NAMES = (
    "ks2_stat",
    "normal_gap_rows",
    "neumaier_gram",
    "union_find_labels",
    "complete_linkage_merges",
)


def load(name):
    """Return the kernel module for backend ``name`` ("cython" or "python")."""
    if name == "python":
        return _pure
    if name == "cython":
        return importlib.import_module("tradeplex._kernels._ext")
    raise ValueError(f"unknown kernel backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("TRADEPLEX_PURE", "") not in ("", "0"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        _impl = load("cython")
        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

ks2_stat = _impl.ks2_stat
normal_gap_rows = _impl.normal_gap_rows
neumaier_gram = _impl.neumaier_gram
union_find_labels = _impl.union_find_labels
complete_linkage_merges = _impl.complete_linkage_merges

__all__ = ["BACKEND", "available", "load", *_NAMES]
