"""Selects the search kernel backend at import time.

The compiled extension is used when importable; set
``URBANROUTE_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import os

from . import _search_py

if os.environ.get("URBANROUTE_PURE_PYTHON"):
    best_first = _search_py.best_first
    BACKEND = "python"
else:
    try:
        from ._search_ext import best_first
        BACKEND = "cython"
    except ImportError:
        best_first = _search_py.best_first
        BACKEND = "python"


def backends() -> dict:
    """All importable backends by name, for tests and benchmarks."""
    found = {"python": _search_py.best_first}
    try:
        from ._search_ext import best_first as ext
    except ImportError:
        pass
    else:
        found["cython"] = ext
    return found
