"""Pick the SMO implementation at import time.

The compiled kernel is used when it was built; set ``WELDPARAMS_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _smo_py

BACKEND = "python"
solve_dual = _smo_py.solve_dual

if not os.environ.get("WELDPARAMS_PURE_PYTHON"):
    try:
        from . import _smo  # type: ignore[attr-defined]
    except ImportError:
        _smo = None
    else:
        BACKEND = "cython"
        solve_dual = _smo.solve_dual


def available_backends() -> dict:
    out = {"python": _smo_py.solve_dual}
    try:
        from . import _smo as compiled  # type: ignore[attr-defined]
    except ImportError:
        return out
    out["cython"] = compiled.solve_dual
    return out
