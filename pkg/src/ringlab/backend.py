"""Selects the compiled kernel set or the NumPy fallback at import time.

Set RINGLAB_BACKEND=python to force the fallback, or =cython to require the
extension (raising if it is missing). Default is auto.
"""

import os

_choice = os.environ.get("RINGLAB_BACKEND", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ValueError(f"RINGLAB_BACKEND must be auto, cython or python, got {_choice!r}")

if _choice == "python":
    from . import _fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _accel as _impl

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import _fallback as _impl

        BACKEND = "python"

sor_color_sweep = _impl.sor_color_sweep
operator_apply = _impl.operator_apply
agm_ke = _impl.agm_ke
green_block = _impl.green_block


def backend_name() -> str:
    return BACKEND
