"""Hot inner loops with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``R0GP_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("R0GP_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

if compiled_backend is not None:
    segment_lse = compiled_backend.segment_lse
    rk4_seir = compiled_backend.rk4_seir
    BACKEND = "cython"
else:
    segment_lse = python_backend.segment_lse
    rk4_seir = python_backend.rk4_seir
    BACKEND = "python"

__all__ = ["segment_lse", "rk4_seir", "BACKEND", "python_backend", "compiled_backend"]
