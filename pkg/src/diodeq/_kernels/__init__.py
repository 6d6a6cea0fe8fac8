"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; setting
``DIODEQ_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels as python_kernels

compiled_kernels = None
if os.environ.get("DIODEQ_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

active = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"

knn_search = active.knn_search
best_split = active.best_split

__all__ = ["BACKEND", "knn_search", "best_split", "python_kernels", "compiled_kernels"]
