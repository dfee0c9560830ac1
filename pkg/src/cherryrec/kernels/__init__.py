"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built and importable. Set
``CHERRYREC_PURE_PYTHON=1`` to force the fallback (the benchmark and the
backend-equivalence tests do this per call via :func:`get_backend`).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name is None:
        name = BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available; rebuild the package")
        return _ckernels
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    return ["compiled", "python"] if _ckernels is not None else ["python"]


if _ckernels is not None and os.environ.get("CHERRYREC_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "compiled"
    _impl = _ckernels
else:
    BACKEND = "python"
    _impl = _pykernels

score_rows = _impl.score_rows
poly_loss_grad = _impl.poly_loss_grad
svr_loss_grad = _impl.svr_loss_grad
best_split = _impl.best_split

__all__ = [
    "BACKEND",
    "available_backends",
    "best_split",
    "get_backend",
    "poly_loss_grad",
    "score_rows",
    "svr_loss_grad",
]
