"""Select the kernel-loop implementation at import time.

``RIDGEKERN_BACKEND`` may be ``auto`` (default), ``compiled`` or ``python``.
"""
import os

_choice = os.environ.get("RIDGEKERN_BACKEND", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"RIDGEKERN_BACKEND must be auto, compiled or python, got {_choice!r}")

if _choice == "python":
    from . import _pykernels as impl
    BACKEND = "python"
else:
    try:
        from . import _ckernels as impl
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _pykernels as impl
        BACKEND = "python"

ridge_features = impl.ridge_features
ridge_apply = impl.ridge_apply
farthest_point_net = impl.farthest_point_net

__all__ = ["BACKEND", "ridge_features", "ridge_apply", "farthest_point_net"]
