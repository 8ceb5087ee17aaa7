"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy fallback takes over. Set TRAFFICFILL_KERNELS=python or =compiled to
force a choice (the latter raises if the extension is not built).
"""

from __future__ import annotations

import os

from . import _kernels_py

_CHOICE = os.environ.get("TRAFFICFILL_KERNELS", "auto").strip().lower() or "auto"

if _CHOICE in ("auto", "compiled"):
    try:
        from . import _kernels as kernels
    except ImportError:
        if _CHOICE == "compiled":
            raise ImportError(
                "TRAFFICFILL_KERNELS=compiled but the trafficfill._kernels "
                "extension is not built; reinstall with a C compiler present"
            ) from None
        kernels = _kernels_py
elif _CHOICE in ("python", "fallback"):
    kernels = _kernels_py
else:
    raise ValueError(
        f"TRAFFICFILL_KERNELS={_CHOICE!r} not understood; "
        "use auto, compiled or python"
    )

BACKEND: str = kernels.BACKEND
KIND_HYBRID: int = _kernels_py.KIND_HYBRID
KIND_L2: int = _kernels_py.KIND_L2
KIND_CAUCHY: int = _kernels_py.KIND_CAUCHY

predict_entries = kernels.predict_entries
objective_sum = kernels.objective_sum
update_pass = kernels.update_pass


def active_backend() -> str:
    """Name of the kernel backend in use: "compiled" or "python"."""
    return BACKEND


def available_backends() -> dict:
    """All importable kernel modules keyed by backend name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
