"""Kernel backend selection at import time.

The compiled extension is preferred when importable; the numpy kernels are
the fallback. Set GHEAT2D_KERNELS=python or =cython to force one (forcing
cython raises if the extension is missing).
"""

import os

_choice = os.environ.get("GHEAT2D_KERNELS", "auto").strip().lower()

if _choice in ("auto", ""):
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]
elif _choice == "cython":
    from . import _kernels as kernels  # type: ignore[attr-defined,no-redef]
elif _choice in ("python", "py", "numpy"):
    from . import _kernels_py as kernels  # type: ignore[no-redef]
else:
    raise ImportError(
        f"GHEAT2D_KERNELS={_choice!r} not understood; use auto, cython or python"
    )

backend_name: str = kernels.BACKEND
