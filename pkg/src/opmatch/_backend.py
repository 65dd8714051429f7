"""Select the kernel backend at import time.

The compiled module is used when it imports; setting ``OPMATCH_PURE_PYTHON=1``
forces the pure-Python reference implementation.
"""
from __future__ import annotations

import os

if os.environ.get("OPMATCH_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import Kernel
    BACKEND = "python"
else:
    try:
        from ._ckernels import Kernel  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        from ._pykernels import Kernel  # type: ignore[no-redef]
        BACKEND = "python"

__all__ = ["Kernel", "BACKEND", "compiled_available", "kernel_class"]


def kernel_class(name: str | None = None):
    """Return a kernel class by backend name (``None`` = the active one)."""
    if name is None:
        return Kernel
    if name == "python":
        from ._pykernels import Kernel as K
        return K
    if name == "cython":
        from ._ckernels import Kernel as K
        return K
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True
