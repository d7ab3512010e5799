"""Kernel backend selection: compiled extension with pure-Python fallback.

The compiled module (``citemap._core._kernels``, built from Cython) and the
fallback (:mod:`citemap._core.kernels_py`) implement the same functions with
identical arithmetic; the parity tests assert bit-identical outputs. The
active backend is picked at import: the extension when present, else the
fallback. Set ``CITEMAP_KERNELS=python`` or ``=cython`` to force one.
"""

from __future__ import annotations

import os

from . import kernels_py
from .kernels_py import OBJ_CPM, OBJ_RB

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def available_backends() -> list[str]:
    names = ["python"]
    if _compiled is not None:
        names.append("cython")
    return names


def get_kernels(name: str):
    if name == "python":
        return kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run pip install -e .")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def set_backend(name: str) -> None:
    """Switch the active backend in-process (tests and benchmarks)."""
    global kernels, backend_name
    kernels = get_kernels(name)
    backend_name = name


_requested = os.environ.get("CITEMAP_KERNELS", "auto")
if _requested == "auto":
    backend_name = "cython" if _compiled is not None else "python"
else:
    backend_name = _requested
kernels = get_kernels(backend_name)
