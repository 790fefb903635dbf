"""Selection of the stepping kernel.

The compiled FFTW kernel is used when it imports; otherwise the numpy
kernel.  ``TWOCH_BACKEND=python`` forces the numpy kernel and
``TWOCH_BACKEND=compiled`` makes a missing extension an error.
"""
from __future__ import annotations

import os
import threading

from . import _kernels_py

ENV_VAR = "TWOCH_BACKEND"

try:
    from . import _core as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None


def available() -> list[str]:
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def resolve(name: str | None = None) -> str:
    """Map a requested backend (``auto``, ``compiled``, ``python``) to an available one."""
    choice = (name or os.environ.get(ENV_VAR) or "auto").strip().lower()
    if choice in ("python", "numpy"):
        return "python"
    if choice == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel requested but twoch._core is not built")
        return "compiled"
    if choice != "auto":
        raise ValueError(f"unknown backend {choice!r}")
    return "compiled" if _compiled is not None else "python"


def core_class(name: str | None = None):
    return _compiled.SpectralCore if resolve(name) == "compiled" else _kernels_py.SpectralCore


DEFAULT = resolve()

_local = threading.local()


def core(n: int, length: float, dealias: bool = True, name: str | None = None):
    """Per-thread cached kernel instance (kernels hold scratch buffers)."""
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = {}
    key = (n, float(length), bool(dealias), resolve(name))
    obj = cache.get(key)
    if obj is None:
        if len(cache) > 16:
            cache.clear()
        obj = cache[key] = core_class(key[3])(n, length, dealias)
    return obj
