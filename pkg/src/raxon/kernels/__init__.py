"""Hot inner loops with a compiled backend and a pure-Python fallback.

The compiled module ``_ckernels`` is used when it was built; otherwise, or
when ``RAXON_KERNELS=python`` is set, the ``_pykernels`` versions are bound.
Callers must go through attribute access (``kernels.subset_closure(...)``)
so that :func:`use` takes effect everywhere.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = [
    "BACKEND",
    "available_backends",
    "backend_module",
    "use",
    "subset_closure",
    "transitive_reduction",
    "greedy_assign",
    "optimal_search",
    "varint_encode",
    "varint_decode",
    "hash_join_probe",
]

_NAMES = (
    "subset_closure",
    "transitive_reduction",
    "greedy_assign",
    "optimal_search",
    "varint_encode",
    "varint_decode",
    "hash_join_probe",
)

BACKEND = "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def backend_module(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available; rebuild with `pip install -e .`")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def use(name: str) -> None:
    """Rebind every kernel to the named backend (``python`` or ``cython``)."""
    global BACKEND
    mod = backend_module(name)
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name


_requested = os.environ.get("RAXON_KERNELS", "").strip().lower()
if _requested:
    use(_requested)
else:
    use("cython" if _ckernels is not None else "python")
