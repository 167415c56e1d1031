"""Backend selection for the Monte Carlo kernels.

The compiled extension is used when it imports; ``QUENCHXY_BACKEND=python``
forces the pure-Python twins.
"""

from __future__ import annotations

import os

from . import _pykernels

NAMES = (
    "heatbath_sweep",
    "metropolis_sweep",
    "cluster_update",
    "union_find_labels",
    "fk_labels",
    "pregood_box",
    "height_sweep",
    "phi4_sweep",
)


def _load(name: str):
    if name == "python":
        return _pykernels
    from . import _kernels  # noqa: PLC0415

    return _kernels


def get_backend(name: str | None = None):
    """Module implementing the kernels: ``"compiled"`` or ``"python"``."""
    if name is None:
        name = os.environ.get("QUENCHXY_BACKEND", "compiled")
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled":
        try:
            return _load("compiled")
        except ImportError:
            return _pykernels
    return _pykernels


backend = get_backend()
BACKEND = "compiled" if backend is not _pykernels else "python"

heatbath_sweep = backend.heatbath_sweep
metropolis_sweep = backend.metropolis_sweep
cluster_update = backend.cluster_update
union_find_labels = backend.union_find_labels
fk_labels = backend.fk_labels
pregood_box = backend.pregood_box
height_sweep = backend.height_sweep
phi4_sweep = backend.phi4_sweep
