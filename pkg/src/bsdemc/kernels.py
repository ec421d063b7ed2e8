"""Backend selection for the per-path kernels.

The compiled Cython module is used when it imports; otherwise, or when the
environment variable ``BSDEMC_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback is used. ``BACKEND`` names the active one.

All wrappers coerce their inputs to contiguous float64/int64 so callers may pass
views and slices.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_force_py = os.environ.get("BSDEMC_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined,no-redef]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels
        BACKEND = "python"


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def hc_cells(x, lower, edge: float, per_axis: int, clamp: bool = False, impl=None) -> np.ndarray:
    """Flat row-major index of the half-open cube holding each row of ``x``.

    Rows outside the box get -1, or with ``clamp`` the nearest boundary cube.
    """
    return (impl or _impl).hc_cells(_f64(x), _f64(lower), float(edge), int(per_axis), bool(clamp))


def nearest_center(x, centers, impl=None) -> np.ndarray:
    return (impl or _impl).nearest_center(_f64(x), _f64(centers))


def cell_gram(cells, u, n_cells: int, impl=None):
    """Per-cell sums of ``u u^T`` and per-cell row counts; rows with cell -1 are skipped."""
    return (impl or _impl).cell_gram(_i64(cells), _f64(u), int(n_cells))


def cell_cross(cells, u, y, n_cells: int, impl=None) -> np.ndarray:
    return (impl or _impl).cell_cross(_i64(cells), _f64(u), _f64(y), int(n_cells))


def cell_dot(cells, coef, u, impl=None) -> np.ndarray:
    """Row-wise ``coef[cell] . u``; zero for rows outside every cell."""
    return (impl or _impl).cell_dot(_i64(cells), _f64(coef), _f64(u))


def available_backends() -> dict:
    out = {"python": _pykernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]
        out["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return out
