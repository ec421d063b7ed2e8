"""Pure numpy implementations of the per-path kernels.

Used when the compiled extension is unavailable or ``BSDEMC_PURE_PYTHON`` is
set. Every function takes C-contiguous float64/int64 arrays.
"""
from __future__ import annotations

import numpy as np

# bounds peak memory of the (chunk, n_centers, d) distance tensor
_CHUNK = 4096


def hc_cells(x: np.ndarray, lower: np.ndarray, edge: float, per_axis: int,
             clamp: bool = False) -> np.ndarray:
    """Flat row-major index of the half-open cell holding each row of ``x``, or -1."""
    idx = np.ceil((x - lower) / edge).astype(np.int64) - 1
    if clamp:
        idx = np.clip(idx, 0, per_axis - 1)
    inside = np.all((idx >= 0) & (idx < per_axis), axis=1)
    flat = np.zeros(x.shape[0], dtype=np.int64)
    for j in range(x.shape[1]):
        flat = flat * per_axis + idx[:, j]
    return np.where(inside, flat, -1)


def nearest_center(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the closest center; ties go to the lowest index (argmin semantics)."""
    out = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], _CHUNK):
        block = x[start:start + _CHUNK]
        diff = block[:, None, :] - centers[None, :, :]
        dist = np.einsum("mcj,mcj->mc", diff, diff)
        out[start:start + _CHUNK] = np.argmin(dist, axis=1)
    return out


def cell_gram(cells: np.ndarray, u: np.ndarray, n_cells: int):
    valid = cells >= 0
    c = cells[valid]
    uv = u[valid]
    p = u.shape[1]
    gram = np.zeros((n_cells, p, p))
    for i in range(p):
        for j in range(i, p):
            acc = np.bincount(c, weights=uv[:, i] * uv[:, j], minlength=n_cells)
            gram[:, i, j] = acc
            gram[:, j, i] = acc
    counts = np.bincount(c, minlength=n_cells).astype(np.int64)
    return gram, counts


def cell_cross(cells: np.ndarray, u: np.ndarray, y: np.ndarray, n_cells: int) -> np.ndarray:
    valid = cells >= 0
    c = cells[valid]
    uy = u[valid] * y[valid, None]
    out = np.zeros((n_cells, u.shape[1]))
    for i in range(u.shape[1]):
        out[:, i] = np.bincount(c, weights=uy[:, i], minlength=n_cells)
    return out


def cell_dot(cells: np.ndarray, coef: np.ndarray, u: np.ndarray) -> np.ndarray:
    valid = cells >= 0
    out = np.zeros(u.shape[0])
    out[valid] = np.einsum("mj,mj->m", coef[cells[valid]], u[valid])
    return out
