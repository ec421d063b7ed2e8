"""Minimal-norm least squares and conditioning diagnostics.

Every regression in the backward sweep reduces to ``min |b - A theta|`` where
``A`` may be rank deficient (empty hypercube cells, a deterministic state at
time zero, collinear monomials). Solutions are taken through the SVD so the
minimal-norm minimizer is returned in every case.

Two solvers share the same contract:

* :class:`MinNormFactor` factors a dense design once and solves for any number
  of right-hand sides (the Picard iterations change only the target).
* :class:`BlockMinNorm` handles designs that are block diagonal after grouping
  rows by cell, as produced by indicator bases. Each cell is solved on its own
  small Gram matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

DEFAULT_RANK_TOL = 1e-10
# eigenvalue floor for Gram-based block solves, relative to the largest one
_GRAM_NOISE = 64 * np.finfo(float).eps


class InputError(ValueError):
    """Non-finite or otherwise unusable numerical input."""


class DimensionError(ValueError):
    """Array shapes that do not fit together."""


@dataclass(frozen=True)
class LsSolution:
    coefficients: np.ndarray
    numerical_rank: int
    residual_norm: float


def _check_design(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"design must be a nonempty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("design matrix has non-finite entries")
    return a


def _check_rhs(b, m: int) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (m,):
        raise DimensionError(f"right-hand side must have shape ({m},), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise InputError("right-hand side has non-finite entries")
    return b


class MinNormFactor:
    """Thin SVD of a design, reusable across right-hand sides."""

    def __init__(self, a, rank_tol: float = DEFAULT_RANK_TOL):
        if not 0.0 < rank_tol < 1.0:
            raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
        self.a = _check_design(a)
        self.rank_tol = rank_tol
        u, s, vt = np.linalg.svd(self.a, full_matrices=False)
        keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
        self.rank = int(keep.sum())
        self._u = u[:, keep]
        self._s = s[keep]
        self._vt = vt[keep]

    @property
    def shape(self):
        return self.a.shape

    def solve(self, b) -> LsSolution:
        b = _check_rhs(b, self.a.shape[0])
        theta = self._vt.T @ ((self._u.T @ b) / self._s)
        resid = float(np.linalg.norm(b - self.a @ theta))
        return LsSolution(theta, self.rank, resid)


def solve_min_norm(a, b, rank_tol: float = DEFAULT_RANK_TOL) -> LsSolution:
    """Minimal-norm minimizer of ``(1/M) sum_m (b_m - A_m . theta)^2``.

    Parameters
    ----------
    a : array_like, shape (M, n)
        Design matrix, all entries finite.
    b : array_like, shape (M,)
        Targets.
    rank_tol : float
        Singular values at or below ``rank_tol * s_max`` are treated as zero.

    Returns
    -------
    LsSolution
    """
    return MinNormFactor(a, rank_tol).solve(b)


def gram_diagnostic(a) -> tuple[float, float]:
    """Smallest and largest eigenvalues of the empirical Gram matrix ``A^T A / M``."""
    a = _check_design(a)
    lam = np.linalg.eigvalsh(a.T @ a / a.shape[0])
    return float(max(lam[0], 0.0)), float(lam[-1])


def _sym_pinv(gram: np.ndarray, rank_tol: float):
    """Batched pseudo-inverse of symmetric PSD matrices, shape (C, p, p)."""
    lam, vec = np.linalg.eigh(gram)
    top = lam[:, -1:]
    floor = np.maximum(rank_tol ** 2, _GRAM_NOISE) * top
    keep = (lam > floor) & (top > 0)
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    pinv = np.einsum("cij,cj,ckj->cik", vec, inv, vec)
    return pinv, keep.sum(axis=1)


class BlockMinNorm:
    """Minimal-norm least squares for designs that decouple by cell.

    Row ``m`` of the implied design is zero outside the column block of cell
    ``cells[m]`` and equals ``u[m]`` there; rows with ``cells[m] == -1`` are
    identically zero. Coefficients come back as an array of shape
    ``(n_cells, p)``, one block per cell, zero for empty cells.

    The per-cell Gram matrix squares the singular values, so its rank cut is
    ``max(rank_tol**2, 64 eps)`` on eigenvalues, that is a singular-value cut
    of about ``1.2e-7`` relative to the block's largest singular value.
    """

    def __init__(self, cells, u, n_cells: int, rank_tol: float = DEFAULT_RANK_TOL):
        if not 0.0 < rank_tol < 1.0:
            raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2:
            raise DimensionError(f"local design must be 2-D, got shape {u.shape}")
        cells = np.asarray(cells, dtype=np.int64)
        if cells.shape != (u.shape[0],):
            raise DimensionError("cells and local design disagree on row count")
        if not np.all(np.isfinite(u)):
            raise InputError("local design has non-finite entries")
        self.cells = cells
        self.u = u
        self.n_cells = int(n_cells)
        gram, self.counts = kernels.cell_gram(cells, u, self.n_cells)
        self._pinv, ranks = _sym_pinv(gram, rank_tol)
        self.rank = int(ranks.sum())

    def solve(self, b) -> LsSolution:
        b = _check_rhs(b, self.u.shape[0])
        theta = self._apply(b)
        # one refinement step on the residual (corrected semi-normal
        # equations) recovers the accuracy the Gram matrix squares away
        resid = b - kernels.cell_dot(self.cells, theta, self.u)
        theta = theta + self._apply(resid)
        fitted = kernels.cell_dot(self.cells, theta, self.u)
        return LsSolution(theta, self.rank, float(np.linalg.norm(b - fitted)))

    def _apply(self, b):
        cross = kernels.cell_cross(self.cells, self.u, b, self.n_cells)
        return np.einsum("cij,cj->ci", self._pinv, cross)

    def dense_design(self) -> np.ndarray:
        """The implied full design, columns ordered cell-major. For testing."""
        m, p = self.u.shape
        a = np.zeros((m, self.n_cells * p))
        rows = np.nonzero(self.cells >= 0)[0]
        for j in range(p):
            a[rows, self.cells[rows] * p + j] = self.u[rows, j]
        return a
