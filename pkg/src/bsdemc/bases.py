"""Function bases for the regressions.

A basis supplies, for each time index ``k`` and each component ``l`` (0 for Y,
``1..q`` for the Z components), a feature map ``x -> p_{l,k}(x)`` on the
augmented state. All feature maps are vectorised: they take a batch of shape
(M, d') and return (M, n_{l,k}).

Indicator-type bases (hypercubes, Voronoi cells, Voronoi cells with local
polynomials) subclass :class:`PartitionBasis`. Their features are a short local
block placed at the column range of the cell containing ``x``, which is what the
block least-squares solver exploits.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .numkit import DimensionError


class BasisSpecError(ValueError):
    pass


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise DimensionError(f"expected states of dimension {dim}, got {x.shape[1]}")
    return x, single


class Basis:
    """Common interface. ``n_steps`` is the number of time indices ``k = 0..N-1``."""

    kind: str
    dim: int
    dim_q: int = 1
    n_steps: Optional[int] = None

    def size(self, l: int, k: int) -> int:
        raise NotImplementedError

    def features(self, l: int, k: int, x) -> np.ndarray:
        raise NotImplementedError

    def project(self, l: int, k: int, x: np.ndarray, coef: np.ndarray):
        """Values ``coef . p_{l,k}(x)`` and norms ``|p_{l,k}(x)|`` for a (M, d') batch."""
        feats = self.features(l, k, x)
        return feats @ coef, np.sqrt(np.einsum("mj,mj->m", feats, feats))

    def _check_index(self, l: int, k: int) -> None:
        if not 0 <= l <= self.dim_q:
            raise IndexError(f"component index {l} outside 0..{self.dim_q}")
        if k < 0 or (self.n_steps is not None and k >= self.n_steps):
            raise IndexError(f"time index {k} outside 0..{self.n_steps - 1}")


def evaluate(basis: Basis, l: int, k: int, x) -> np.ndarray:
    """Feature vector ``p_{l,k}(x)`` for one state (1-D ``x``) or a batch (2-D)."""
    return basis.features(l, k, x)


class PartitionBasis(Basis):
    """Features that are nonzero only on the block of the cell holding ``x``."""

    def n_cells(self, k: int) -> int:
        raise NotImplementedError

    def cells(self, k: int, x: np.ndarray) -> np.ndarray:
        """Cell index per row of a (M, d') batch; -1 when ``x`` lies in no cell."""
        raise NotImplementedError

    def local(self, l: int, x: np.ndarray) -> np.ndarray:
        """Local block values per row, shape (M, block_size(l))."""
        if self.block_size(l) == 1:
            return np.ones((x.shape[0], 1))
        return np.hstack([np.ones((x.shape[0], 1)), x])

    def block_size(self, l: int) -> int:
        return 1

    def size(self, l: int, k: int) -> int:
        self._check_index(l, k)
        return self.n_cells(k) * self.block_size(l)

    def features(self, l: int, k: int, x) -> np.ndarray:
        self._check_index(l, k)
        x, single = _as_batch(x, self.dim)
        cells = self.cells(k, x)
        b = self.block_size(l)
        out = np.zeros((x.shape[0], self.n_cells(k) * b))
        rows = np.nonzero(cells >= 0)[0]
        loc = self.local(l, x[rows])
        for j in range(b):
            out[rows, cells[rows] * b + j] = loc[:, j]
        return out[0] if single else out

    def project(self, l: int, k: int, x: np.ndarray, coef: np.ndarray, cells=None):
        self._check_index(l, k)
        if cells is None:
            cells = self.cells(k, x)
        b = self.block_size(l)
        loc = self.local(l, x)
        values = kernels.cell_dot(cells, np.reshape(coef, (self.n_cells(k), b)), loc)
        return values, self.feature_norm(l, k, x, cells)

    def feature_norm(self, l: int, k: int, x: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Euclidean norm of ``p_{l,k}`` per row, given precomputed cells."""
        if self.block_size(l) == 1:
            return (cells >= 0).astype(np.float64)
        loc = self.local(l, x)
        return np.where(cells >= 0, np.sqrt(np.einsum("mj,mj->m", loc, loc)), 0.0)


@dataclass(frozen=True)
class HypercubeSpec:
    """Box ``prod_j (center_j - R, center_j + R]`` cut into cubes of edge ``edge``."""

    center: tuple[float, ...]
    half_width: float
    edge: float

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float], edge: float) -> "HypercubeSpec":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        widths = upper - lower
        if not np.allclose(widths, widths[0]):
            raise BasisSpecError("hypercube domain must have equal side lengths")
        return cls(tuple(0.5 * (lower + upper)), float(widths[0]) / 2.0, float(edge))

    @property
    def cells_per_axis(self) -> int:
        return int(round(2.0 * self.half_width / self.edge))


class HypercubeBasis(PartitionBasis):
    """Indicators of the cubes of a :class:`HypercubeSpec`.

    ``outside`` decides what happens to states outside the box: ``"zero"``
    gives them the zero feature vector, ``"nearest"`` assigns them to the
    closest boundary cube (coordinatewise clamping of the cell index).
    """

    kind = "hc"
    OUTSIDE_POLICIES = ("zero", "nearest")

    def __init__(self, spec: HypercubeSpec, dim_q: int = 1, n_steps: Optional[int] = None,
                 outside: str = "zero"):
        if outside not in self.OUTSIDE_POLICIES:
            raise BasisSpecError(f"unknown out-of-domain policy {outside!r}")
        self.outside = outside
        if not (spec.edge > 0 and spec.half_width > 0):
            raise BasisSpecError("hypercube edge and half width must be positive")
        ratio = 2.0 * spec.half_width / spec.edge
        per_axis = round(ratio)
        if per_axis < 1 or abs(ratio - per_axis) > 1e-3 * per_axis:
            raise BasisSpecError(f"2R/edge = {ratio} is not close to an integer")
        self.spec = spec
        self.dim = len(spec.center)
        self.dim_q = dim_q
        self.n_steps = n_steps
        self.per_axis = per_axis
        self.lower = np.asarray(spec.center, dtype=float) - spec.half_width

    def n_cells(self, k: int) -> int:
        return self.per_axis ** self.dim

    def cells(self, k: int, x: np.ndarray) -> np.ndarray:
        return kernels.hc_cells(x, self.lower, self.spec.edge, self.per_axis,
                                clamp=self.outside == "nearest")


def build_hc(spec: HypercubeSpec, dim_q: int = 1, n_steps: Optional[int] = None,
             outside: str = "zero") -> HypercubeBasis:
    return HypercubeBasis(spec, dim_q, n_steps, outside)


@dataclass(frozen=True)
class VoronoiSpec:
    """Centers per time index: ``centers_per_time[k]`` has shape (n_k, d')."""

    centers_per_time: tuple[np.ndarray, ...]

    @property
    def n_centers(self) -> int:
        return max(c.shape[0] for c in self.centers_per_time)

    @classmethod
    def from_paths(cls, augmented: np.ndarray) -> "VoronoiSpec":
        """Centers from extra simulated paths, shape (n_paths, N+1, d').

        Identical points at a date (all extra paths start at ``P_0``) are
        merged, keeping first occurrences in order.
        """
        centers = []
        for k in range(augmented.shape[1] - 1):
            pts = augmented[:, k, :]
            _, first = np.unique(pts, axis=0, return_index=True)
            centers.append(np.ascontiguousarray(pts[np.sort(first)]))
        return cls(tuple(centers))


class VoronoiBasis(PartitionBasis):
    """Indicators of the nearest-center cells; ties go to the lowest center index."""

    kind = "vp"

    def __init__(self, spec: VoronoiSpec, dim_q: int = 1):
        if not spec.centers_per_time:
            raise BasisSpecError("Voronoi spec needs centers for at least one date")
        dims = {c.shape[1] for c in spec.centers_per_time}
        if len(dims) != 1:
            raise BasisSpecError("centers have inconsistent dimensions")
        for k, c in enumerate(spec.centers_per_time):
            if c.shape[0] < 1:
                raise BasisSpecError(f"no centers at date {k}")
            if np.unique(c, axis=0).shape[0] != c.shape[0]:
                raise BasisSpecError(f"duplicate Voronoi centers at date {k}")
        self.spec = spec
        self.centers = [np.ascontiguousarray(c, dtype=float) for c in spec.centers_per_time]
        self.dim = dims.pop()
        self.dim_q = dim_q
        self.n_steps = len(self.centers)

    def n_cells(self, k: int) -> int:
        return self.centers[k].shape[0]

    def cells(self, k: int, x: np.ndarray) -> np.ndarray:
        return kernels.nearest_center(x, self.centers[k])


class VoronoiLocalLinearBasis(VoronoiBasis):
    """Voronoi cells carrying ``(1, x_1, ..., x_d')`` for Y and ``1`` for each Z."""

    kind = "vp10"

    def block_size(self, l: int) -> int:
        return 1 + self.dim if l == 0 else 1


def build_vp(spec: VoronoiSpec, dim_q: int = 1) -> VoronoiBasis:
    return VoronoiBasis(spec, dim_q)


def build_vp10(spec: VoronoiSpec, dim_q: int = 1) -> VoronoiLocalLinearBasis:
    return VoronoiLocalLinearBasis(spec, dim_q)


def monomial_exponents(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Exponent tuples of total degree <= ``degree`` in graded lexicographic order."""
    out = []
    for total in range(degree + 1):
        level = []
        for combo in combinations_with_replacement(range(dim), total):
            e = [0] * dim
            for j in combo:
                e[j] += 1
            level.append(tuple(e))
        out.extend(sorted(level, reverse=True))
    return out


class PolynomialBasis(Basis):
    """Global monomials of total degree <= ``d_y`` for Y and <= ``d_z`` for Z.

    Monomials are taken in ``(x - shift) / scale``; the defaults give raw
    monomials. Any shift/scale spans the same polynomial space, and a shift near
    the data keeps high-degree designs well conditioned.
    """

    kind = "gp"

    def __init__(self, d_y: int, d_z: int, dim: int, dim_q: int = 1,
                 shift=None, scale=None):
        if d_y < 0 or d_z < 0 or dim < 1:
            raise BasisSpecError("degrees must be >= 0 and dimension >= 1")
        self.d_y, self.d_z, self.dim, self.dim_q = int(d_y), int(d_z), int(dim), dim_q
        self.shift = np.zeros(dim) if shift is None else np.broadcast_to(np.asarray(shift, float), (dim,)).copy()
        self.scale = np.ones(dim) if scale is None else np.broadcast_to(np.asarray(scale, float), (dim,)).copy()
        if np.any(self.scale <= 0):
            raise BasisSpecError("scale must be positive")
        self._exp = {0: np.array(monomial_exponents(dim, self.d_y)),
                     1: np.array(monomial_exponents(dim, self.d_z))}

    def size(self, l: int, k: int) -> int:
        self._check_index(l, k)
        return comb(self.dim + (self.d_y if l == 0 else self.d_z), self.dim)

    def features(self, l: int, k: int, x) -> np.ndarray:
        self._check_index(l, k)
        x, single = _as_batch(x, self.dim)
        xs = (x - self.shift) / self.scale
        exps = self._exp[0 if l == 0 else 1]
        out = np.prod(xs[:, None, :] ** exps[None, :, :], axis=2)
        return out[0] if single else out


def build_gp(d_y: int, d_z: int, dim: int, dim_q: int = 1, shift=None, scale=None) -> PolynomialBasis:
    return PolynomialBasis(d_y, d_z, dim, dim_q, shift, scale)
