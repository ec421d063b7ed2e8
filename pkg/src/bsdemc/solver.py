"""Backward regression scheme with Picard iterations and smooth truncation.

At each date ``t_k``, going backward from maturity, the pair (Y, Z) is
represented by coefficients on the basis ``p_{l,k}``. Starting from zero
coefficients, ``I`` Picard iterations each solve the empirical least-squares
problem

    min_theta (1/M) sum_m (Y_{k+1}^m + h f(t_k, S_k^m, y^m, z^m) - v_k^m . theta)^2

where ``v_k^m = (p_0^m, p_1^m dW_1^m / sqrt(h), ...)``, and ``(y^m, z^m)`` are the
untruncated values of the previous iterate. Internally the Z coefficients are
held as ``theta_l = sqrt(h) alpha_l``; everything returned uses ``alpha``.

The regression target handed to date ``k - 1`` is the truncated Y at ``k``,
``rho xi(y / rho)`` with ``rho = max(1, C0 |p_{0,k}|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .bases import Basis, PartitionBasis
from .forward import PathEnsemble
from .numkit import DEFAULT_RANK_TOL, BlockMinNorm, InputError, MinNormFactor

XI_KNEE = 1.5


def xi(x):
    """Odd C^2 clamp: identity on ``|x| <= 3/2``, saturating below 2."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    tail = XI_KNEE + 0.5 * np.tanh(2.0 * (ax - XI_KNEE))
    out = np.where(ax <= XI_KNEE, x, np.sign(x) * tail)
    return float(out) if out.ndim == 0 else out


def smooth_truncate(x, rho):
    """``rho * xi(x / rho)``; an infinite ``rho`` disables truncation."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 1.0):
        raise ValueError("truncation radius must be >= 1")
    x = np.asarray(x, dtype=float)
    finite = np.isfinite(rho)
    safe = np.where(finite, rho, 1.0)
    out = np.where(finite, safe * xi(x / safe), x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncationProfile:
    """Radii ``max(1, c0 |p_{l,k}(x)|)``; ``c0 = inf`` switches truncation off."""

    c0: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")

    def radius(self, norms):
        if math.isinf(self.c0):
            return np.full_like(np.asarray(norms, dtype=float), np.inf)
        return np.maximum(1.0, self.c0 * np.asarray(norms, dtype=float))

    @classmethod
    def from_payoff(cls, terminal_values, factor: float = 10.0) -> "TruncationProfile":
        """Default policy: ``c0 = factor * max(1, max |Phi|)`` over the run's paths."""
        return cls(factor * max(1.0, float(np.max(np.abs(terminal_values)))))

    @classmethod
    def disabled(cls) -> "TruncationProfile":
        return cls(math.inf)


def truncation_radius(profile: TruncationProfile, l: int, k: int, x, basis: Basis) -> float:
    p = basis.features(l, k, np.asarray(x, dtype=float))
    return float(profile.radius(np.linalg.norm(p)))


# relative weight of the Z unknowns in the minimal norm; small enough that
# singleton cells keep ~all of their target in Y, large enough that the
# relative rank cut never mistakes a Z column for noise
Y_FIRST_WEIGHT = 1e-2

# multiplier of sqrt(h) applied to the Z regressors in each coordinate choice
_Z_WEIGHTS = {"theta": None, "alpha": 1.0, "y_first": Y_FIRST_WEIGHT}


@dataclass
class SolverConfig:
    """Scheme parameters.

    ``trunc_c0`` None selects the payoff-based default policy; ``truncate``
    False disables truncation. ``block_solver`` routes indicator bases through
    the per-cell solver.

    ``min_norm_coords`` picks the coordinates in which a rank-deficient
    regression takes its minimal-norm solution:

    - ``"theta"``: Z regressors ``p_l dW_l / sqrt(h)``, the normalized vector;
    - ``"alpha"``: Z regressors ``p_l dW_l``;
    - ``"y_first"`` (default): Z regressors ``Y_FIRST_WEIGHT * p_l dW_l``, so
      that an under-determined cell (say a single path) puts its value in Y
      rather than splitting it with Z.

    Full-rank regressions give the same answer in every choice.
    """

    picard_iters: int = 3
    rank_tol: float = DEFAULT_RANK_TOL
    trunc_c0: Optional[float] = None
    truncate: bool = True
    block_solver: bool = True
    min_norm_coords: str = "y_first"
    n_steps: Optional[int] = None
    n_paths: Optional[int] = None

    def __post_init__(self):
        if self.picard_iters < 1:
            raise ValueError("need at least one Picard iteration")
        if self.min_norm_coords not in _Z_WEIGHTS:
            raise ValueError(f"unknown coordinates {self.min_norm_coords!r}")
        for name in ("n_steps", "n_paths"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    def profile(self, terminal_values) -> TruncationProfile:
        if not self.truncate:
            return TruncationProfile.disabled()
        if self.trunc_c0 is not None:
            return TruncationProfile(self.trunc_c0)
        return TruncationProfile.from_payoff(terminal_values)


@dataclass
class CoefficientSet:
    """``alphas[k][l]`` is the coefficient vector of component ``l`` at date ``k``."""

    alphas: list = field(default_factory=list)

    def __getitem__(self, k):
        return self.alphas[k]

    def __len__(self):
        return len(self.alphas)


@dataclass
class BackwardResult:
    coefficients: CoefficientSet
    y0: float
    z0: np.ndarray
    profile: TruncationProfile
    # picard_gaps[k, i] = |theta^{i+1} - theta^i| at date k
    picard_gaps: np.ndarray
    thetas: Optional[list] = None


def regression_row(k: int, m: int, ensemble: PathEnsemble, basis: Basis) -> np.ndarray:
    """``(p_0(P_k^m), p_1(P_k^m) dW_1/sqrt(h), ..., p_q(P_k^m) dW_q/sqrt(h))``."""
    x = ensemble.augmented[m, k]
    dw = ensemble.increments[m, k] / math.sqrt(ensemble.step_h)
    parts = [basis.features(0, k, x)]
    parts += [basis.features(l, k, x) * dw[l - 1] for l in range(1, ensemble.dim_q + 1)]
    return np.concatenate(parts)


def design_matrix(k: int, ensemble: PathEnsemble, basis: Basis) -> np.ndarray:
    """All regression rows at date ``k`` stacked, shape (M, sum_l n_{l,k})."""
    x = ensemble.augmented[:, k]
    dw = ensemble.increments[:, k] / math.sqrt(ensemble.step_h)
    parts = [basis.features(0, k, x)]
    parts += [basis.features(l, k, x) * dw[:, l - 1:l] for l in range(1, ensemble.dim_q + 1)]
    return np.hstack(parts)


class _DenseStep:
    """One date's regression through a dense SVD of the full design."""

    def __init__(self, basis, k, x, dw_scaled, rank_tol, z_scale):
        q = dw_scaled.shape[1]
        self.feats = [basis.features(l, k, x) for l in range(q + 1)]
        self.sizes = [f.shape[1] for f in self.feats]
        design = np.hstack([self.feats[0]] + [self.feats[l] * (z_scale * dw_scaled[:, l - 1:l])
                                              for l in range(1, q + 1)])
        self.factor = MinNormFactor(design, rank_tol)
        self.n_params = design.shape[1]
        self._col_scale = np.ones(self.n_params)
        self._col_scale[self.sizes[0]:] = z_scale

    def split(self, theta):
        return np.split(theta, np.cumsum(self.sizes)[:-1])

    def raw(self, theta):
        """Untruncated y and sqrt(h) z_l per path."""
        parts = self.split(theta)
        return [f @ t for f, t in zip(self.feats, parts)]

    def solve(self, b):
        return self.factor.solve(b).coefficients * self._col_scale

    def flat(self, theta):
        return theta

    def alphas(self, theta, sqrt_h):
        parts = self.split(theta)
        return [parts[0]] + [t / sqrt_h for t in parts[1:]]


class _BlockStep:
    """One date's regression for a partition basis, solved cell by cell."""

    def __init__(self, basis: PartitionBasis, k, x, dw_scaled, rank_tol, z_scale):
        q = dw_scaled.shape[1]
        self.cells = basis.cells(k, x)
        self.n_cells = basis.n_cells(k)
        self.local = [basis.local(l, x) for l in range(q + 1)]
        self.sizes = [loc.shape[1] for loc in self.local]
        u = np.hstack([self.local[0]] + [self.local[l] * (z_scale * dw_scaled[:, l - 1:l])
                                         for l in range(1, q + 1)])
        self.solver = BlockMinNorm(self.cells, u, self.n_cells, rank_tol)
        self.n_params = self.n_cells * u.shape[1]
        self._bounds = np.cumsum([0] + self.sizes)
        self._col_scale = np.ones(u.shape[1])
        self._col_scale[self.sizes[0]:] = z_scale

    def _block(self, theta, l):
        return theta[:, self._bounds[l]:self._bounds[l + 1]]

    def raw(self, theta):
        return [kernels.cell_dot(self.cells, self._block(theta, l), loc)
                for l, loc in enumerate(self.local)]

    def solve(self, b):
        return self.solver.solve(b).coefficients * self._col_scale

    def flat(self, theta):
        return theta.ravel()

    def alphas(self, theta, sqrt_h):
        out = [np.ascontiguousarray(self._block(theta, 0)).ravel()]
        out += [np.ascontiguousarray(self._block(theta, l)).ravel() / sqrt_h
                for l in range(1, len(self.sizes))]
        return out


def _make_step(basis, k, x, dw_scaled, config: SolverConfig, h: float):
    # the least-squares unknowns are theta_l / z_scale, so the minimal-norm
    # choice is made in those coordinates
    weight = _Z_WEIGHTS[config.min_norm_coords]
    z_scale = 1.0 if weight is None else weight * math.sqrt(h)
    if config.block_solver and isinstance(basis, PartitionBasis):
        return _BlockStep(basis, k, x, dw_scaled, config.rank_tol, z_scale)
    return _DenseStep(basis, k, x, dw_scaled, config.rank_tol, z_scale)


def picard_sweep(k: int, ensemble: PathEnsemble, basis: Basis, target, driver,
                 picard_iters: int = 3, config: Optional[SolverConfig] = None,
                 history: bool = False):
    """Coefficients ``(alpha_0, ..., alpha_q)`` at date ``k`` after ``picard_iters`` iterations.

    ``target`` holds the per-path regression target at ``k + 1`` (the payoff
    at the last date, the truncated Y otherwise). With ``history=True`` the
    flat theta iterates ``theta^0 = 0, ..., theta^I`` are returned as well.
    """
    config = config or SolverConfig(picard_iters=picard_iters)
    h = ensemble.step_h
    sqrt_h = math.sqrt(h)
    x = ensemble.augmented[:, k]
    s = ensemble.states[:, k]
    dw_scaled = ensemble.increments[:, k] / sqrt_h
    step = _make_step(basis, k, x, dw_scaled, config, h)
    target = np.asarray(target, dtype=float)
    t = k * h

    theta = None
    iterates = [np.zeros(step.n_params)]
    y_raw = np.zeros(ensemble.n_paths)
    z_raw = np.zeros((ensemble.n_paths, ensemble.dim_q))
    for _ in range(picard_iters):
        rhs = target + h * np.asarray(driver(t, s, y_raw, z_raw), dtype=float)
        theta = step.solve(rhs)
        iterates.append(step.flat(theta))
        raw = step.raw(theta)
        y_raw = raw[0]
        z_raw = np.stack(raw[1:], axis=1) / sqrt_h
    alphas = step.alphas(theta, sqrt_h)
    if history:
        return alphas, iterates, step
    return alphas


def _yz(basis: Basis, alphas, profile: TruncationProfile, k: int, x: np.ndarray, h: float):
    sqrt_h = math.sqrt(h)
    y_raw, n0 = basis.project(0, k, x, alphas[0])
    y = smooth_truncate(y_raw, profile.radius(n0))
    zs = []
    for l in range(1, len(alphas)):
        z_raw, nl = basis.project(l, k, x, alphas[l])
        zs.append(smooth_truncate(sqrt_h * z_raw, profile.radius(nl)) / sqrt_h)
    return np.atleast_1d(y), np.stack([np.atleast_1d(z) for z in zs], axis=-1)


def evaluate_yz(coeffs: CoefficientSet, profile: TruncationProfile, basis: Basis,
                k: int, x, h: float):
    """Truncated ``(y, z)`` at date ``k`` for one state or a batch of states."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    y, z = _yz(basis, coeffs[k], profile, k, np.atleast_2d(x), h)
    if single:
        return float(y[0]), z[0]
    return y, z


def backward_solve(config: SolverConfig, ensemble: PathEnsemble, basis: Basis,
                   driver, payoff, keep_thetas: bool = False) -> BackwardResult:
    """Run the full backward sweep and evaluate ``(y0, z0)`` at ``P_0``."""
    n, m = ensemble.n_steps, ensemble.n_paths
    if config.n_steps is not None and config.n_steps != n:
        raise ValueError(f"ensemble has {n} steps, config expects {config.n_steps}")
    if config.n_paths is not None and config.n_paths != m:
        raise ValueError(f"ensemble has {m} paths, config expects {config.n_paths}")
    h = ensemble.step_h
    p = ensemble.augmented
    terminal = np.asarray(payoff(p[:, n]), dtype=float)
    if not np.all(np.isfinite(terminal)):
        raise InputError("payoff produced non-finite values")
    profile = config.profile(terminal)

    alphas: list = [None] * n
    gaps = np.zeros((n, config.picard_iters))
    thetas = [None] * n if keep_thetas else None
    target = terminal
    for k in range(n - 1, -1, -1):
        alphas[k], iterates, _ = picard_sweep(k, ensemble, basis, target, driver,
                                              config.picard_iters, config, history=True)
        gaps[k] = [np.linalg.norm(b - a) for a, b in zip(iterates[:-1], iterates[1:])]
        if keep_thetas:
            thetas[k] = iterates
        if k > 0:
            y_raw, n0 = basis.project(0, k, p[:, k], alphas[k][0])
            target = smooth_truncate(y_raw, profile.radius(n0))
    coeffs = CoefficientSet(alphas)
    y0, z0 = evaluate_yz(coeffs, profile, basis, 0, p[0, 0], h)
    return BackwardResult(coeffs, y0, z0, profile, gaps, thetas)
