"""Forward simulation: Brownian increments, Euler schemes and Markov state augmentation.

Random numbers come from numpy's ``PCG64`` bit generator through
``Generator.standard_normal`` (ziggurat transform). A run is reproducible for a
given seed and numpy version.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .numkit import DimensionError


class Scheme(str, enum.Enum):
    EULER = "euler"
    LOG_EULER = "log_euler"


class AugmentationKind(str, enum.Enum):
    VANILLA = "vanilla"
    ASIAN_AVERAGE = "asian_average"
    ASIAN_CORRECTED = "asian_corrected"
    LOOKBACK = "lookback"

    def aug_dim(self, d: int) -> int:
        return d + {"vanilla": 0, "asian_average": 1, "asian_corrected": 1, "lookback": 2}[self.value]


class UnsupportedSchemeError(ValueError):
    pass


@dataclass(frozen=True)
class MarketModel:
    """Drift ``b(t, X)`` and diffusion ``sigma(t, X)`` act on a batch ``X`` of shape (M, d).

    ``drift`` returns (M, d) and ``diffusion`` returns (M, d, q). When the model
    is a Black-Scholes one, ``bs_params`` holds ``(mu, sigma)``.
    """

    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]
    initial_state: np.ndarray
    maturity: float
    dim_q: int = 1
    bs_params: Optional[tuple[float, float]] = None

    @property
    def dim_d(self) -> int:
        return int(np.asarray(self.initial_state).shape[0])


def black_scholes_model(mu: float, sigma: float, s0: float, maturity: float) -> MarketModel:
    """One-asset model ``dS = S (mu dt + sigma dW)``."""
    if maturity <= 0:
        raise ValueError("maturity must be positive")

    def drift(t, x):
        return mu * x

    def diffusion(t, x):
        return (sigma * x)[:, :, None]

    return MarketModel(drift, diffusion, np.array([float(s0)]), float(maturity), 1,
                       (float(mu), float(sigma)))


@dataclass(frozen=True)
class PathEnsemble:
    increments: np.ndarray  # (M, N, q)
    states: np.ndarray      # (M, N+1, d)
    augmented: np.ndarray   # (M, N+1, d')
    step_h: float
    kind: AugmentationKind = AugmentationKind.VANILLA
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.increments.shape[1]

    @property
    def dim_q(self) -> int:
        return self.increments.shape[2]

    @property
    def aug_dim(self) -> int:
        return self.augmented.shape[2]

    def check(self) -> None:
        d = self.states.shape[2]
        if not np.array_equal(self.augmented[:, :, :d], self.states):
            raise AssertionError("augmented state does not start with the forward state")
        if not np.all(self.states[:, 0] == self.states[0, 0]):
            raise AssertionError("paths do not share the initial state")


def draw_increments(n_steps: int, n_paths: int, dim_q: int, h: float, seed) -> np.ndarray:
    """Independent N(0, h) variates of shape (n_paths, n_steps, dim_q)."""
    if min(n_steps, n_paths, dim_q) < 1:
        raise ValueError("n_steps, n_paths and dim_q must be at least 1")
    if not h > 0:
        raise ValueError(f"time step must be positive, got {h}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return np.sqrt(h) * rng.standard_normal((n_paths, n_steps, dim_q))


def simulate(model: MarketModel, n_steps: int, n_paths: int, seed,
             scheme: Scheme | str = Scheme.EULER) -> PathEnsemble:
    """Simulate ``n_paths`` trajectories on ``n_steps`` equidistant dates."""
    scheme = Scheme(scheme)
    h = model.maturity / n_steps
    dw = draw_increments(n_steps, n_paths, model.dim_q, h, seed)
    x0 = np.asarray(model.initial_state, dtype=np.float64)
    states = np.empty((n_paths, n_steps + 1, x0.shape[0]))
    states[:, 0] = x0
    if scheme is Scheme.LOG_EULER:
        if model.bs_params is None:
            raise UnsupportedSchemeError("log-Euler needs a Black-Scholes model")
        mu, sigma = model.bs_params
        log_growth = (mu - 0.5 * sigma ** 2) * h + sigma * dw[:, :, 0]
        states[:, 1:, 0] = x0[0] * np.exp(np.cumsum(log_growth, axis=1))
    elif model.bs_params is not None:
        # same recursion as the generic branch, without the per-step callbacks
        mu, sigma = model.bs_params
        factors = 1.0 + mu * h + sigma * dw[:, :, 0]
        states[:, 1:, 0] = x0[0] * np.cumprod(factors, axis=1)
    else:
        for k in range(n_steps):
            t = k * h
            x = states[:, k]
            states[:, k + 1] = (x + model.drift(t, x) * h
                                + np.einsum("mdq,mq->md", model.diffusion(t, x), dw[:, k]))
    return PathEnsemble(dw, states, states, h)


def augment(kind: AugmentationKind | str, ensemble: PathEnsemble,
            bs_params: Optional[tuple[float, float]] = None) -> PathEnsemble:
    """Append the extra state coordinates that make the payoff Markovian.

    ``bs_params = (mu, sigma)`` is required for the corrected Asian average.
    """
    kind = AugmentationKind(kind)
    s = ensemble.states
    if kind is AugmentationKind.VANILLA:
        return replace(ensemble, augmented=s, kind=kind)
    if s.shape[2] != 1:
        raise DimensionError(f"{kind.value} augmentation is defined for d = 1 only")
    path = s[:, :, 0]
    n1 = path.shape[1]
    if kind is AugmentationKind.ASIAN_AVERAGE:
        extra = [np.cumsum(path, axis=1) / np.arange(1, n1 + 1)]
    elif kind is AugmentationKind.ASIAN_CORRECTED:
        if bs_params is None:
            raise ValueError("corrected Asian average needs (mu, sigma)")
        mu, sigma = bs_params
        h = ensemble.step_h
        weighted = path[:, :-1] * (1.0 + 0.5 * mu * h + 0.5 * sigma * ensemble.increments[:, :, 0])
        avg = np.empty_like(path)
        avg[:, 0] = path[:, 0]
        avg[:, 1:] = np.cumsum(weighted, axis=1) / np.arange(1, n1)
        extra = [avg]
    else:
        extra = [np.minimum.accumulate(path, axis=1), np.maximum.accumulate(path, axis=1)]
    aug = np.concatenate([s] + [e[:, :, None] for e in extra], axis=2)
    return replace(ensemble, augmented=aug, kind=kind)


def dump_ensemble(ensemble: PathEnsemble, path) -> None:
    """Write one CSV row per (m, k): ``m, k, dW_1..dW_q, S_1..S_d, P_1..P_d'``.

    The increment columns are empty at ``k = N``. Debugging aid only.
    """
    q, d, dp = ensemble.dim_q, ensemble.states.shape[2], ensemble.aug_dim
    header = (["m", "k"] + [f"dW{i}" for i in range(1, q + 1)]
              + [f"S{i}" for i in range(1, d + 1)] + [f"P{i}" for i in range(1, dp + 1)])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for m in range(ensemble.n_paths):
            for k in range(ensemble.n_steps + 1):
                dw = (ensemble.increments[m, k] if k < ensemble.n_steps else [None] * q)
                vals = [str(m), str(k)] + ["" if v is None else repr(float(v)) for v in dw]
                vals += [repr(float(v)) for v in ensemble.states[m, k]]
                vals += [repr(float(v)) for v in ensemble.augmented[m, k]]
                fh.write(",".join(vals) + "\n")
