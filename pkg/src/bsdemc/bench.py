"""Experiment harness: presets for the benchmark tables, repeated runs, reports.

An experiment is described by an :class:`ExperimentSpec`, which serialises to
a flat JSON document. For each path count ``M`` in ``m_grid`` the solver is run
``repetitions`` times on independent ensembles and the time-zero values are
summarised by their mean and (n-1)-normalised standard deviation.

Seeds: repetition ``r`` at path count ``M`` uses
``SeedSequence(base_seed, spawn_key=(M, r, stream))`` with stream 0 for the
regression paths and stream 1 for Voronoi centers, so any single run can be
reproduced alone and the order of execution never matters.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .bases import (HypercubeSpec, VoronoiSpec, build_gp, build_hc, build_vp,
                    build_vp10)
from .finance import (AsianCall, Call, CallsCombination, DifferentialRates,
                      LinearRiskNeutral, ZeroDriver)
from .forward import AugmentationKind, black_scholes_model, augment, simulate
from .solver import BackwardResult, SolverConfig, backward_solve

THREADS_ENV = "BSDEMC_THREADS"
DEFAULT_M_GRID = [128, 512, 2048, 8192, 32768]


class SpecError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    mu: float
    sigma: float
    s0: float
    maturity: float
    r: float
    R: float
    strikes: list
    payoff: str
    driver: str
    basis: dict
    n_steps: int
    m_grid: list = field(default_factory=lambda: list(DEFAULT_M_GRID))
    augmentation: str = "vanilla"
    scheme: str = "euler"
    repetitions: int = 50
    picard_iters: int = 3
    base_seed: int = 0
    trunc_c0: Optional[float] = None
    truncate: bool = True
    rank_tol: float = 1e-10
    min_norm_coords: str = "y_first"
    name: str = "custom"

    def validate(self) -> "ExperimentSpec":
        if self.repetitions < 2:
            raise SpecError("repetitions must be >= 2 for a standard deviation")
        if not self.m_grid:
            raise SpecError("m_grid must not be empty")
        if any(int(m) < 1 for m in self.m_grid):
            raise SpecError("path counts must be positive")
        if self.n_steps < 1 or self.picard_iters < 1:
            raise SpecError("n_steps and picard_iters must be >= 1")
        if self.payoff not in ("call", "combination", "asian"):
            raise SpecError(f"unknown payoff {self.payoff!r}")
        if self.driver not in ("zero", "linear", "differential"):
            raise SpecError(f"unknown driver {self.driver!r}")
        if self.basis.get("kind") not in ("hc", "vp", "vp10", "gp"):
            raise SpecError(f"unknown basis kind {self.basis.get('kind')!r}")
        if self.scheme not in ("euler", "log_euler"):
            raise SpecError(f"unknown scheme {self.scheme!r}")
        try:
            AugmentationKind(self.augmentation)
            self.solver_config()
        except ValueError as exc:
            raise SpecError(str(exc)) from None
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown spec fields: {sorted(unknown)}")
        required = {f.name for f in fields(cls) if f.default is MISSING and f.default_factory is MISSING}
        missing = required - set(data)
        if missing:
            raise SpecError(f"missing spec fields: {sorted(missing)}")
        return cls(**data).validate()

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    # -- builders

    def model(self):
        return black_scholes_model(self.mu, self.sigma, self.s0, self.maturity)

    def make_driver(self):
        if self.driver == "zero":
            return ZeroDriver()
        if self.driver == "linear":
            return LinearRiskNeutral(self.r, (self.mu - self.r) / self.sigma)
        return DifferentialRates(self.r, self.R, self.mu, self.sigma)

    def make_payoff(self):
        kind = AugmentationKind(self.augmentation)
        if self.payoff == "call":
            return Call(self.strikes[0], kind)
        if self.payoff == "combination":
            return CallsCombination(self.strikes[0], self.strikes[1], kind)
        return AsianCall(self.strikes[0], kind)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(picard_iters=self.picard_iters, rank_tol=self.rank_tol,
                            trunc_c0=self.trunc_c0, truncate=self.truncate,
                            min_norm_coords=self.min_norm_coords)

    def make_basis(self, p0: np.ndarray, seed=None):
        """Basis for one run. Voronoi kinds simulate their centers from ``seed``."""
        b = self.basis
        kind = b["kind"]
        dim = p0.shape[0]
        if kind == "hc":
            if "lower" in b:
                lower = np.broadcast_to(np.asarray(b["lower"], float), (dim,))
                upper = np.broadcast_to(np.asarray(b["upper"], float), (dim,))
                spec = HypercubeSpec.from_bounds(lower, upper, b["edge"])
            else:
                spec = HypercubeSpec(tuple(np.broadcast_to(np.asarray(b["center"], float), (dim,))),
                                     float(b["half_width"]), float(b["edge"]))
            return build_hc(spec, 1, self.n_steps, b.get("outside", "nearest"))
        if kind == "gp":
            shift = scale = None
            if b.get("normalize", True):
                shift, scale = p0, np.maximum(np.abs(p0), 1.0)
            return build_gp(b["d_y"], b["d_z"], dim, 1, shift, scale)
        extra = simulate(self.model(), self.n_steps, int(b["n_centers"]), seed, self.scheme)
        extra = augment(self.augmentation, extra, (self.mu, self.sigma))
        vspec = VoronoiSpec.from_paths(extra.augmented)
        return build_vp(vspec) if kind == "vp" else build_vp10(vspec)


def seed_for(base_seed: int, m: int, rep: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(m), int(rep), int(stream)))


def solve_run(spec: ExperimentSpec, m: int, rep: int) -> BackwardResult:
    """One independent run at path count ``m``: fresh paths, fresh centers, full solve."""
    ens = simulate(spec.model(), spec.n_steps, m, seed_for(spec.base_seed, m, rep, 0), spec.scheme)
    ens = augment(spec.augmentation, ens, (spec.mu, spec.sigma))
    basis = spec.make_basis(ens.augmented[0, 0], seed_for(spec.base_seed, m, rep, 1))
    return backward_solve(spec.solver_config(), ens, basis, spec.make_driver(), spec.make_payoff())


def solve_once(spec: ExperimentSpec, m: int, rep: int) -> float:
    """``y0`` of :func:`solve_run`."""
    return solve_run(spec, m, rep).y0


@dataclass
class GridResult:
    m: int
    mean: float
    std: float
    values: list
    wall_time: float


@dataclass
class ExperimentReport:
    rows: list
    spec: Optional[dict] = None

    def row(self, m: int) -> GridResult:
        for r in self.rows:
            if r.m == m:
                return r
        raise KeyError(m)

    def to_dict(self) -> dict:
        return {"spec": self.spec, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls([GridResult(**r) for r in data["rows"]], data.get("spec"))


def summarize(values) -> tuple[float, float]:
    """Empirical mean and standard deviation with 1/(n-1) normalisation."""
    v = np.asarray(values, dtype=float)
    mean = float(v.sum() / v.size)
    std = math.sqrt(float(((v - mean) ** 2).sum()) / (v.size - 1))
    return mean, std


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(spec: ExperimentSpec, n_jobs: Optional[int] = None,
                   solve: Callable[[ExperimentSpec, int, int], float] = solve_once,
                   rep_order=None) -> ExperimentReport:
    """Run every (M, repetition) pair of ``spec``.

    ``solve`` can be swapped for testing. ``rep_order`` permutes the order in
    which repetitions are executed; results are always reported by index.
    """
    spec.validate()
    n_jobs = n_jobs or default_threads()
    reps = list(rep_order) if rep_order is not None else list(range(spec.repetitions))
    if sorted(reps) != list(range(spec.repetitions)):
        raise SpecError("rep_order must be a permutation of the repetition indices")
    rows = []
    for m in spec.m_grid:
        m = int(m)
        start = time.perf_counter()
        if n_jobs > 1:
            with ThreadPoolExecutor(n_jobs) as pool:
                out = list(pool.map(lambda r: solve(spec, m, r), reps))
        else:
            out = [solve(spec, m, r) for r in reps]
        values = [0.0] * spec.repetitions
        for r, v in zip(reps, out):
            if not math.isfinite(v):
                raise RuntimeError(f"non-finite y0 at M={m}, repetition {r}")
            values[r] = float(v)
        mean, std = summarize(values)
        rows.append(GridResult(m, mean, std, values, time.perf_counter() - start))
    return ExperimentReport(rows, spec.to_dict())


def emit_report(report: ExperimentReport, fmt: str, path) -> None:
    """Write ``report`` as CSV or JSON. Floats keep 17 significant digits."""
    try:
        if fmt == "json":
            with open(path, "w") as fh:
                json.dump(report.to_dict(), fh, indent=2)
        elif fmt == "csv":
            n = max(len(r.values) for r in report.rows)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["M", "mean", "std", "wall_time_s"] + [f"rep_{i}" for i in range(n)])
                for r in report.rows:
                    w.writerow([r.m] + [f"{v:.17g}" for v in (r.mean, r.std, r.wall_time, *r.values)])
        else:
            raise SpecError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path) -> ExperimentReport:
    """Read back a report written by :func:`emit_report` (either format)."""
    with open(path) as fh:
        if str(path).endswith(".json"):
            return ExperimentReport.from_dict(json.load(fh))
        reader = csv.reader(fh)
        next(reader)
        rows = []
        for rec in reader:
            vals = [float(x) for x in rec[1:]]
            rows.append(GridResult(int(rec[0]), vals[0], vals[1], vals[3:], vals[2]))
        return ExperimentReport(rows)


# ---------------------------------------------------------------- presets

_CALL = dict(mu=0.06, sigma=0.2, r=0.04, R=0.06, maturity=0.5, s0=100.0, strikes=[100.0],
             payoff="call", driver="differential")
_COMBO = dict(mu=0.05, sigma=0.2, r=0.01, R=0.06, maturity=0.25, s0=100.0, strikes=[95.0, 105.0],
              payoff="combination", driver="differential")
# On the fine Asian grids many cells hold one to three paths, and exact fits
# there extrapolate wildly; C0 = 100 leaves every value a payoff of this size
# can reach (|y| <= 150) untouched while keeping those fits bounded.
_ASIAN = dict(mu=0.06, sigma=0.2, r=0.1, R=0.1, maturity=1.0, s0=100.0, strikes=[100.0],
              payoff="asian", driver="linear", trunc_c0=100.0)


def _hc(lower, upper, edge):
    return {"kind": "hc", "lower": [lower], "upper": [upper], "edge": edge, "outside": "nearest"}


_COLUMNS = {
    "table1": [
        dict(_CALL, n_steps=5, basis=_hc(60, 140, 5)),
        dict(_CALL, n_steps=10, basis=_hc(60, 140, 1)),
    ],
    "table2": [
        dict(_COMBO, n_steps=5, basis=_hc(60, 140, 5)),
        dict(_COMBO, n_steps=20, basis=_hc(60, 200, 1)),
        dict(_COMBO, n_steps=50, basis=_hc(40, 200, 0.5)),
    ],
    "table3": [
        dict(_COMBO, n_steps=5, basis={"kind": "vp", "n_centers": 16}),
        dict(_COMBO, n_steps=20, basis={"kind": "vp", "n_centers": 64}),
        dict(_COMBO, n_steps=20, basis={"kind": "vp", "n_centers": 10}),
        dict(_COMBO, n_steps=20, basis={"kind": "vp10", "n_centers": 10}),
    ],
    "table4": [
        dict(_COMBO, n_steps=5, basis={"kind": "gp", "d_y": 1, "d_z": 0}),
        dict(_COMBO, n_steps=20, basis={"kind": "gp", "d_y": 2, "d_z": 1}),
        dict(_COMBO, n_steps=50, basis={"kind": "gp", "d_y": 4, "d_z": 2}),
        dict(_COMBO, n_steps=50, basis={"kind": "gp", "d_y": 9, "d_z": 9}),
    ],
    "table5": [
        dict(_ASIAN, n_steps=5, augmentation="asian_average", basis=_hc(60, 200, 5)),
        dict(_ASIAN, n_steps=20, augmentation="asian_average", basis=_hc(60, 200, 1)),
        dict(_ASIAN, n_steps=50, augmentation="asian_average", basis=_hc(60, 200, 0.5)),
    ],
    "table6": [
        dict(_ASIAN, n_steps=20, augmentation="asian_corrected", basis=_hc(60, 200, 1),
             m_grid=[2, 8, 32, 128, 512, 2048, 8192, 32768]),
    ],
}

PRESETS = tuple(_COLUMNS)


def preset(name: str, column: int = 1) -> ExperimentSpec:
    """Configuration of one column (1-based) of a benchmark table."""
    if name not in _COLUMNS:
        raise SpecError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cols = _COLUMNS[name]
    if not 1 <= column <= len(cols):
        raise SpecError(f"{name} has columns 1..{len(cols)}, got {column}")
    data = json.loads(json.dumps(cols[column - 1]))
    data["name"] = f"{name}:{column}"
    return ExperimentSpec(**data).validate()


def preset_columns(name: str) -> int:
    if name not in _COLUMNS:
        raise SpecError(f"unknown preset {name!r}")
    return len(_COLUMNS[name])
