"""Monte Carlo sweeps over the mass and friction parameters, the counterexample and rate fits."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InstabilityError, InvalidArgument, PreconditionViolation, UndefinedFit
from .noise import TAG_SCALAR, DiffusionSpec, DriftSpec, NoiseSpec, PathSeed, stream
from .sde import (
    STEP_RATIO,
    FirstOrderStepper,
    Problem,
    SecondOrderStepper,
    SimGrid,
    _Factory,
    coupled_sup,
    position_gap,
    weighted_gap,
)
from .spectral import dirichlet_eigens

SCHEMA_VERSION = 1
Z95 = 1.96


@dataclass(frozen=True)
class ExperimentConfig:
    """Geometry, physics and Monte Carlo settings shared by the sweeps."""

    L: float = math.pi
    n_modes: int = 32
    collocation_size: int | None = None
    T: float = 0.5
    dt: float | None = None
    p: float = 2.0
    M: int = 200
    master_seed: int = 20240601
    noise_law: str = "power"
    noise_r: float = 1.0
    noise_values: tuple = ()
    drift: str = "sine"
    drift_a: float = 1.0
    diffusion: str = "additive_identity"
    diffusion_a: float = 0.0
    u0: tuple = ()
    v0: tuple = ()
    refine_check: bool = False

    def noise(self) -> NoiseSpec:
        if self.noise_law == "power":
            return NoiseSpec.power(self.noise_r, self.n_modes)
        if self.noise_law == "zero":
            return NoiseSpec.zero(self.n_modes)
        if self.noise_law == "explicit":
            return NoiseSpec.explicit(self.noise_values)
        raise InvalidArgument(f"unknown noise law {self.noise_law!r}")

    def drift_spec(self) -> DriftSpec:
        if self.drift == "zero":
            return DriftSpec.zero()
        if self.drift == "sine":
            return DriftSpec.sine(self.drift_a)
        if self.drift == "linear":
            return DriftSpec.linear(self.drift_a)
        raise InvalidArgument(f"unknown drift kind {self.drift!r}")

    def diffusion_spec(self) -> DiffusionSpec:
        if self.diffusion == "additive_identity":
            return DiffusionSpec.additive()
        if self.diffusion == "diagonal_nemytskii":
            return DiffusionSpec.nemytskii_sine(self.diffusion_a)
        raise InvalidArgument(f"unknown diffusion kind {self.diffusion!r}")

    def initial(self):
        u0 = np.asarray(self.u0, dtype=complex) if len(self.u0) else None
        v0 = np.asarray(self.v0, dtype=complex) if len(self.v0) else None
        return u0, v0

    def problem(self, grid: SimGrid) -> Problem:
        u0, v0 = self.initial()
        return Problem.build(self.noise(), self.drift_spec(), self.diffusion_spec(), grid,
                             dirichlet_eigens(self.L, self.n_modes), self.L, u0, v0)

    def grid(self, mu_min: float | None = None) -> SimGrid:
        """Common grid: ``dt`` from the config, refined to ``mu_min / 10`` when needed."""
        dt = self.T / 1000 if self.dt is None else self.dt
        if mu_min is not None:
            dt = min(dt, mu_min / STEP_RATIO)
        steps = int(math.ceil(self.T / dt - 1e-9))
        return SimGrid(self.T, self.T / steps, self.n_modes, self.collocation_size, self.p)


@dataclass
class SweepRow:
    param: float
    estimate: float
    stderr: float
    paths: int
    p: float
    lower: float | None = None
    flagged: str | None = None


@dataclass
class SweepTable:
    """Rows sorted by parameter, descending."""

    name: str
    rows: list = field(default_factory=list)
    master_seed: int | None = None
    meta: dict = field(default_factory=dict)

    def add(self, row: SweepRow):
        self.rows.append(row)
        self.rows.sort(key=lambda r: -r.param)

    @property
    def params(self):
        return np.array([r.param for r in self.rows])

    @property
    def estimates(self):
        return np.array([r.estimate for r in self.rows])

    @property
    def stderrs(self):
        return np.array([r.stderr for r in self.rows])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# master_seed={self.master_seed}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "estimate", "stderr", "paths", "p"])
            for r in self.rows:
                w.writerow([repr(float(r.param)), repr(float(r.estimate)), repr(float(r.stderr)), r.paths, repr(float(r.p))])

    def as_dict(self):
        return {"name": self.name, "master_seed": self.master_seed, "rows": [asdict(r) for r in self.rows],
                "meta": self.meta}


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def summarize(values, param, p) -> SweepRow:
    values = np.asarray(values, dtype=float)
    m = values.size
    se = float(np.std(values, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    est = float(np.mean(values))
    return SweepRow(float(param), est, se, m, p, est - Z95 * se)


def _paths(M):
    if int(M) != M or M < 1:
        raise InvalidArgument(f"path count must be a positive integer, got {M}")
    return list(range(1, int(M) + 1))


def _run_rows(table, params, runner, config, M, p):
    for param in params:
        try:
            table.add(summarize(runner(param), param, p))
        except InstabilityError as exc:
            table.add(SweepRow(float(param), float("nan"), float("nan"), M, p, None, f"unstable at step {exc.step}"))
    return table


def _refinement(table, runner_refined, param):
    """Relative change of the row ``param`` under ``dt / 2``."""
    coarse = next(r for r in table.rows if r.param == param).estimate
    fine = float(np.mean(runner_refined(param)))
    change = abs(fine - coarse) / max(abs(fine), 1e-300)
    table.meta["refinement"] = {"param": param, "coarse": coarse, "fine": fine, "relative_change": change,
                                "ok": change < 0.05}


def mu_sweep(eps, mu_list, config: ExperimentConfig, M=None) -> SweepTable:
    """``E max_t |u_mu^eps - u_eps|_H^p`` for each mass, on one common grid and seed."""
    if not eps > 0:
        raise PreconditionViolation("the small-mass sweep needs eps > 0")
    M = config.M if M is None else M
    ids = _paths(M)
    mu_list = [float(m) for m in mu_list]
    base = config.grid(min(mu_list))

    def runner_on(grid):
        pb = config.problem(grid)

        def run(mu):
            a = _Factory(SecondOrderStepper, pb, mu, eps)
            b = _Factory(FirstOrderStepper, pb, eps)
            return coupled_sup(pb, a, b, config.master_seed, ids, position_gap) ** config.p
        return run

    table = SweepTable("mu_sweep", master_seed=config.master_seed, meta={"eps": eps, "dt": base.dt})
    _run_rows(table, mu_list, runner_on(base), config, M, config.p)
    if config.refine_check:
        _refinement(table, runner_on(base.refined()), min(mu_list))
    return table


def eps_sweep_first_order(eps_list, config: ExperimentConfig, M=None) -> SweepTable:
    """``E max_t |u_eps - u_0|_H^p`` on shared noise; needs trace-class noise."""
    M = config.M if M is None else M
    ids = _paths(M)
    grid = config.grid()

    def runner_on(grid):
        pb = config.problem(grid)
        if not pb.noise.h6_trace_class:
            raise PreconditionViolation("the friction limit needs trace-class noise")

        def run(eps):
            if eps == 0:
                return np.zeros(len(ids))
            a = _Factory(FirstOrderStepper, pb, eps)
            b = _Factory(FirstOrderStepper, pb, 0.0)
            return coupled_sup(pb, a, b, config.master_seed, ids, position_gap) ** config.p
        return run

    table = SweepTable("eps_sweep_first_order", master_seed=config.master_seed, meta={"dt": grid.dt})
    _run_rows(table, [float(e) for e in eps_list], runner_on(grid), config, M, config.p)
    if config.refine_check:
        _refinement(table, runner_on(grid.refined()), min(e for e in eps_list if e > 0))
    return table


def eps_sweep_second_order(mu, eps_list, config: ExperimentConfig, M=None) -> SweepTable:
    """``E max_t |z_mu^eps - z_mu^0|_{H(mu)}^p`` on shared noise."""
    M = config.M if M is None else M
    ids = _paths(M)
    grid = config.grid(mu)
    pb = config.problem(grid)
    if not pb.noise.h6_trace_class:
        raise PreconditionViolation("the friction limit needs trace-class noise")
    metric = weighted_gap(mu, pb.alpha)

    def run(eps):
        if eps == 0:
            return np.zeros(len(ids))
        a = _Factory(SecondOrderStepper, pb, mu, eps)
        b = _Factory(SecondOrderStepper, pb, mu, 0.0)
        return coupled_sup(pb, a, b, config.master_seed, ids, metric) ** config.p

    table = SweepTable("eps_sweep_second_order", master_seed=config.master_seed, meta={"mu": mu, "dt": grid.dt})
    _run_rows(table, [float(e) for e in eps_list], run, config, M, config.p)
    z0 = np.concatenate([np.abs(pb.u0) ** 2, mu * np.abs(pb.v0) ** 2 / pb.alpha])
    table.meta["initial_weighted_norm"] = float(math.sqrt(np.sum(z0)))
    table.meta["T"] = grid.T
    return table


def failure_floor(mu_list, config: ExperimentConfig, M=None) -> SweepTable:
    """``E max_t |u_mu - u|_H^p`` without friction, with 95% lower confidence bounds."""
    M = config.M if M is None else M
    ids = _paths(M)
    mu_list = [float(m) for m in mu_list]
    grid = config.grid(min(mu_list))
    pb = config.problem(grid)
    if not pb.noise.h6_trace_class:
        raise PreconditionViolation("the frictionless first-order system needs trace-class noise")

    def run(mu):
        a = _Factory(SecondOrderStepper, pb, mu, 0.0)
        b = _Factory(FirstOrderStepper, pb, 0.0)
        return coupled_sup(pb, a, b, config.master_seed, ids, position_gap) ** config.p

    table = SweepTable("failure_floor", master_seed=config.master_seed, meta={"dt": grid.dt})
    return _run_rows(table, mu_list, run, config, M, config.p)


@dataclass(frozen=True)
class VarianceResult:
    empirical_var: float
    stderr: float
    closed_form: float


def counterexample_variance(mu, t, steps, M, master_seed=0) -> VarianceResult:
    """Sample variance of ``sum_i sin(s_i/mu) dB_i`` against ``t/2 - (mu/4) sin(2t/mu)``."""
    if M < 2:
        raise InvalidArgument("sample variance needs at least two paths")
    dt = t / steps
    if dt > mu / 20 * (1 + 1e-12):
        raise PreconditionViolation(f"dt={dt:g} exceeds mu/20={mu / 20:g}")
    weights = math.sqrt(dt) * np.sin(dt * np.arange(steps) / mu)
    vals = np.empty(int(M))
    for i in range(int(M)):
        g = stream(PathSeed(int(master_seed), i + 1), 0, 0, TAG_SCALAR)
        vals[i] = g.standard_normal(steps) @ weights
    var = float(np.var(vals, ddof=1))
    m4 = float(np.mean((vals - vals.mean()) ** 4))
    se = math.sqrt(max(m4 - var**2, 0.0) / M)
    closed = t / 2 - mu / 4 * math.sin(2 * t / mu)
    return VarianceResult(var, se, closed)


def rate_fit(table: SweepTable) -> RateFit:
    """Least-squares line through ``(log param, log estimate)``."""
    rows = [r for r in table.rows if r.param > 0 and np.isfinite(r.estimate)]
    if len(rows) < 3:
        raise UndefinedFit(f"rate fit needs at least three rows, got {len(rows)}")
    x = np.log([r.param for r in rows])
    est = np.array([r.estimate for r in rows])
    if np.any(est <= 0):
        raise UndefinedFit("rate fit needs positive estimates")
    y = np.log(est)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(r2))


def monotone_within(table: SweepTable, k: float = 2.0) -> bool:
    """Each estimate is at most the previous one plus ``k`` combined standard errors."""
    est, se = table.estimates, table.stderrs
    return bool(np.all(est[1:] <= est[:-1] + k * np.hypot(se[1:], se[:-1])))


def write_summary(path, tables, flags: dict, fits: dict | None = None, master_seed=None):
    summary = {
        "schema_version": SCHEMA_VERSION,
        "master_seed": master_seed,
        "tables": [t.as_dict() for t in tables],
        "fits": {k: asdict(v) for k, v in (fits or {}).items()},
        "flags": flags,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
