"""Exponential-Euler simulators for the inertial and first-order systems.

Both simulators advance a batch of paths mode by mode in the complex
picture (real part = component 1).  The linear part is propagated
exactly.  Additive noise is sampled exactly: the per-step stochastic
convolution is split into its projection on the Legendre channels of the
step (shared by every simulator, which couples them) plus an independent
residual carrying the missing covariance.  Multiplicative noise uses only
the Brownian increment, evaluated at the left endpoint.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import complex_to_real, first_order_rate, propagator_complex, characteristic_rates
from .errors import InstabilityError, InvalidArgument, PreconditionViolation, RefinementRequired
from .noise import (
    CHANNELS,
    DEFAULT_CHUNK,
    LEGENDRE_ORDER,
    RES1_CHANNEL,
    RES2_CHANNELS,
    DiffusionSpec,
    DriftSpec,
    NoiseSource,
    NoiseSpec,
    PathSeed,
    legendre_basis,
    path_batches,
)
from .quadrature import adaptive_simpson, gauss_legendre
from .spectral import EigenSequence, PhasePoint, SpectralField, _transform, dirichlet_eigens

BLOWUP = 1e8
STEP_RATIO = 10
PSD_TOL = 1e-12


@dataclass(frozen=True)
class SimGrid:
    """Uniform time grid with ``steps * dt == T`` exactly."""

    T: float
    dt: float
    n_modes: int
    collocation_size: int | None = None
    p: float = 2.0

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0):
            raise InvalidArgument("T and dt must be positive")
        steps = round(self.T / self.dt)
        if steps < 1 or abs(steps * self.dt - self.T) > 1e-9 * self.T:
            raise InvalidArgument(f"T={self.T} is not an integer multiple of dt={self.dt}")
        object.__setattr__(self, "dt", self.T / steps)
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise InvalidArgument("n_modes must be a positive integer")
        G = 2 * self.n_modes if self.collocation_size is None else int(self.collocation_size)
        if G < self.n_modes:
            raise InvalidArgument("collocation grid smaller than the mode count")
        object.__setattr__(self, "collocation_size", G)
        if self.p < 1:
            raise InvalidArgument("moment order p must be >= 1")

    @property
    def steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @classmethod
    def for_mu(cls, T, mu, n_modes, collocation_size=None, p=2.0, ratio=STEP_RATIO, dt_max=None):
        """Finest-needed grid with ``dt <= mu / ratio`` (and ``dt <= dt_max``)."""
        limit = mu / ratio if dt_max is None else min(mu / ratio, dt_max)
        steps = int(math.ceil(T / limit - 1e-9))
        return cls(T, T / steps, n_modes, collocation_size, p)

    def refined(self, factor: int = 2) -> "SimGrid":
        return SimGrid(self.T, self.dt / factor, self.n_modes, self.collocation_size, self.p)

    def check_second_order(self, mu):
        if self.dt > mu / STEP_RATIO * (1 + 1e-12):
            raise PreconditionViolation(f"dt={self.dt:g} exceeds mu/{STEP_RATIO}={mu / STEP_RATIO:g}")


# --------------------------------------------------------------------------
# exact Gaussian step
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StepCovariance:
    cov: np.ndarray
    factor: np.ndarray


def _psd_factor(cov, scale):
    w, V = np.linalg.eigh(cov)
    if w[0] < -PSD_TOL * max(scale, 1e-300):
        raise RefinementRequired(f"covariance indefinite: smallest eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def step_covariance(mu, eps, alpha, lam, dt, rtol=1e-12) -> StepCovariance:
    """Covariance ``int_0^dt E(s) N E(s)^T ds`` of one exact step of a single additive mode.

    ``E`` is the real 4x4 propagator on ``(u1, u2, v1, v2)`` and
    ``N = diag(0, 0, (lam/mu)^2, (lam/mu)^2)``.  Returns the matrix and its
    symmetric square root.
    """
    if not (mu > 0 and alpha > 0 and dt > 0):
        raise InvalidArgument("need mu, alpha, dt > 0")
    if lam == 0:
        z = np.zeros((4, 4))
        return StepCovariance(z, z.copy())
    q = (lam / mu) ** 2

    def integrand(s):
        E = complex_to_real(propagator_complex(mu, eps, alpha, s))  # (N, 4, 4)
        Ev = E[..., :, 2:4]
        return q * Ev @ np.swapaxes(Ev, -1, -2)

    cov = adaptive_simpson(integrand, 0.0, dt, rtol=rtol, initial_panels=16)
    cov = 0.5 * (cov + cov.T)
    return StepCovariance(cov, _psd_factor(cov, np.trace(cov)).real)


def _gl_order(rate_scale, dt):
    return 24 + int(math.ceil(2.0 * rate_scale * dt))


def second_order_noise_coefficients(mu, eps, alpha, dt, order=LEGENDRE_ORDER):
    """Legendre projections ``c`` (n, 2, order) and residual factors ``F`` (n, 2, 2).

    ``int_0^dt p(dt - s) dbeta(s) = sum_j c_j xi_j + F zeta`` in law, with
    ``p = (P01, P11)`` the velocity column of the complex propagator.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    s1, s2 = characteristic_rates(mu, eps, alpha)
    nodes, weights = gauss_legendre(_gl_order(float(np.max(np.abs([s1, s2]))), dt), 0.0, dt)
    prop = propagator_complex(mu, eps, alpha[:, None], (dt - nodes)[None, :])  # (n, N, 2, 2)
    p = prop[..., :, 1]  # (n, N, 2)
    phi = legendre_basis(order, dt, nodes)  # (order, N)
    c = np.einsum("knr,jn,n->krj", p, phi, weights)
    G = np.einsum("knr,kns,n->krs", p, p.conj(), weights)
    R = G - np.einsum("krj,ksj->krs", c, c.conj())
    F = np.empty_like(R)
    for k in range(alpha.size):
        F[k] = _psd_factor(0.5 * (R[k] + R[k].conj().T), np.trace(G[k]).real)
    return c, F


def first_order_noise_coefficients(eps, alpha, dt, order=LEGENDRE_ORDER):
    """Projections ``d`` (n, order) and residual scales ``r`` (n,) of ``int_0^dt g(dt - s) dbeta``,
    with ``g(s) = exp(a s) / (eps - i)``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    a = first_order_rate(eps, alpha)
    nodes, weights = gauss_legendre(_gl_order(float(np.max(np.abs(a))), dt), 0.0, dt)
    g = np.exp(a[:, None] * (dt - nodes)[None, :]) / (eps - 1j)
    phi = legendre_basis(order, dt, nodes)
    d = np.einsum("kn,jn,n->kj", g, phi, weights)
    # same rule for the total, so Bessel's inequality keeps the residual nonnegative
    total = np.einsum("kn,n->k", np.abs(g) ** 2, weights)
    res = total - np.sum(np.abs(d) ** 2, axis=1)
    if np.any(res < -PSD_TOL * total):
        raise RefinementRequired("first-order residual variance negative")
    return d, np.sqrt(np.clip(res, 0.0, None))


# --------------------------------------------------------------------------
# steppers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """Everything shared by coupled simulations: spectrum, plug-ins, grid, initial data."""

    eig: EigenSequence
    noise: NoiseSpec
    drift: DriftSpec
    diffusion: DiffusionSpec
    grid: SimGrid
    L: float
    u0: np.ndarray
    v0: np.ndarray

    @classmethod
    def build(cls, noise, drift, diffusion, grid, eig=None, L=math.pi, u0=None, v0=None):
        n = grid.n_modes
        eig = dirichlet_eigens(L, n) if eig is None else eig.truncate(n)
        if noise.n < n:
            raise InvalidArgument(f"noise has {noise.n} intensities for {n} modes")
        noise = noise.truncate(n)
        u0 = default_u0(n) if u0 is None else _coeffs(u0, n)
        v0 = np.zeros(n, dtype=complex) if v0 is None else _coeffs(v0, n)
        return cls(eig, noise, drift, diffusion, grid, float(L), u0, v0)

    @property
    def n(self):
        return self.grid.n_modes

    @property
    def transform(self):
        return _transform(self.n, self.grid.collocation_size, self.L)

    @property
    def alpha(self):
        return self.eig.values[: self.n]


def default_u0(n):
    """Default initial position: coefficients ``(k^-2, 0)``."""
    return (np.arange(1, n + 1, dtype=float) ** -2).astype(complex)


def _coeffs(x, n):
    if isinstance(x, SpectralField):
        c = x.as_complex()
    else:
        x = np.asarray(x)
        c = x if np.iscomplexobj(x) else (x[:, 0] + 1j * x[:, 1] if x.ndim == 2 else x.astype(complex))
    if c.shape != (n,):
        raise InvalidArgument(f"initial data has {c.shape[0]} modes, expected {n}")
    return c.astype(complex)


class _Stepper:
    second_order = False

    def __init__(self, problem: Problem, P: int):
        self.pb = problem
        self.P = P
        self.u = np.broadcast_to(problem.u0, (P, problem.n)).copy()
        self.lam = problem.noise.lam
        self._synth = problem.transform.synth_matrix
        self._anal = problem.transform.analysis_matrix

    # einsum keeps a fixed summation order per entry, so results do not depend on the batch size
    def _grid(self, c):
        return np.einsum("pk,kg->pg", c, self._synth)

    def _coef(self, w):
        return np.einsum("pg,gk->pk", w, self._anal)

    def _drift(self, t):
        if self.pb.drift.is_zero:
            return None
        return self._coef(self.pb.drift(self._grid(self.u), t))

    def _mult_noise(self, xi0):
        dW = math.sqrt(self.pb.grid.dt) * self.lam * xi0
        return self._coef(self.pb.diffusion.apply(self._grid(self.u), self._grid(dW)))

    def _check(self, step):
        size = np.max(np.abs(self.u), initial=0.0)
        if self.second_order:
            size = max(size, np.max(np.abs(self.v) / np.sqrt(self.pb.alpha), initial=0.0))
        if not np.isfinite(size) or size > BLOWUP:
            raise InstabilityError(f"state left the bounded regime at step {step}", step=step)


class SecondOrderStepper(_Stepper):
    """Inertial system ``mu u'' + J_eps u' = -A u + B(u) + G(u) dw``."""

    second_order = True

    def __init__(self, problem: Problem, P: int, mu: float, eps: float):
        if not mu > 0 or eps < 0:
            raise InvalidArgument("need mu > 0 and eps >= 0")
        problem.grid.check_second_order(mu)
        super().__init__(problem, P)
        self.mu, self.eps = float(mu), float(eps)
        self.v = np.broadcast_to(problem.v0, (P, problem.n)).copy()
        E = propagator_complex(mu, eps, problem.alpha, problem.grid.dt)
        self.E = E
        self.kick_u = E[:, 0, 1] / mu
        self.kick_v = E[:, 1, 1] / mu
        self.additive = not problem.diffusion.multiplicative and not problem.noise.is_zero
        if self.additive:
            c, F = second_order_noise_coefficients(mu, eps, problem.alpha, problem.grid.dt)
            scale = (self.lam / mu)[:, None, None]
            self.c, self.F = c * scale, F * scale

    def step(self, xi, t, step):
        u, v = self.u, self.v
        E = self.E
        nu = E[:, 0, 0] * u + E[:, 0, 1] * v
        nv = E[:, 1, 0] * u + E[:, 1, 1] * v
        forcing = self._drift(t)
        forcing = None if forcing is None else forcing * self.pb.grid.dt
        if self.pb.diffusion.multiplicative and not self.pb.noise.is_zero:
            kick = self._mult_noise(xi[..., 0])
            forcing = kick if forcing is None else forcing + kick
        if forcing is not None:
            nu = nu + self.kick_u * forcing
            nv = nv + self.kick_v * forcing
        if self.additive:
            xj = xi[..., :LEGENDRE_ORDER]
            zeta = xi[..., list(RES2_CHANNELS)]
            nu = nu + np.einsum("kj,pkj->pk", self.c[:, 0], xj) + np.einsum("kj,pkj->pk", self.F[:, 0], zeta)
            nv = nv + np.einsum("kj,pkj->pk", self.c[:, 1], xj) + np.einsum("kj,pkj->pk", self.F[:, 1], zeta)
        self.u, self.v = nu, nv
        self._check(step)


class FirstOrderStepper(_Stepper):
    """First-order system ``u' = J_eps^{-1}(-A u + B(u) + G(u) dw)``."""

    def __init__(self, problem: Problem, P: int, eps: float):
        if eps < 0:
            raise InvalidArgument("eps must be nonnegative")
        if eps == 0 and not problem.noise.h6_trace_class:
            raise PreconditionViolation("eps = 0 requires trace-class noise")
        super().__init__(problem, P)
        self.eps = float(eps)
        self.v = None
        self.decay = np.exp(first_order_rate(eps, problem.alpha) * problem.grid.dt)
        self.jinv = 1.0 / (eps - 1j)
        self.additive = not problem.diffusion.multiplicative and not problem.noise.is_zero
        if self.additive:
            d, r = first_order_noise_coefficients(eps, problem.alpha, problem.grid.dt)
            self.d, self.r = d * self.lam[:, None], r * self.lam

    def step(self, xi, t, step):
        forcing = self._drift(t)
        forcing = None if forcing is None else forcing * self.pb.grid.dt
        if self.pb.diffusion.multiplicative and not self.pb.noise.is_zero:
            kick = self._mult_noise(xi[..., 0])
            forcing = kick if forcing is None else forcing + kick
        nu = self.u if forcing is None else self.u + self.jinv * forcing
        nu = self.decay * nu
        if self.additive:
            nu = nu + np.einsum("kj,pkj->pk", self.d, xi[..., :LEGENDRE_ORDER]) + self.r * xi[..., RES1_CHANNEL]
        self.u = nu
        self._check(step)


def drive(factories, problem: Problem, master_seed: int, path_ids, observe, chunk: int = DEFAULT_CHUNK):
    """Run coupled steppers batch by batch on shared noise.

    ``factories`` build steppers for a batch size; ``observe(step, steppers)``
    is called at every grid time (step 0 included) and returns nothing;
    ``observe`` may keep state.  Noise is only drawn when some noise is on.
    """
    grid = problem.grid
    noisy = not problem.noise.is_zero
    for batch in path_batches(path_ids, problem.n):
        steppers = [f(len(batch)) for f in factories]
        observe(0, steppers, batch)
        source = NoiseSource(master_seed, batch, problem.n) if noisy else None
        done = 0
        while done < grid.steps:
            k = min(chunk, grid.steps - done)
            xi = source.next_chunk(k) if noisy else np.zeros((k, len(batch), problem.n, CHANNELS), complex)
            for i in range(k):
                n = done + i
                for s in steppers:
                    s.step(xi[i], n * grid.dt, n + 1)
                observe(n + 1, steppers, batch)
            done += k


# --------------------------------------------------------------------------
# public simulation API
# --------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded states: ``u`` (and ``v`` for the inertial system) of shape ``(paths, steps + 1, n)``."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray | None
    path_ids: list
    master_seed: int

    def position(self, path: int, step: int) -> SpectralField:
        return SpectralField.from_complex(self.u[path, step])

    def phase_point(self, path: int, step: int) -> PhasePoint:
        if self.v is None:
            raise InvalidArgument("first-order trajectories carry no velocity")
        return PhasePoint.from_complex(self.u[path, step], self.v[path, step])

    def write_csv(self, path, path_index: int = 0):
        """Columns ``t, mode, u1, u2, v1, v2``, preceded by a ``# master_seed=...`` line."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# master_seed={self.master_seed} path_id={self.path_ids[path_index]}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mode", "u1", "u2", "v1", "v2"])
            for i, t in enumerate(self.times):
                for k in range(self.u.shape[2]):
                    u = self.u[path_index, i, k]
                    v = 0j if self.v is None else self.v[path_index, i, k]
                    w.writerow([repr(float(t)), k + 1] + [repr(float(x)) for x in (u.real, u.imag, v.real, v.imag)])


def _seed_and_paths(seed, paths):
    if isinstance(seed, PathSeed):
        return seed.master_seed, [seed.path_id] if paths is None else list(paths)
    return int(seed), list(range(1, 2)) if paths is None else list(paths)


def _record(problem, factory, seed, paths):
    master, ids = _seed_and_paths(seed, paths)
    N, n = problem.grid.steps, problem.n
    u = np.empty((len(ids), N + 1, n), complex)
    v = np.empty_like(u) if factory.second_order else None
    offset = [0]

    def observe(step, steppers, batch):
        s = steppers[0]
        sl = slice(offset[0], offset[0] + len(batch))
        u[sl, step] = s.u
        if v is not None:
            v[sl, step] = s.v
        if step == N:
            offset[0] += len(batch)

    drive([factory], problem, master, ids, observe)
    return Trajectory(problem.grid.times, u, v, ids, master)


class _Factory:
    def __init__(self, cls, problem, *args):
        self.cls, self.problem, self.args = cls, problem, args
        self.second_order = cls.second_order

    def __call__(self, P):
        return self.cls(self.problem, P, *self.args)


def simulate_second_order(mu, eps, drift: DriftSpec, diffusion: DiffusionSpec, noise: NoiseSpec,
                          grid: SimGrid, seed, paths=None, eig=None, L=math.pi, u0=None, v0=None) -> Trajectory:
    """Simulate the inertial system on ``paths`` (path ids; default the seed's path or id 1)."""
    pb = Problem.build(noise, drift, diffusion, grid, eig, L, u0, v0)
    return _record(pb, _Factory(SecondOrderStepper, pb, mu, eps), seed, paths)


def simulate_first_order(eps, drift: DriftSpec, diffusion: DiffusionSpec, noise: NoiseSpec,
                         grid: SimGrid, seed, paths=None, eig=None, L=math.pi, u0=None) -> Trajectory:
    """Simulate the first-order system; shares Brownian paths with :func:`simulate_second_order`."""
    pb = Problem.build(noise, drift, diffusion, grid, eig, L, u0)
    return _record(pb, _Factory(FirstOrderStepper, pb, eps), seed, paths)


def coupled_sup(problem: Problem, factory_a, factory_b, seed, paths, metric):
    """Per-path ``max_t metric(a, b)`` for two coupled steppers; ``metric`` returns a (P,) array."""
    master, ids = _seed_and_paths(seed, paths)
    out = np.zeros(len(ids))
    running = {}
    offset = [0]

    def observe(step, steppers, batch):
        val = metric(steppers[0], steppers[1])
        running["sup"] = val if step == 0 else np.maximum(running["sup"], val)
        if step == problem.grid.steps:
            out[offset[0]:offset[0] + len(batch)] = running["sup"]
            offset[0] += len(batch)

    drive([factory_a, factory_b], problem, master, ids, observe)
    return out


def position_gap(a, b):
    return np.sqrt(np.sum(np.abs(a.u - b.u) ** 2, axis=1))


def weighted_gap(mu, alpha):
    def metric(a, b):
        du = np.sum(np.abs(a.u - b.u) ** 2, axis=1)
        dv = np.sum(np.abs(a.v - b.v) ** 2 / alpha, axis=1)
        return np.sqrt(du + mu * dv)
    return metric


def coupled_sup_error(mu, eps, drift, diffusion, noise, grid: SimGrid, seed, p=None, paths=None,
                      eig=None, L=math.pi, u0=None, v0=None):
    """``max_t |u_mu^eps(t) - u_eps(t)|_H^p`` on shared Brownian paths.

    Returns a float for a single path and an array over ``paths`` otherwise.
    The first-order run starts from ``u0``, the position of the inertial one.
    """
    p = grid.p if p is None else p
    pb = Problem.build(noise, drift, diffusion, grid, eig, L, u0, v0)
    vals = coupled_sup(pb, _Factory(SecondOrderStepper, pb, mu, eps), _Factory(FirstOrderStepper, pb, eps),
                       seed, paths, position_gap) ** p
    return float(vals[0]) if vals.size == 1 and paths is None else vals


def lyapunov_iterate(mu, eps, alpha, lam, dt, steps):
    """Covariance after ``steps`` exact steps from a deterministic start: ``C <- E C E^T + C(dt)``."""
    E = complex_to_real(propagator_complex(mu, eps, alpha, dt))
    Q = step_covariance(mu, eps, alpha, lam, dt).cov
    C = np.zeros((4, 4))
    for _ in range(int(steps)):
        C = E @ C @ E.T + Q
    return C
