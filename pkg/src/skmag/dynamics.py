"""Exact per-mode propagators and deterministic Duhamel integrals.

On one spatial mode with eigenvalue ``alpha`` the second-order system reads

    mu u'' + J_eps u' + alpha u = 0,      J_eps = [[eps, 1], [-1, eps]].

Identifying R^2 with C, ``J_0`` acts as multiplication by ``-i`` and
``J_eps`` as multiplication by ``eps - i``, so the mode is a complex
scalar ODE ``mu w'' + (eps - i) w' + alpha w = 0`` with characteristic
rates solving ``mu s^2 + (eps - i) s + alpha = 0``.  The first-order
semigroup ``T_eps`` multiplies mode k by ``exp(-alpha_k t / (eps - i))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidArgument, RefinementRequired
from .spectral import EigenSequence, PhasePoint, SpectralField

CONFLUENT_TOL = 1e-8

__all__ = [
    "j_matrix",
    "j_inverse",
    "exp_j_scaled",
    "characteristic_rates",
    "propagator_complex",
    "complex_to_real",
    "generator_matrix",
    "ModePropagator",
    "second_order_propagator",
    "apply_S_mu_eps",
    "first_order_rate",
    "apply_T_eps",
    "apply_T0",
    "duhamel_first_component",
    "duhamel_first_order",
]


def j_matrix(eps: float) -> np.ndarray:
    """``J_eps = J_0 + eps I`` with the skew magnetic coupling ``J_0 = [[0, 1], [-1, 0]]``."""
    return np.array([[eps, 1.0], [-1.0, eps]])


def j_inverse(eps: float) -> np.ndarray:
    return np.array([[eps, -1.0], [1.0, eps]]) / (1.0 + eps * eps)


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def exp_j_scaled(eps: float, t: float) -> np.ndarray:
    """Closed form of ``exp(t J_eps^{-1})``: a rotation by ``t/(1+eps^2)`` scaled by ``exp(eps t/(1+eps^2))``."""
    d = 1.0 + eps * eps
    return np.exp(eps * t / d) * _rotation(t / d)


def _check_mode_params(mu, eps, alpha):
    if not np.all(np.asarray(mu) > 0):
        raise InvalidArgument(f"mu must be positive, got {mu}")
    if not np.all(np.asarray(alpha) > 0):
        raise InvalidArgument("alpha must be positive")
    if not np.all(np.asarray(eps) >= 0):
        raise InvalidArgument(f"eps must be nonnegative, got {eps}")


def characteristic_rates(mu, eps, alpha):
    """Roots ``(slow, fast)`` of ``mu s^2 + (eps - i) s + alpha = 0``.

    The fast root is computed from the cancellation-free branch of the
    quadratic formula and the slow one from the root product ``alpha/mu``,
    so both stay accurate when ``mu alpha`` is tiny.
    """
    b = eps - 1j
    alpha = np.asarray(alpha, dtype=float)
    disc = b * b - 4.0 * mu * alpha
    sq = np.sqrt(disc + 0j)
    sq = np.where((np.conj(b) * sq).real >= 0, sq, -sq)
    q = -0.5 * (b + sq)
    return alpha / q, q / mu


def _expm_taylor(m: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring Taylor exponential for a stack of small matrices."""
    m = np.asarray(m, dtype=complex)
    norm = np.max(np.abs(m).sum(axis=-1), axis=-1, initial=0.0)
    squarings = int(max(0, np.ceil(np.log2(max(float(np.max(norm)), 1e-300) / 0.25))))
    a = m / 2.0**squarings
    eye = np.broadcast_to(np.eye(m.shape[-1], dtype=complex), m.shape)
    out, term = eye.copy(), eye.copy()
    for j in range(1, 24):
        term = term @ a / j
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def propagator_complex(mu, eps, alpha, t):
    """Complex 2x2 propagators of ``(w, w')``, broadcast over ``alpha`` and ``t``.

    Returns an array of shape ``broadcast(alpha, t).shape + (2, 2)``.
    """
    _check_mode_params(mu, eps, alpha)
    alpha, t = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(t, dtype=float))
    s1, s2 = characteristic_rates(mu, eps, alpha)
    d = s1 - s2
    e1 = np.exp(s1 * t)
    e2 = np.exp(s2 * t)
    # e1 - e2 without cancellation at small t
    diff = -e1 * np.expm1((s2 - s1) * t)
    out = np.empty(alpha.shape + (2, 2), dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        out[..., 0, 0] = (s1 * e2 - s2 * e1) / d
        out[..., 0, 1] = diff / d
        out[..., 1, 0] = -(alpha / mu) * diff / d
        out[..., 1, 1] = (s1 * e1 - s2 * e2) / d
    origin = t == 0
    if np.any(origin):
        out[origin] = np.eye(2)
    b = eps - 1j
    confluent = np.abs(b * b - 4.0 * mu * alpha) < CONFLUENT_TOL
    if np.any(confluent):
        gen = np.zeros(alpha.shape + (2, 2), dtype=complex)
        gen[..., 0, 1] = 1.0
        gen[..., 1, 0] = -alpha / mu
        gen[..., 1, 1] = -b / mu
        gen = gen * t[..., None, None]
        out[confluent] = _expm_taylor(gen[confluent])
    return out


def complex_to_real(p: np.ndarray) -> np.ndarray:
    """Real ``(..., 4, 4)`` form of complex ``(..., 2, 2)`` acting on ``(u1, u2, v1, v2)``."""
    p = np.asarray(p)
    out = np.empty(p.shape[:-2] + (4, 4))
    for i in range(2):
        for j in range(2):
            c = p[..., i, j]
            out[..., 2 * i, 2 * j] = c.real
            out[..., 2 * i, 2 * j + 1] = -c.imag
            out[..., 2 * i + 1, 2 * j] = c.imag
            out[..., 2 * i + 1, 2 * j + 1] = c.real
    return out


def generator_matrix(mu: float, eps: float, alpha: float) -> np.ndarray:
    """Real 4x4 generator ``[[0, I], [-(alpha/mu) I, -J_eps/mu]]``."""
    g = np.zeros((4, 4))
    g[0:2, 2:4] = np.eye(2)
    g[2:4, 0:2] = -(alpha / mu) * np.eye(2)
    g[2:4, 2:4] = -j_matrix(eps) / mu
    return g


@dataclass(frozen=True)
class ModePropagator:
    mu: float
    eps: float
    alpha: float
    t: float
    matrix: np.ndarray

    def __matmul__(self, other):
        if isinstance(other, ModePropagator):
            return self.matrix @ other.matrix
        return self.matrix @ other


def second_order_propagator(mu: float, eps: float, alpha: float, t: float) -> ModePropagator:
    """Exact ``exp(t A)`` of one mode of the damped magnetic wave system."""
    p = propagator_complex(mu, eps, alpha, t)
    return ModePropagator(float(mu), float(eps), float(alpha), float(t), complex_to_real(p))


def apply_S_mu_eps(mu: float, eps: float, t: float, z: PhasePoint, eig: EigenSequence) -> PhasePoint:
    """Apply the group ``S_mu^eps(t)`` mode by mode (negative t allowed)."""
    if z.n > len(eig):
        raise InvalidArgument(f"state has {z.n} modes but only {len(eig)} eigenvalues")
    p = propagator_complex(mu, eps, eig.values[: z.n], t)
    u, v = z.u.as_complex(), z.v.as_complex()
    return PhasePoint.from_complex(
        p[:, 0, 0] * u + p[:, 0, 1] * v,
        p[:, 1, 0] * u + p[:, 1, 1] * v,
    )


def first_order_rate(eps, alpha):
    """Complex rate ``-alpha / (eps - i)`` of ``T_eps`` on a mode."""
    return -np.asarray(alpha, dtype=float) / (eps - 1j)


def apply_T_eps(eps: float, t: float, u: SpectralField, eig: EigenSequence) -> SpectralField:
    """Apply ``T_eps(t) = exp(t J_eps^{-1} A)``; ``eps = 0`` is the isometric group ``T_0``."""
    if eps < 0:
        raise InvalidArgument(f"eps must be nonnegative, got {eps}")
    if u.n > len(eig):
        raise InvalidArgument(f"field has {u.n} modes but only {len(eig)} eigenvalues")
    rate = first_order_rate(eps, eig.values[: u.n])
    return SpectralField.from_complex(np.exp(rate * t) * u.as_complex())


def apply_T0(t: float, u: SpectralField, eig: EigenSequence) -> SpectralField:
    return apply_T_eps(0.0, t, u, eig)


def _path_array(psi):
    if isinstance(psi, (list, tuple)) and psi and isinstance(psi[0], SpectralField):
        return np.stack([f.as_complex() for f in psi])
    psi = np.asarray(psi)
    if np.iscomplexobj(psi):
        return psi
    if psi.ndim == 3 and psi.shape[-1] == 2:
        return psi[..., 0] + 1j * psi[..., 1]
    raise InvalidArgument("path must be a list of SpectralField, complex (N+1, n) or real (N+1, n, 2)")


def _simpson_with_check(values, dt, rtol):
    result = simpson(values, dx=dt, axis=0)
    if rtol is not None:
        n_int = values.shape[0] - 1
        if n_int >= 4 and n_int % 2 == 0:
            coarse = simpson(values[::2], dx=2 * dt, axis=0)
            err = np.max(np.abs(result - coarse)) / 15.0
            scale = max(np.max(np.abs(result)), 1e-300)
            if err > rtol * scale:
                raise RefinementRequired(
                    f"Simpson half-step disagreement {err:.3e} exceeds {rtol:g} relative"
                )
    return result


def duhamel_first_component(mu, eps, psi, dt, eig: EigenSequence, rtol=None) -> SpectralField:
    """``(1/mu) int_0^t Pi_1 S_mu^eps(t - s)(0, psi(s)) ds`` with ``t = (len(psi) - 1) dt``.

    ``psi`` is sampled on the uniform grid ``0, dt, ..., t``.  The kernel
    varies on the scale ``mu``, so ``dt > mu/10`` is refused.
    """
    if dt > mu / 10:
        raise RefinementRequired(f"dt={dt:g} exceeds mu/10={mu / 10:g}")
    vals = _path_array(psi)
    n_pts, n = vals.shape
    if n_pts < 2:
        return SpectralField.zeros(n)
    lags = dt * np.arange(n_pts - 1, -1, -1)
    p = propagator_complex(mu, eps, eig.values[:n][None, :], lags[:, None])
    integrand = p[..., 0, 1] * vals / mu
    return SpectralField.from_complex(_simpson_with_check(integrand, dt, rtol))


def duhamel_first_order(eps, psi, dt, eig: EigenSequence, rtol=None) -> SpectralField:
    """``int_0^t T_eps(t - s) J_eps^{-1} psi(s) ds``, the small-mass limit of the above."""
    vals = _path_array(psi)
    n_pts, n = vals.shape
    if n_pts < 2:
        return SpectralField.zeros(n)
    lags = dt * np.arange(n_pts - 1, -1, -1)
    kernel = np.exp(first_order_rate(eps, eig.values[:n])[None, :] * lags[:, None]) / (eps - 1j)
    return SpectralField.from_complex(_simpson_with_check(kernel * vals, dt, rtol))
