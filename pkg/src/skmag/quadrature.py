"""Quadrature rules used by the checkers and the exact noise sampler."""
from __future__ import annotations

import numpy as np
from scipy.integrate import simpson

from .errors import RefinementRequired


def composite_simpson(f, a: float, b: float, steps: int):
    """Composite Simpson rule on ``steps`` (rounded up to even) panels; ``f`` is vectorized."""
    steps = max(2, int(steps) + (int(steps) % 2))
    s = np.linspace(a, b, steps + 1)
    return simpson(f(s), x=s, axis=0)


def richardson_simpson(f, a: float, b: float, steps: int):
    """Simpson value on ``steps`` panels and the half-step error estimate ``|S_h - S_2h| / 15``."""
    steps = max(4, int(steps) + (-int(steps)) % 4)
    s = np.linspace(a, b, steps + 1)
    vals = f(s)
    fine = simpson(vals, x=s, axis=0)
    coarse = simpson(vals[::2], x=s[::2], axis=0)
    return fine, np.max(np.abs(np.asarray(fine) - np.asarray(coarse))) / 15.0


def adaptive_simpson(f, a: float, b: float, rtol: float = 1e-12, atol: float = 0.0,
                     max_depth: int = 40, initial_panels: int = 16):
    """Globally adaptive Simpson quadrature for vector- or matrix-valued integrands.

    ``f`` maps a 1-d array of abscissae to an array whose first axis runs
    over them.  Panels are bisected breadth-first until the local
    Richardson estimate meets its share of ``max(atol, rtol * |I|)``.
    """
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    width = (hi - lo)
    shape = (-1,) + (1,) * (np.ndim(f_lo) - 1)
    whole = (width.reshape(shape) / 6.0) * (f_lo + 4 * f_mid + f_hi)
    estimate = np.sum(whole, axis=0)
    tol_total = max(atol, rtol * float(np.max(np.abs(estimate))))
    if tol_total == 0.0:
        return estimate
    tol = np.full(lo.size, tol_total / initial_panels)
    total = np.zeros_like(estimate)
    for _ in range(max_depth):
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f_lm, f_rm = f(lm), f(rm)
        half = (width.reshape(shape) / 12.0)
        left = half * (f_lo + 4 * f_lm + f_mid)
        right = half * (f_mid + 4 * f_rm + f_hi)
        delta = left + right - whole
        err = np.max(np.abs(delta).reshape(lo.size, -1), axis=1)
        done = err <= 15.0 * tol
        total = total + np.sum((left + right + delta / 15.0)[done], axis=0)
        if np.all(done):
            return total
        keep = ~done
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        mid = np.concatenate([lm[keep], rm[keep]])
        f_lo = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi = np.concatenate([f_mid[keep], f_hi[keep]])
        f_mid = np.concatenate([f_lm[keep], f_rm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) / 2.0
        width = hi - lo
    raise RefinementRequired(f"adaptive Simpson did not reach rtol={rtol:g} within {max_depth} bisections")


def gauss_legendre(order: int, a: float, b: float):
    """Nodes and weights of the Gauss-Legendre rule mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w
