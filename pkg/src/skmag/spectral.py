"""Spectral representation of planar fields on a Dirichlet interval.

A planar field ``u: (0, L) -> R^2`` is stored through its coefficients on
the orthonormal sine basis ``e_k(x) = sqrt(2/L) sin(k pi x / L)``, one
R^2 vector per spatial mode.  Both R^2 components of a mode share the
Laplacian eigenvalue ``alpha_k``, so the per-mode dynamics only ever see
the scalar ``alpha_k``.

Internally the simulators identify R^2 with C via ``(a, b) -> a + ib``;
``SpectralField.as_complex`` and ``SpectralField.from_complex`` move
between the two views.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "EigenSequence",
    "SpectralField",
    "PhasePoint",
    "SineTransform",
    "dirichlet_eigens",
    "explicit_eigens",
    "power_law_eigens",
    "sobolev_norm",
    "phase_norm",
    "weighted_phase_norm",
    "project",
    "collocation_points",
    "synthesize",
    "analyze",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EigenSequence:
    """Positive nondecreasing Dirichlet-Laplacian eigenvalues."""

    values: np.ndarray
    source: str = "explicit_list"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidArgument("eigenvalues must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise InvalidArgument("eigenvalues must be finite and positive")
        if np.any(np.diff(vals) < 0):
            raise InvalidArgument("eigenvalues must be nondecreasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    def __getitem__(self, item):
        return self.values[item]

    def truncate(self, n: int) -> "EigenSequence":
        if not 1 <= n <= len(self):
            raise InvalidArgument(f"cannot truncate {len(self)} eigenvalues to {n}")
        return EigenSequence(self.values[:n], self.source, dict(self.params))


def dirichlet_eigens(L: float, n: int) -> EigenSequence:
    """Eigenvalues ``(k pi / L)^2``, k = 1..n, of ``-d^2/dx^2`` on (0, L)."""
    if not (np.isfinite(L) and L > 0):
        raise InvalidArgument(f"interval length must be positive, got {L}")
    if int(n) != n or n < 1:
        raise InvalidArgument(f"mode count must be a positive integer, got {n}")
    k = np.arange(1, int(n) + 1, dtype=float)
    return EigenSequence((k * np.pi / L) ** 2, "dirichlet_interval", {"L": float(L)})


def explicit_eigens(values) -> EigenSequence:
    return EigenSequence(values, "explicit_list")


def power_law_eigens(c: float, q: float, n: int) -> EigenSequence:
    """``alpha_k = c k^q``; stands in for the spectrum of a general domain."""
    if c <= 0 or q < 0:
        raise InvalidArgument("power law needs c > 0 and q >= 0")
    if int(n) != n or n < 1:
        raise InvalidArgument(f"mode count must be a positive integer, got {n}")
    k = np.arange(1, int(n) + 1, dtype=float)
    return EigenSequence(c * k**q, "power_law", {"c": float(c), "q": float(q)})


@dataclass(frozen=True)
class SpectralField:
    """Truncated coefficients of a planar field, shape ``(n, 2)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim == 1 and c.size == 2:
            c = _frozen(c.reshape(1, 2))
        if c.ndim != 2 or c.shape[1] != 2:
            raise InvalidArgument(f"coefficients must have shape (n, 2), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "SpectralField":
        return cls(np.zeros((n, 2)))

    @classmethod
    def from_complex(cls, c) -> "SpectralField":
        c = np.asarray(c, dtype=complex)
        return cls(np.stack([c.real, c.imag], axis=-1))

    def as_complex(self) -> np.ndarray:
        return self.coeffs[:, 0] + 1j * self.coeffs[:, 1]

    def __add__(self, other):
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PhasePoint:
    """State ``(u, v)`` of the second-order system, u in H^theta, v in H^(theta-1)."""

    u: SpectralField
    v: SpectralField

    def __post_init__(self):
        if self.u.n != self.v.n:
            raise InvalidArgument(f"position has {self.u.n} modes, velocity {self.v.n}")

    @property
    def n(self) -> int:
        return self.u.n

    @classmethod
    def from_complex(cls, u, v) -> "PhasePoint":
        return cls(SpectralField.from_complex(u), SpectralField.from_complex(v))

    def __sub__(self, other):
        return PhasePoint(self.u - other.u, self.v - other.v)


def _eig_for(field_: SpectralField, eig: EigenSequence) -> np.ndarray:
    if field_.n > len(eig):
        raise InvalidArgument(f"field has {field_.n} modes but only {len(eig)} eigenvalues")
    return eig.values[: field_.n]


def sobolev_norm(field_: SpectralField, theta: float, eig: EigenSequence) -> float:
    """``|u|_{H^theta} = sqrt(sum_k alpha_k^theta |c_k|^2)``."""
    alpha = _eig_for(field_, eig)
    sq = np.sum(field_.coeffs**2, axis=1)
    return float(np.sqrt(np.sum(alpha**theta * sq)))


def phase_norm(z: PhasePoint, theta: float, eig: EigenSequence) -> float:
    return float(np.hypot(sobolev_norm(z.u, theta, eig), sobolev_norm(z.v, theta - 1, eig)))


def weighted_phase_norm(z: PhasePoint, mu: float, eig: EigenSequence) -> float:
    """Mass-weighted norm ``sqrt(|u|_H^2 + mu |v|_{H^-1}^2)``."""
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu}")
    return float(np.sqrt(sobolev_norm(z.u, 0.0, eig) ** 2 + mu * sobolev_norm(z.v, -1.0, eig) ** 2))


def project(field_: SpectralField, m: int) -> SpectralField:
    """Zero every coefficient with mode index above ``m``."""
    if int(m) != m or not 0 <= m <= field_.n:
        raise InvalidArgument(f"projection level {m} outside [0, {field_.n}]")
    c = np.array(field_.coeffs)
    c[int(m):] = 0.0
    return SpectralField(c)


def collocation_points(grid_size: int, L: float) -> np.ndarray:
    """Interior points ``j L / (grid_size + 1)``, j = 1..grid_size."""
    return np.arange(1, grid_size + 1) * L / (grid_size + 1)


class SineTransform:
    """Dense discrete sine transform pair between n modes and a collocation grid.

    ``synth`` maps coefficients (last axis n) to grid values (last axis
    grid_size); ``analyze`` is its left inverse for grid_size >= n.  Both
    accept real or complex arrays and act on the last axis.
    """

    def __init__(self, n: int, grid_size: int, L: float):
        if grid_size < n:
            raise InvalidArgument(f"collocation grid of {grid_size} points cannot resolve {n} modes")
        if not L > 0:
            raise InvalidArgument(f"interval length must be positive, got {L}")
        self.n, self.grid_size, self.L = int(n), int(grid_size), float(L)
        self.points = collocation_points(self.grid_size, self.L)
        k = np.arange(1, self.n + 1)
        basis = np.sqrt(2.0 / L) * np.sin(np.pi * np.outer(k, self.points) / L)  # (n, G)
        self.synth_matrix = basis
        # midpoint-type rule with weight L/(G+1) is exact for the discrete sine orthogonality
        self.analysis_matrix = basis.T * (L / (grid_size + 1))  # (G, n)

    def synth(self, coeffs):
        return coeffs @ self.synth_matrix

    def analyze(self, values):
        return values @ self.analysis_matrix


@lru_cache(maxsize=64)
def _transform(n: int, grid_size: int, L: float) -> SineTransform:
    return SineTransform(n, grid_size, L)


def synthesize(field_: SpectralField, grid_size: int, L: float) -> np.ndarray:
    """Values of the field at the collocation points, shape ``(grid_size, 2)``."""
    tr = _transform(field_.n, int(grid_size), float(L))
    return tr.synth(field_.coeffs.T).T


def analyze(values, L: float, n: int | None = None) -> SpectralField:
    """Sine coefficients of collocation values ``(grid_size, 2)``, truncated to n modes."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != 2:
        raise InvalidArgument(f"values must have shape (grid_size, 2), got {values.shape}")
    grid_size = values.shape[0]
    n = grid_size if n is None else int(n)
    tr = _transform(n, grid_size, float(L))
    return SpectralField(tr.analyze(values.T).T)
