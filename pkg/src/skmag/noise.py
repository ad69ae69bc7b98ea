"""Noise covariance, drift and diffusion plug-ins, and counter-based Gaussian streams.

Every scalar Brownian motion ``beta_k`` (per path, mode and R^2 component)
owns its own Philox stream keyed by ``(master_seed, packed(path, tag, mode,
component))``, so any increment is a pure function of those indices and
of the step number.  Each step consumes ``CHANNELS`` standard normals from
the stream:

* channels ``0..LEGENDRE_ORDER-1`` are the normalized Legendre coefficients
  ``xi_j = int phi_j dbeta`` of the white noise on the step, so the
  Brownian increment is ``sqrt(dt) * xi_0``;
* the remaining channels are independent residuals used by the exact
  Gaussian samplers to top up the covariance that the Legendre
  projection misses.

Because every simulator reads the same ``xi_j``, runs with different
``mu`` or ``eps`` are driven by the same Brownian path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgument
from .spectral import EigenSequence

LEGENDRE_ORDER = 4
CHANNELS = LEGENDRE_ORDER + 3
RES2_CHANNELS = (LEGENDRE_ORDER, LEGENDRE_ORDER + 1)
RES1_CHANNEL = LEGENDRE_ORDER + 2

DEFAULT_CHUNK = 128
MAX_STREAMS_PER_BATCH = 16384

TAG_FIELD = 0
TAG_SCALAR = 1

_MODE_BITS = 19
_TAG_BITS = 4


# --------------------------------------------------------------------------
# covariance sequences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal covariance ``Q e_k = lambda_k e_k`` on both R^2 components.

    ``law`` is ``"explicit"`` or ``"power"`` (``lambda_k = k^-r``).  The
    class flags are derived from the sequence, using the power-law tail
    for ``"power"`` and treating explicit lists as finite.
    """

    lam: np.ndarray
    law: str = "explicit"
    r: float | None = None

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        lam.setflags(write=False)
        if lam.ndim != 1 or lam.size == 0:
            raise InvalidArgument("noise intensities must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise InvalidArgument("noise intensities must be finite and nonnegative")
        if self.law not in ("explicit", "power"):
            raise InvalidArgument(f"unknown noise law {self.law!r}")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def explicit(cls, lam) -> "NoiseSpec":
        return cls(lam, "explicit")

    @classmethod
    def power(cls, r: float, n: int) -> "NoiseSpec":
        if int(n) != n or n < 1:
            raise InvalidArgument(f"mode count must be a positive integer, got {n}")
        k = np.arange(1, int(n) + 1, dtype=float)
        return cls(k ** (-float(r)), "power", float(r))

    @classmethod
    def zero(cls, n: int) -> "NoiseSpec":
        return cls(np.zeros(int(n)), "explicit")

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def is_zero(self) -> bool:
        return not np.any(self.lam)

    @property
    def h7_bounded(self) -> bool:
        if self.law == "power":
            return self.r >= 0
        return True

    @property
    def h6_trace_class(self) -> bool:
        if self.law == "power":
            return 2 * self.r > 1
        return True

    def h5(self, delta: float, eig: EigenSequence) -> bool:
        """Whether ``sum lambda_k^2 / alpha_k^(1-delta)`` converges."""
        if not 0 < delta < 1:
            raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
        if self.law != "power":
            return True
        q = eigen_growth(eig)
        return 2 * self.r + q * (1 - delta) > 1

    def truncate(self, n: int) -> "NoiseSpec":
        if not 1 <= n <= self.n:
            raise InvalidArgument(f"cannot truncate {self.n} intensities to {n}")
        return NoiseSpec(self.lam[:n], self.law, self.r)


def eigen_growth(eig: EigenSequence) -> float:
    """Growth exponent q in ``alpha_k ~ k^q`` (exact for the built-in families)."""
    if eig.source == "dirichlet_interval":
        return 2.0
    if eig.source == "power_law":
        return float(eig.params["q"])
    if len(eig) < 4:
        return 0.0
    half = len(eig) // 2
    k = np.arange(half + 1, len(eig) + 1)
    return float(np.polyfit(np.log(k), np.log(eig.values[half:]), 1)[0])


# --------------------------------------------------------------------------
# drift and diffusion
# --------------------------------------------------------------------------

def _complex_sin(w):
    return np.sin(w.real) + 1j * np.sin(w.imag)


@dataclass(frozen=True)
class DriftSpec:
    """Nemytskii drift ``[B(u)](xi) = b(u(xi))`` evaluated on collocation values.

    ``kind`` is one of ``zero``, ``linear`` (``b(u) = a u``), ``sine``
    (``b(u) = a (sin u1, sin u2)``) or ``custom``.  A custom ``func`` maps
    real grid values of shape ``(..., G, 2)`` and a time to the same shape.
    """

    kind: str = "zero"
    a: float = 0.0
    lipschitz: float = 0.0
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "sine", "custom"):
            raise InvalidArgument(f"unknown drift kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise InvalidArgument("custom drift needs a callable")
        if self.lipschitz < 0:
            raise InvalidArgument("Lipschitz constant must be nonnegative")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear(cls, a: float):
        return cls("linear", float(a), abs(float(a)))

    @classmethod
    def sine(cls, a: float):
        return cls("sine", float(a), abs(float(a)))

    @classmethod
    def custom(cls, func, lipschitz: float):
        return cls("custom", 0.0, float(lipschitz), func)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind in ("linear", "sine") and self.a == 0)

    def __call__(self, w: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Apply ``b`` to complex grid values ``w`` (real part = component 1)."""
        if self.kind == "zero":
            return np.zeros_like(w)
        if self.kind == "linear":
            return self.a * w
        if self.kind == "sine":
            return self.a * _complex_sin(w)
        real = np.stack([w.real, w.imag], axis=-1)
        out = np.asarray(self.func(real, t), dtype=float)
        return out[..., 0] + 1j * out[..., 1]


@dataclass(frozen=True)
class DiffusionSpec:
    """``additive_identity`` or ``diagonal_nemytskii`` with ``g(u) = 1 + a sin(u)`` per component."""

    kind: str = "additive_identity"
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("additive_identity", "diagonal_nemytskii"):
            raise InvalidArgument(f"unknown diffusion kind {self.kind!r}")
        if self.kind == "diagonal_nemytskii" and abs(self.a) >= 1:
            raise InvalidArgument("g = 1 + a sin(u) needs |a| < 1 to stay nondegenerate")

    @classmethod
    def additive(cls):
        return cls("additive_identity")

    @classmethod
    def nemytskii_sine(cls, a: float):
        return cls("diagonal_nemytskii", float(a))

    @property
    def multiplicative(self) -> bool:
        return self.kind == "diagonal_nemytskii"

    @property
    def lipschitz(self) -> float:
        return abs(self.a) if self.multiplicative else 0.0

    def apply(self, w: np.ndarray, dw: np.ndarray) -> np.ndarray:
        """Pointwise ``g(w) dw`` on complex grid values."""
        if not self.multiplicative:
            return dw
        g1 = 1.0 + self.a * np.sin(w.real)
        g2 = 1.0 + self.a * np.sin(w.imag)
        return g1 * dw.real + 1j * g2 * dw.imag


def sampled_lipschitz(op, n: int, grid_size: int, L: float, pairs: int = 10000,
                      rng: np.random.Generator | None = None, scale: float = 3.0) -> float:
    """Largest sampled ratio ``|B(x) - B(y)|_H / |x - y|_H`` of a Galerkin Nemytskii operator.

    ``op`` maps complex grid values ``(pairs, G)`` to the same shape.
    """
    from .spectral import _transform

    rng = np.random.default_rng(0) if rng is None else rng
    tr = _transform(n, grid_size, L)
    x = scale * (rng.standard_normal((pairs, n)) + 1j * rng.standard_normal((pairs, n)))
    y = x + rng.standard_normal((pairs, 1)) * 10.0 ** rng.uniform(-4, 0, (pairs, 1)) * (
        rng.standard_normal((pairs, n)) + 1j * rng.standard_normal((pairs, n)))
    bx = tr.analyze(op(tr.synth(x)))
    by = tr.analyze(op(tr.synth(y)))
    num = np.linalg.norm(bx - by, axis=1)
    den = np.linalg.norm(x - y, axis=1)
    return float(np.max(num / den))


# --------------------------------------------------------------------------
# random streams
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSeed:
    master_seed: int
    path_id: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise InvalidArgument("master seed must fit in 64 unsigned bits")
        if not 0 <= self.path_id < 2 ** (64 - _MODE_BITS - _TAG_BITS - 1):
            raise InvalidArgument(f"path id {self.path_id} out of range")


def _stream_key(master_seed: int, path_id: int, tag: int, mode: int, comp: int) -> list[int]:
    if not 0 <= mode < 2**_MODE_BITS:
        raise InvalidArgument(f"mode index {mode} out of range")
    if comp not in (0, 1):
        raise InvalidArgument(f"component must be 0 or 1, got {comp}")
    packed = (((path_id << _TAG_BITS) | tag) << _MODE_BITS | mode) << 1 | comp
    return [int(master_seed), packed]


def stream(seed: PathSeed, mode: int, comp: int, tag: int = TAG_FIELD) -> np.random.Generator:
    """The generator owning ``beta_mode`` component ``comp`` (0-based) on one path."""
    return np.random.Generator(np.random.Philox(key=_stream_key(seed.master_seed, seed.path_id, tag, mode, comp)))


def brownian_increments(seed: PathSeed, mode: int, component: int, steps: int, dt: float) -> np.ndarray:
    """``steps`` i.i.d. N(0, dt) increments of ``beta_mode``; ``mode`` is 1-based, ``component`` in {1, 2}."""
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if component not in (1, 2):
        raise InvalidArgument(f"component must be 1 or 2, got {component}")
    if mode < 1:
        raise InvalidArgument(f"mode index is 1-based, got {mode}")
    g = stream(seed, mode - 1, component - 1)
    return math.sqrt(dt) * g.standard_normal((int(steps), CHANNELS))[:, 0]


class NoiseSource:
    """Chunked Legendre-channel draws for a batch of paths.

    ``next_chunk(k)`` returns a complex array of shape ``(k, P, n, CHANNELS)``
    whose real and imaginary parts come from components 1 and 2.  The
    result does not depend on the chunk size: each stream is read
    sequentially step by step.
    """

    def __init__(self, master_seed: int, path_ids, n_modes: int, tag: int = TAG_FIELD):
        self.master_seed = int(master_seed)
        self.path_ids = [int(p) for p in path_ids]
        self.n_modes = int(n_modes)
        self._gens = [
            [[stream(PathSeed(self.master_seed, p), m, c, tag) for c in (0, 1)] for m in range(self.n_modes)]
            for p in self.path_ids
        ]

    def next_chunk(self, steps: int) -> np.ndarray:
        P, n = len(self.path_ids), self.n_modes
        out = np.empty((P, n, 2, steps, CHANNELS))
        for i, per_path in enumerate(self._gens):
            for m, pair in enumerate(per_path):
                out[i, m, 0] = pair[0].standard_normal((steps, CHANNELS))
                out[i, m, 1] = pair[1].standard_normal((steps, CHANNELS))
        z = out[:, :, 0] + 1j * out[:, :, 1]  # (P, n, steps, C)
        return np.ascontiguousarray(np.moveaxis(z, 2, 0))


def path_batches(path_ids, n_modes: int, max_streams: int = MAX_STREAMS_PER_BATCH):
    """Split path ids into batches holding at most ``max_streams`` streams."""
    path_ids = list(path_ids)
    size = max(1, max_streams // (2 * max(1, n_modes)))
    for i in range(0, len(path_ids), size):
        yield path_ids[i:i + size]


def legendre_basis(order: int, dt: float, s) -> np.ndarray:
    """Orthonormal shifted Legendre functions ``phi_j(s)`` on ``[0, dt]``, shape ``(order,) + s.shape``."""
    s = np.asarray(s, dtype=float)
    x = 2.0 * s / dt - 1.0
    out = np.empty((order,) + s.shape)
    for j in range(order):
        c = np.zeros(j + 1)
        c[j] = 1.0
        out[j] = math.sqrt((2 * j + 1) / dt) * np.polynomial.legendre.legval(x, c)
    return out
