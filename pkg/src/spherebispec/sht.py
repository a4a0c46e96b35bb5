"""Spherical harmonics and transforms on a Gauss-Legendre x uniform grid.

Conventions
-----------
* ``Y_lm(theta, phi) = Pbar_lm(cos theta) exp(i m phi)`` for ``m >= 0``, where
  ``Pbar_lm`` is the fully normalised associated Legendre function including
  the Condon-Shortley phase ``(-1)^m``.
* ``Y_{l,-m} = (-1)^m conj(Y_lm)``, and likewise ``a_{l,-m} = (-1)^m conj(a_lm)``
  for real fields.
* Colatitude nodes are ``arccos`` of the Gauss-Legendre roots, ordered from
  the north pole; longitudes are ``2 pi k / n_phi`` on ``[0, 2 pi)``.

A field of band limit ``B`` can be analysed exactly up to degree ``L`` when
``n_theta >= ceil((L + B) / 2) + 1`` and ``n_phi >= L + B + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import AliasingError, DomainError

__all__ = [
    "HarmonicCoefficients",
    "GridSpec",
    "SphereGrid",
    "legendre_normalized",
    "legendre_column",
    "ylm",
    "gauss_legendre_rule",
    "grid_shape",
    "synthesize",
    "analyze",
]

_REAL_TOL = 1e-10


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

class HarmonicCoefficients:
    """Triangular array of complex coefficients ``a_lm``, ``l_min <= l <= L``, ``0 <= m <= l``.

    Stored densely as ``values[l, m]``; entries with ``m > l`` or ``l < l_min``
    are kept at zero.  ``a_l0`` is real.
    """

    def __init__(self, values: np.ndarray, l_min: int = 1):
        values = np.array(values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DomainError("coefficient array must be square (L+1, L+1)")
        L = values.shape[0] - 1
        if not 0 <= l_min <= L + 1:
            raise DomainError(f"l_min={l_min} outside 0..{L + 1}")
        scale = max(1.0, float(np.abs(values).max(initial=0.0)))
        if np.abs(values[:, 0].imag).max(initial=0.0) > _REAL_TOL * scale:
            raise DomainError("a_l0 must be real for a real field")
        values[:, 0] = values[:, 0].real
        values[np.triu_indices(L + 1, 1)] = 0.0
        values[:l_min, :] = 0.0
        self.values = values
        self.l_min = int(l_min)

    @classmethod
    def zeros(cls, L: int, l_min: int = 1) -> "HarmonicCoefficients":
        return cls(np.zeros((L + 1, L + 1), dtype=np.complex128), l_min)

    @property
    def L(self) -> int:
        return self.values.shape[0] - 1

    def __getitem__(self, lm: tuple[int, int]) -> complex:
        l, m = lm
        if not self.l_min <= l <= self.L or abs(m) > l:
            raise DomainError(f"(l, m) = ({l}, {m}) outside the stored range")
        if m >= 0:
            return complex(self.values[l, m])
        v = np.conj(self.values[l, -m])
        return complex(-v if m % 2 else v)

    def row(self, l: int) -> np.ndarray:
        """``a_lm`` for ``m = -l..l`` with negative orders from conjugate symmetry."""
        pos = self.values[l, : l + 1]
        neg = np.conj(pos[:0:-1]) * np.where(np.arange(l, 0, -1) % 2, -1.0, 1.0)
        return np.concatenate([neg, pos])

    def truncate(self, L: int, l_min: int | None = None) -> "HarmonicCoefficients":
        if L > self.L:
            raise DomainError("cannot truncate to a larger band limit")
        return HarmonicCoefficients(self.values[: L + 1, : L + 1],
                                    self.l_min if l_min is None else l_min)

    def copy(self) -> "HarmonicCoefficients":
        return HarmonicCoefficients(self.values.copy(), self.l_min)

    def __add__(self, other: "HarmonicCoefficients") -> "HarmonicCoefficients":
        self._check_compatible(other)
        return HarmonicCoefficients(self.values + other.values, self.l_min)

    def __sub__(self, other: "HarmonicCoefficients") -> "HarmonicCoefficients":
        self._check_compatible(other)
        return HarmonicCoefficients(self.values - other.values, self.l_min)

    def __mul__(self, c: float) -> "HarmonicCoefficients":
        if isinstance(c, complex) or np.iscomplexobj(c):
            raise DomainError("only real scalings preserve a real field")
        return HarmonicCoefficients(self.values * c, self.l_min)

    __rmul__ = __mul__

    def _check_compatible(self, other: "HarmonicCoefficients") -> None:
        if self.L != other.L or self.l_min != other.l_min:
            raise DomainError("band limits or l_min differ")

    def __repr__(self) -> str:
        return f"HarmonicCoefficients(L={self.L}, l_min={self.l_min})"


def grid_shape(L: int, B: int) -> tuple[int, int]:
    """Smallest (n_theta, n_phi) that analyses a band-``B`` field exactly to degree ``L``."""
    return math.ceil((L + B) / 2) + 1, L + B + 1


@dataclass(frozen=True)
class GridSpec:
    """Grid able to synthesise a band-``L_synth`` field and analyse its
    ``oversample``-fold products (band ``oversample * L_synth``) back to ``L_synth``."""

    L_synth: int
    oversample: int = 1

    def __post_init__(self):
        if self.L_synth < 0:
            raise DomainError("L_synth must be nonnegative")
        if self.oversample < 1:
            raise DomainError("oversample must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return grid_shape(self.L_synth, self.oversample * self.L_synth)

    @property
    def n_theta(self) -> int:
        return self.shape[0]

    @property
    def n_phi(self) -> int:
        return self.shape[1]


def gauss_legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [-1, 1] (ascending) and their weights."""
    if n < 1:
        raise DomainError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@dataclass
class SphereGrid:
    """Real field samples ``values[i, k]`` at colatitude ``theta_nodes[i]`` and
    longitude ``2 pi k / n_phi``.

    ``field_band`` records the band limit of the sampled field when known;
    ``None`` means unknown, in which case analysis assumes the field is no
    wider than the requested degree.
    """

    values: np.ndarray
    field_band: int | None = None
    theta_nodes: np.ndarray = field(init=False, repr=False)
    theta_weights: np.ndarray = field(init=False, repr=False)
    _x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise DomainError("grid values must be a nonempty matrix")
        x, w = gauss_legendre_rule(self.values.shape[0])
        # north pole first: decreasing x
        self._x = x[::-1].copy()
        self.theta_weights = w[::-1].copy()
        self.theta_nodes = np.arccos(self._x)

    @classmethod
    def zeros(cls, n_theta: int, n_phi: int, field_band: int | None = None) -> "SphereGrid":
        return cls(np.zeros((n_theta, n_phi)), field_band)

    @property
    def n_theta(self) -> int:
        return self.values.shape[0]

    @property
    def n_phi(self) -> int:
        return self.values.shape[1]

    @property
    def phi_nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    def with_values(self, values: np.ndarray, field_band: int | None) -> "SphereGrid":
        """Same node layout, new samples (e.g. a pointwise product of fields)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise DomainError("shape mismatch")
        return SphereGrid(values, field_band)

    def mean(self) -> float:
        """Quadrature estimate of the spherical average of the field."""
        ring = self.values.mean(axis=1)
        return float(np.sum(self.theta_weights * ring) / 2.0)


# --------------------------------------------------------------------------
# Legendre functions
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _pmm_log(m, sin_t):
    # log |Pbar_mm| = 0.5 log((2m+1)/(4 pi) prod_{k<=m} (2k-1)/(2k)) + m log sin
    acc = math.log((2.0 * m + 1.0) / (4.0 * math.pi))
    for k in range(1, m + 1):
        acc += math.log((2.0 * k - 1.0) / (2.0 * k))
    if m == 0:
        return 0.5 * acc, 0.0
    return 0.5 * acc, m * math.log(sin_t) if sin_t > 0.0 else -np.inf


@numba.njit(cache=True)
def _legendre_column(L, m, x, out):
    """out[l - m] = Pbar_lm(x) for l = m..L (Condon-Shortley phase included)."""
    sin_t = math.sqrt(max(0.0, (1.0 - x) * (1.0 + x)))
    c, s = _pmm_log(m, sin_t)
    if m > 0 and sin_t == 0.0:
        for k in range(L - m + 1):
            out[k] = 0.0
        return
    pmm = math.exp(c + s)
    if m % 2 == 1:
        pmm = -pmm
    out[0] = pmm
    if L == m:
        return
    out[1] = x * math.sqrt(2.0 * m + 3.0) * pmm
    for l in range(m + 2, L + 1):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[l - m] = a * (x * out[l - m - 1] - b * out[l - m - 2])


def legendre_column(L: int, m: int, x: float) -> np.ndarray:
    """``Pbar_lm(x)`` for ``l = m..L`` as one array."""
    if not 0 <= m <= L:
        raise DomainError("need 0 <= m <= L")
    if abs(x) > 1.0:
        raise DomainError("|x| > 1")
    out = np.empty(L - m + 1)
    _legendre_column(int(L), int(m), float(x), out)
    return out


def legendre_normalized(l: int, m: int, x: float) -> float:
    """Fully normalised associated Legendre function
    ``sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_lm(x)`` with the Condon-Shortley phase."""
    if m < 0 or m > l:
        raise DomainError("need 0 <= m <= l")
    if abs(x) > 1.0:
        raise DomainError("|x| > 1")
    return float(legendre_column(l, m, x)[l - m])


def ylm(l: int, m: int, theta: float, phi: float) -> complex:
    """Spherical harmonic ``Y_lm(theta, phi)``."""
    if abs(m) > l:
        raise DomainError("|m| > l")
    if m < 0:
        v = np.conj(ylm(l, -m, theta, phi))
        return complex(-v if m % 2 else v)
    return complex(legendre_normalized(l, m, math.cos(theta)) * np.exp(1j * m * phi))


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _synth_rings(alm, l_min, x, F):
    """F[i, m] = sum_l a_lm Pbar_lm(x_i); uses Pbar_lm(-x) = (-1)^(l+m) Pbar_lm(x)."""
    L = alm.shape[0] - 1
    n = x.shape[0]
    col = np.empty(L + 1)
    for i in range((n + 1) // 2):
        j = n - 1 - i
        for m in range(L + 1):
            _legendre_column(L, m, x[i], col)
            ev_re = 0.0
            ev_im = 0.0
            od_re = 0.0
            od_im = 0.0
            for l in range(max(m, l_min), L + 1):
                p = col[l - m]
                a = alm[l, m]
                if (l + m) % 2 == 0:
                    ev_re += a.real * p
                    ev_im += a.imag * p
                else:
                    od_re += a.real * p
                    od_im += a.imag * p
            F[i, m] = complex(ev_re + od_re, ev_im + od_im)
            if j != i:
                F[j, m] = complex(ev_re - od_re, ev_im - od_im)


@numba.njit(cache=True)
def _analyze_rings(G, w, x, L, l_min, out):
    """out[l, m] = sum_i w_i Pbar_lm(x_i) G[i, m]."""
    n = x.shape[0]
    col = np.empty(L + 1)
    for i in range((n + 1) // 2):
        j = n - 1 - i
        for m in range(L + 1):
            _legendre_column(L, m, x[i], col)
            gi = w[i] * G[i, m]
            if j != i:
                gj = w[j] * G[j, m]
                s_ev = gi + gj
                s_od = gi - gj
            else:
                s_ev = gi
                s_od = gi
            for l in range(max(m, l_min), L + 1):
                if (l + m) % 2 == 0:
                    out[l, m] += col[l - m] * s_ev
                else:
                    out[l, m] += col[l - m] * s_od


def synthesize(alm: HarmonicCoefficients, spec: GridSpec | tuple[int, int]) -> SphereGrid:
    """Evaluate ``sum_lm a_lm Y_lm`` on the grid described by ``spec``.

    ``spec`` is a :class:`GridSpec` or an explicit ``(n_theta, n_phi)`` pair.
    """
    if isinstance(spec, GridSpec):
        if spec.L_synth < alm.L:
            raise AliasingError(f"grid built for L={spec.L_synth} cannot hold L={alm.L}")
        n_theta, n_phi = spec.shape
    else:
        n_theta, n_phi = spec
    if n_phi < 2 * alm.L + 1:
        raise AliasingError(f"n_phi={n_phi} < 2L+1 = {2 * alm.L + 1}")
    grid = SphereGrid.zeros(n_theta, n_phi, field_band=alm.L)
    F = np.zeros((n_theta, n_phi // 2 + 1), dtype=np.complex128)
    _synth_rings(alm.values, alm.l_min, grid._x, F[:, : alm.L + 1])
    # the m = 0 term of a real field is real by construction
    grid.values = n_phi * np.fft.irfft(F, n=n_phi, axis=1)
    return grid


def analyze(grid: SphereGrid, L: int, l_min: int = 1) -> HarmonicCoefficients:
    """Quadrature estimate of ``a_lm = int f conj(Y_lm)`` for ``l_min <= l <= L``.

    Raises
    ------
    AliasingError
        If the grid cannot resolve the products of the field (band
        ``grid.field_band``, or ``L`` when unknown) with ``Y_lm`` up to ``L``.
    """
    B = L if grid.field_band is None else grid.field_band
    need_t, need_p = grid_shape(L, B)
    if grid.n_theta < need_t or grid.n_phi < need_p:
        raise AliasingError(
            f"grid {grid.n_theta}x{grid.n_phi} too coarse: analysing a band-{B} field "
            f"to L={L} needs at least {need_t}x{need_p}")
    G = np.fft.rfft(grid.values, axis=1)[:, : L + 1] * (2.0 * np.pi / grid.n_phi)
    out = np.zeros((L + 1, L + 1), dtype=np.complex128)
    _analyze_rings(np.ascontiguousarray(G), grid.theta_weights, grid._x, L, l_min, out)
    return HarmonicCoefficients(out, l_min)
