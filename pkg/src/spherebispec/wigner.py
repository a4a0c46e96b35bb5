"""Wigner 3j and 6j symbols and Gaunt integrals for integer angular momenta.

Two independent evaluation routes are provided:

* a floating-point fast path based on the three-term recursion in ``m2``
  (fixed ``l1, l2, l3, m1``), run from both ends of the row and matched in the
  classically allowed region, then normalised with the row sum rule
  ``sum_{m2} (3j)^2 = 1 / (2 l1 + 1)``;
* exact rational evaluation of the Racah sum with Python integers, used as
  the conformance oracle (``wigner_3j_exact``).

Selection-rule violations return ``0.0``; only ``|m| > l`` raises.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numba
import numpy as np

from .errors import DomainError

__all__ = [
    "TripleLM",
    "SixJArguments",
    "Wigner3jCache",
    "triangle_ok",
    "wigner_3j",
    "wigner_3j_row",
    "wigner_3j_table",
    "wigner_3j_tensor",
    "wigner_3j_zero",
    "wigner_3j_exact",
    "wigner_3j_squared_exact",
    "wigner_3j_racah_transcribed",
    "wigner_6j",
    "wigner_6j_squared_exact",
    "gaunt",
]


class TripleLM(NamedTuple):
    l1: int
    l2: int
    l3: int
    m1: int
    m2: int
    m3: int

    @property
    def admissible(self) -> bool:
        return abs(self.m1) <= self.l1 and abs(self.m2) <= self.l2 and abs(self.m3) <= self.l3


class SixJArguments(NamedTuple):
    a: int
    b: int
    c: int
    d: int
    e: int
    f: int


def triangle_ok(l1: int, l2: int, l3: int) -> bool:
    """True iff each of ``l1, l2, l3`` is at most the sum of the other two."""
    if l1 < 0 or l2 < 0 or l3 < 0:
        raise DomainError("multipoles must be nonnegative")
    return l1 <= l2 + l3 and l2 <= l1 + l3 and l3 <= l1 + l2


def _check_integer(*values: int) -> None:
    for v in values:
        if int(v) != v:
            raise DomainError("only integer angular momenta are supported")


def _check_orders(l1, l2, l3, m1, m2, m3) -> None:
    _check_integer(l1, l2, l3, m1, m2, m3)
    if l1 < 0 or l2 < 0 or l3 < 0:
        raise DomainError("multipoles must be nonnegative")
    if abs(m1) > l1 or abs(m2) > l2 or abs(m3) > l3:
        raise DomainError(f"|m| > l in ({l1},{l2},{l3};{m1},{m2},{m3})")


# --------------------------------------------------------------------------
# fast path: m-recursion kernels
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _rec_c(l1, l2, l3, m1, m2):
    # couples f(m2) and f(m2 - 1)
    m3 = -m1 - m2
    v = (l2 - m2 + 1.0) * (l2 + m2) * (l3 + m3 + 1.0) * (l3 - m3)
    if v <= 0.0:
        return 0.0
    return math.sqrt(v)


@numba.njit(cache=True)
def _rec_d(l1, l2, l3, m1, m2):
    m3 = -m1 - m2
    return l2 * (l2 + 1.0) + l3 * (l3 + 1.0) - l1 * (l1 + 1.0) + 2.0 * m2 * m3


@numba.njit(cache=True)
def _row_kernel(l1, l2, l3, m1, out, fwd, bwd):
    """Fill ``out[k]`` with 3j(l1 l2 l3; m1, lo+k, -m1-lo-k); return (lo, n)."""
    if l3 > l1 + l2 or l1 > l2 + l3 or l2 > l1 + l3 or abs(m1) > l1:
        return 0, 0
    lo = max(-l2, -l3 - m1)
    hi = min(l2, l3 - m1)
    n = hi - lo + 1
    if n <= 0:
        return lo, 0
    sign_hi = 1.0 if (l2 - l3 - m1) % 2 == 0 else -1.0
    if n == 1:
        out[0] = sign_hi / math.sqrt(2.0 * l1 + 1.0)
        return lo, 1
    big = 1e250
    tiny = 1e-250

    fwd[0] = 1.0
    fwd[1] = -_rec_d(l1, l2, l3, m1, lo) / _rec_c(l1, l2, l3, m1, lo + 1)
    for k in range(1, n - 1):
        m = lo + k
        fwd[k + 1] = -(_rec_d(l1, l2, l3, m1, m) * fwd[k]
                       + _rec_c(l1, l2, l3, m1, m) * fwd[k - 1]) / _rec_c(l1, l2, l3, m1, m + 1)
        if abs(fwd[k + 1]) > big:
            for j in range(k + 2):
                fwd[j] *= tiny

    bwd[n - 1] = 1.0
    bwd[n - 2] = -_rec_d(l1, l2, l3, m1, hi) / _rec_c(l1, l2, l3, m1, hi)
    for k in range(n - 2, 0, -1):
        m = lo + k
        bwd[k - 1] = -(_rec_d(l1, l2, l3, m1, m) * bwd[k]
                       + _rec_c(l1, l2, l3, m1, m + 1) * bwd[k + 1]) / _rec_c(l1, l2, l3, m1, m)
        if abs(bwd[k - 1]) > big:
            for j in range(k - 1, n):
                bwd[j] *= tiny

    # classically allowed band: oscillatory characteristic roots
    first = -1
    last = -1
    for k in range(1, n - 1):
        m = lo + k
        d = _rec_d(l1, l2, l3, m1, m)
        cc = 4.0 * _rec_c(l1, l2, l3, m1, m) * _rec_c(l1, l2, l3, m1, m + 1)
        if d * d <= cc:
            if first < 0:
                first = k
            last = k
    if first < 0:
        kmax = 0
        vmax = 0.0
        for k in range(n):
            if abs(fwd[k]) > vmax:
                vmax = abs(fwd[k])
                kmax = k
        first = max(0, kmax - 1)
        last = min(n - 1, kmax + 1)
    split = (first + last) // 2

    num = 0.0
    den = 0.0
    while True:
        num = 0.0
        den = 0.0
        for k in range(first, last + 1):
            num += fwd[k] * bwd[k]
            den += bwd[k] * bwd[k]
        if den > 0.0 or (first == 0 and last == n - 1):
            break
        # the band only holds exact zeros of the row: widen it
        first = max(0, first - 1)
        last = min(n - 1, last + 1)
    scale = num / den

    for k in range(n):
        if k <= split:
            out[k] = fwd[k]
        else:
            out[k] = scale * bwd[k]

    # normalise; rescale first to keep the square sum finite
    amax = 0.0
    for k in range(n):
        if abs(out[k]) > amax:
            amax = abs(out[k])
    s = 0.0
    for k in range(n):
        out[k] /= amax
        s += out[k] * out[k]
    norm = 1.0 / math.sqrt(s * (2.0 * l1 + 1.0))
    # sign: out[n-1] carries the sign of `scale` (bwd[n-1] = 1)
    if scale < 0.0:
        norm = -norm
    norm *= sign_hi
    for k in range(n):
        out[k] *= norm
    return lo, n


@numba.njit(cache=True)
def _table_kernel(l1, l2, l3, table):
    nbuf = 2 * l2 + 2
    buf = np.empty(nbuf)
    fwd = np.empty(nbuf)
    bwd = np.empty(nbuf)
    for m1 in range(-l1, l1 + 1):
        lo, n = _row_kernel(l1, l2, l3, m1, buf, fwd, bwd)
        for k in range(n):
            table[m1 + l1, lo + k + l2] = buf[k]


def _row_buffers(l2: int):
    n = 2 * l2 + 2
    return np.empty(n), np.empty(n), np.empty(n)


def wigner_3j_row(l1: int, l2: int, l3: int, m1: int) -> tuple[np.ndarray, np.ndarray]:
    """All 3j symbols (l1 l2 l3; m1 m2 -m1-m2) over the allowed ``m2`` range.

    Returns
    -------
    m2 : ndarray of int
    values : ndarray of float
        Both empty when the range is empty (triangle violated or no valid m2).
    """
    _check_integer(l1, l2, l3, m1)
    if abs(m1) > l1:
        raise DomainError(f"|m1| > l1 in row ({l1},{l2},{l3};{m1})")
    out, fwd, bwd = _row_buffers(l2)
    lo, n = _row_kernel(int(l1), int(l2), int(l3), int(m1), out, fwd, bwd)
    return np.arange(lo, lo + n), out[:n].copy()


def wigner_3j_table(l1: int, l2: int, l3: int) -> np.ndarray:
    """Dense array ``T[m1 + l1, m2 + l2]`` of 3j(l1 l2 l3; m1 m2 -m1-m2).

    Entries with ``|m1 + m2| > l3`` are zero.
    """
    _check_integer(l1, l2, l3)
    table = np.zeros((2 * l1 + 1, 2 * l2 + 1))
    if l1 < 0 or l2 < 0 or l3 < 0:
        raise DomainError("multipoles must be nonnegative")
    if triangle_ok(l1, l2, l3):
        _table_kernel(int(l1), int(l2), int(l3), table)
    return table


class Wigner3jCache:
    """Caller-owned memo of dense 3j tables keyed by ``(l1, l2, l3)``.

    After :meth:`freeze` the cache refuses new entries, so it can be shared
    read-only between threads.
    """

    def __init__(self):
        self._tables: dict[tuple[int, int, int], np.ndarray] = {}
        self._frozen = False

    def table(self, l1: int, l2: int, l3: int) -> np.ndarray:
        key = (l1, l2, l3)
        t = self._tables.get(key)
        if t is None:
            if self._frozen:
                raise KeyError(f"frozen cache has no table for {key}")
            t = wigner_3j_table(l1, l2, l3)
            t.setflags(write=False)
            self._tables[key] = t
        return t

    def freeze(self) -> "Wigner3jCache":
        self._frozen = True
        return self

    def __len__(self) -> int:
        return len(self._tables)

    def __contains__(self, key) -> bool:
        return key in self._tables


def wigner_3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol (fast floating path).

    Exactly ``0.0`` when ``m1 + m2 + m3 != 0`` or the triangle rule fails.
    Raises :class:`DomainError` if any ``|m_i| > l_i``.
    """
    _check_orders(l1, l2, l3, m1, m2, m3)
    if m1 + m2 + m3 != 0 or not triangle_ok(l1, l2, l3):
        return 0.0
    if m1 == 0 and m2 == 0 and (l1 + l2 + l3) % 2 == 1:
        return 0.0
    out, fwd, bwd = _row_buffers(l2)
    lo, n = _row_kernel(int(l1), int(l2), int(l3), int(m1), out, fwd, bwd)
    return float(out[m2 - lo])


# --------------------------------------------------------------------------
# closed forms and exact oracle
# --------------------------------------------------------------------------

def _fact(n: int) -> int:
    return math.factorial(n)


def wigner_3j_zero(l1: int, l2: int, l3: int) -> float:
    """Closed form of 3j(l1 l2 l3; 0 0 0); zero for odd ``l1 + l2 + l3``.

    Evaluated with exact integers, so it stays accurate for large multipoles.
    """
    _check_integer(l1, l2, l3)
    if not triangle_ok(l1, l2, l3):
        raise DomainError(f"triangle rule fails for ({l1},{l2},{l3})")
    J = l1 + l2 + l3
    if J % 2:
        return 0.0
    g = J // 2
    ratio = Fraction(_fact(g), _fact(g - l1) * _fact(g - l2) * _fact(g - l3))
    sq = Fraction(_fact(J - 2 * l1) * _fact(J - 2 * l2) * _fact(J - 2 * l3), _fact(J + 1))
    value = math.sqrt(ratio * ratio * sq)
    return -value if g % 2 else value


@lru_cache(maxsize=4096)
def wigner_3j_squared_exact(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> tuple[int, Fraction]:
    """Exact ``(sign, value**2)`` of the 3j symbol from the Racah sum."""
    _check_orders(l1, l2, l3, m1, m2, m3)
    if m1 + m2 + m3 != 0 or not triangle_ok(l1, l2, l3):
        return 0, Fraction(0)
    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (_fact(k) * _fact(l3 - l2 + k + m1) * _fact(l3 - l1 + k - m2)
               * _fact(l1 + l2 - l3 - k) * _fact(l1 - k - m1) * _fact(l2 - k + m2))
        s += Fraction(-1 if k % 2 else 1, den)
    if s == 0:
        return 0, Fraction(0)
    tri = Fraction(_fact(l1 + l2 - l3) * _fact(l1 - l2 + l3) * _fact(-l1 + l2 + l3),
                   _fact(l1 + l2 + l3 + 1))
    prod = (_fact(l1 + m1) * _fact(l1 - m1) * _fact(l2 + m2) * _fact(l2 - m2)
            * _fact(l3 + m3) * _fact(l3 - m3))
    sign = -1 if (l1 - l2 - m3) % 2 else 1
    if s < 0:
        sign = -sign
    return sign, s * s * tri * prod


def wigner_3j_exact(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """3j symbol from exact rational arithmetic, rounded once to double."""
    sign, sq = wigner_3j_squared_exact(l1, l2, l3, m1, m2, m3)
    if sign == 0:
        return 0.0
    return sign * math.sqrt(sq)


def wigner_3j_racah_transcribed(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """Second exact route: the single-sum form in ``z`` with ``M = -m3``.

    ``sum_z (-1)^z (l2+l3+m1-z)! (l1-m1+z)! /
    [z! (l2+l3-l1-z)! (l3+M-z)! (l1-l2-M+z)!]`` times the square-root
    prefactor and the phase ``(-1)^(l1+m2+M)``.
    """
    _check_orders(l1, l2, l3, m1, m2, m3)
    if m1 + m2 + m3 != 0 or not triangle_ok(l1, l2, l3):
        return 0.0
    M = -m3
    pre = (Fraction(_fact(l1 + l2 - l3) * _fact(l1 - l2 + l3) * _fact(-l1 + l2 + l3),
                    _fact(l1 + l2 + l3 + 1))
           * Fraction(_fact(l3 + M) * _fact(l3 - M),
                      _fact(l1 + m1) * _fact(l1 - m1) * _fact(l2 + m2) * _fact(l2 - m2)))
    s = Fraction(0)
    zmin = max(0, l2 + M - l1)
    zmax = min(l2 + l3 - l1, l3 + M, l2 + l3 + m1)
    for z in range(zmin, zmax + 1):
        num = _fact(l2 + l3 + m1 - z) * _fact(l1 - m1 + z)
        den = _fact(z) * _fact(l2 + l3 - l1 - z) * _fact(l3 + M - z) * _fact(l1 - l2 - M + z)
        s += Fraction(-num if z % 2 else num, den)
    if s == 0:
        return 0.0
    sign = -1 if (l1 + m2 + M) % 2 else 1
    if s < 0:
        sign = -sign
    return sign * math.sqrt(s * s * pre)


def _triangle_sq(a: int, b: int, c: int) -> Fraction:
    return Fraction(_fact(a + b - c) * _fact(a - b + c) * _fact(-a + b + c), _fact(a + b + c + 1))


@lru_cache(maxsize=4096)
def wigner_6j_squared_exact(a: int, b: int, c: int, d: int, e: int, f: int) -> tuple[int, Fraction]:
    """Exact ``(sign, value**2)`` of {a b c; d e f} via the Racah formula."""
    _check_integer(a, b, c, d, e, f)
    if min(a, b, c, d, e, f) < 0:
        raise DomainError("6j arguments must be nonnegative")
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(triangle_ok(*t) for t in triads):
        return 0, Fraction(0)
    tmin = max(sum(t) for t in triads)
    tmax = min(a + b + d + e, a + c + d + f, b + c + e + f)
    terms = []
    for t in range(tmin, tmax + 1):
        num = _fact(t + 1)
        den = (_fact(t - a - b - c) * _fact(t - a - e - f) * _fact(t - d - b - f)
               * _fact(t - d - e - c) * _fact(a + b + d + e - t) * _fact(a + c + d + f - t)
               * _fact(b + c + e + f - t))
        terms.append(Fraction(-num if t % 2 else num, den))
    total = sum(terms, Fraction(0))
    if total == 0:
        return 0, Fraction(0)
    pref = Fraction(1)
    for tri in triads:
        pref *= _triangle_sq(*tri)
    return (1 if total > 0 else -1), total * total * pref


def wigner_6j(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    """Wigner 6j symbol {a b c; d e f} for integer arguments.

    Exact rational Racah evaluation rounded once to double; ``0.0`` when any
    of the four triads violates the triangle rule.
    """
    sign, sq = wigner_6j_squared_exact(int(a), int(b), int(c), int(d), int(e), int(f))
    if sign == 0:
        return 0.0
    return sign * math.sqrt(sq)


def gaunt(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """Integral of Y_{l1 m1} Y_{l2 m2} Y_{l3 m3} over the unit sphere."""
    _check_orders(l1, l2, l3, m1, m2, m3)
    if m1 + m2 + m3 != 0 or not triangle_ok(l1, l2, l3) or (l1 + l2 + l3) % 2:
        return 0.0
    h = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / (4.0 * math.pi))
    return h * wigner_3j_zero(l1, l2, l3) * wigner_3j(l1, l2, l3, m1, m2, m3)


def wigner_3j_tensor(l1: int, l2: int, l3: int, cache: Wigner3jCache | None = None) -> np.ndarray:
    """Dense ``W[m1 + l1, m2 + l2, m3 + l3]`` over all orders (zero off the m-sum plane)."""
    table = cache.table(l1, l2, l3) if cache is not None else wigner_3j_table(l1, l2, l3)
    out = np.zeros((2 * l1 + 1, 2 * l2 + 1, 2 * l3 + 1))
    if not triangle_ok(l1, l2, l3):
        return out
    for i in range(2 * l1 + 1):
        m1 = i - l1
        for k in range(2 * l2 + 1):
            m3 = -m1 - (k - l2)
            if -l3 <= m3 <= l3:
                out[i, k, m3 + l3] = table[i, k]
    return out
