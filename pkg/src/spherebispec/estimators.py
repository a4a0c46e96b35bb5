"""Power spectrum and bispectrum estimators, and their Gaussian moments."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import DomainError, NumericGuardError, ParityError, ResourceGuardError
from .sht import HarmonicCoefficients
from .wigner import _row_kernel, triangle_ok, wigner_6j

__all__ = [
    "PowerSpectrum",
    "BispectrumOrdinate",
    "estimate_cl",
    "estimate_spectrum",
    "estimate_bispectrum",
    "bispectrum_many",
    "normalized_bispectrum",
    "normalized_bispectrum_hat",
    "normalized_bispectrum_hat_many",
    "delta_factor",
    "moment_I2",
    "moment_I4_offdiag",
    "moment_I4",
    "moment_I4_asymptotic",
    "g_factor",
    "moment_Ihat",
    "uhat_mixed_moment",
]

IMAG_TOL = 1e-8


class PowerSpectrum:
    """Strictly positive spectrum ``C_l`` for ``l_min <= l <= L``."""

    def __init__(self, values: Sequence[float], l_min: int = 1):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("spectrum must be a nonempty 1-d sequence")
        if not np.all(values > 0.0):
            raise DomainError("power spectrum must be strictly positive")
        self.values = values
        self.l_min = int(l_min)

    @property
    def L(self) -> int:
        return self.l_min + self.values.size - 1

    @property
    def ls(self) -> np.ndarray:
        return np.arange(self.l_min, self.L + 1)

    def __getitem__(self, l: int) -> float:
        if not self.l_min <= l <= self.L:
            raise DomainError(f"l={l} outside {self.l_min}..{self.L}")
        return float(self.values[l - self.l_min])

    def dense(self) -> np.ndarray:
        """Array indexed directly by ``l`` (NaN below ``l_min``)."""
        out = np.full(self.L + 1, np.nan)
        out[self.l_min:] = self.values
        return out

    def scaled(self, factor: float) -> "PowerSpectrum":
        return PowerSpectrum(self.values * factor, self.l_min)

    def __repr__(self) -> str:
        return f"PowerSpectrum(l_min={self.l_min}, L={self.L})"


class BispectrumOrdinate:
    """Sorted admissible triple with an estimate of kind ``raw``, ``I`` or ``Ihat``."""

    KINDS = ("raw", "I", "Ihat")

    def __init__(self, l1: int, l2: int, l3: int, kind: str, value: float):
        if not l1 <= l2 <= l3:
            raise DomainError("ordinate must be sorted l1 <= l2 <= l3")
        _check_admissible(l1, l2, l3)
        if kind not in self.KINDS:
            raise DomainError(f"kind must be one of {self.KINDS}")
        self.l1, self.l2, self.l3, self.kind, self.value = l1, l2, l3, kind, float(value)

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.l1, self.l2, self.l3

    def __repr__(self) -> str:
        return f"BispectrumOrdinate({self.l1}, {self.l2}, {self.l3}, {self.kind!r}, {self.value!r})"


def _check_admissible(l1: int, l2: int, l3: int) -> None:
    if min(l1, l2, l3) < 0:
        raise DomainError("multipoles must be nonnegative")
    if not triangle_ok(l1, l2, l3):
        raise DomainError(f"triangle rule fails for ({l1},{l2},{l3})")
    if (l1 + l2 + l3) % 2:
        raise ParityError(f"odd l1+l2+l3 for ({l1},{l2},{l3})")


# --------------------------------------------------------------------------
# power spectrum
# --------------------------------------------------------------------------

def estimate_cl(alm: HarmonicCoefficients, l: int) -> float:
    """``(1/(2l+1)) sum_{m=-l}^{l} |a_lm|^2``."""
    if not alm.l_min <= l <= alm.L:
        raise DomainError(f"l={l} outside {alm.l_min}..{alm.L}")
    row = alm.values[l, : l + 1]
    power = abs(row[0]) ** 2 + 2.0 * float(np.sum(np.abs(row[1:]) ** 2))
    return power / (2 * l + 1)


def estimate_spectrum(alm: HarmonicCoefficients) -> np.ndarray:
    """``C_hat_l`` for every ``l``, indexed by ``l`` (zero below ``l_min``)."""
    v = np.abs(alm.values) ** 2
    total = v[:, 0] + 2.0 * v[:, 1:].sum(axis=1)
    out = total / (2.0 * np.arange(alm.L + 1) + 1.0)
    out[: alm.l_min] = 0.0
    return out


# --------------------------------------------------------------------------
# bispectrum kernels
# --------------------------------------------------------------------------

@numba.njit(cache=True)
def _alm(values, l, m):
    if m >= 0:
        return values[l, m]
    v = values[l, -m].conjugate()
    return -v if (-m) % 2 == 1 else v


@numba.njit(cache=True)
def _neumaier(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@numba.njit(cache=True)
def _bispectrum_one(values, l1, l2, l3, out, fwd, bwd):
    """Return (real, imag, absolute-sum) of the 3j-weighted triple product."""
    sr = 0.0
    cr = 0.0
    si = 0.0
    ci = 0.0
    sa = 0.0
    for m1 in range(-l1, l1 + 1):
        a1 = _alm(values, l1, m1)
        lo, n = _row_kernel(l1, l2, l3, m1, out, fwd, bwd)
        for k in range(n):
            w = out[k]
            if w == 0.0:
                continue
            m2 = lo + k
            prod = a1 * _alm(values, l2, m2) * _alm(values, l3, -m1 - m2) * w
            sr, cr = _neumaier(sr, cr, prod.real)
            si, ci = _neumaier(si, ci, prod.imag)
            sa += abs(prod)
    return sr + cr, si + ci, sa


@numba.njit(cache=True)
def _bispectrum_batch(values, triples, res):
    nbuf = 2 * values.shape[0] + 2
    out = np.empty(nbuf)
    fwd = np.empty(nbuf)
    bwd = np.empty(nbuf)
    for t in range(triples.shape[0]):
        re, im, ab = _bispectrum_one(values, triples[t, 0], triples[t, 1], triples[t, 2], out, fwd, bwd)
        res[t, 0] = re
        res[t, 1] = im
        res[t, 2] = ab


def _sorted_triples(triples: Iterable[Sequence[int]], alm: HarmonicCoefficients) -> np.ndarray:
    arr = np.array([sorted(t) for t in triples], dtype=np.int64).reshape(-1, 3)
    for l1, l2, l3 in arr:
        _check_admissible(int(l1), int(l2), int(l3))
    if arr.size and (arr.min() < alm.l_min or arr.max() > alm.L):
        raise DomainError(f"multipoles must lie in {alm.l_min}..{alm.L}")
    return arr


def bispectrum_many(alm: HarmonicCoefficients, triples: Iterable[Sequence[int]]) -> np.ndarray:
    """``B_hat`` for each triple (order of the triple is irrelevant).

    Summation runs over ``m1`` (outer) and ``m2`` (inner) of the sorted
    triple with compensated accumulation, so the result is bit-identical for
    every permutation of the arguments.

    Raises
    ------
    NumericGuardError
        If the imaginary part exceeds ``1e-8`` times the absolute sum of the
        terms, which signals coefficients that violate conjugate symmetry.
    """
    arr = _sorted_triples(triples, alm)
    res = np.zeros((arr.shape[0], 3))
    if arr.shape[0]:
        _bispectrum_batch(alm.values, arr, res)
    bad = np.abs(res[:, 1]) > IMAG_TOL * np.maximum(res[:, 2], np.finfo(float).tiny)
    bad &= np.abs(res[:, 1]) > 0.0
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericGuardError(f"bispectrum {tuple(arr[k])} has imaginary part {res[k, 1]:.3e}")
    return res[:, 0].copy()


def estimate_bispectrum(alm: HarmonicCoefficients, l1: int, l2: int, l3: int) -> float:
    """``sum_{m1,m2,m3} 3j(l1 l2 l3; m1 m2 m3) a_{l1 m1} a_{l2 m2} a_{l3 m3}``."""
    return float(bispectrum_many(alm, [(l1, l2, l3)])[0])


def _parity_sign(l1: int, l2: int, l3: int) -> float:
    return -1.0 if ((l1 + l2 + l3) // 2) % 2 else 1.0


def normalized_bispectrum(alm: HarmonicCoefficients, l1: int, l2: int, l3: int,
                          C: PowerSpectrum) -> float:
    """``(-1)^((l1+l2+l3)/2) B_hat / sqrt(C_l1 C_l2 C_l3)`` with a known spectrum."""
    b = estimate_bispectrum(alm, l1, l2, l3)
    return _parity_sign(l1, l2, l3) * b / math.sqrt(C[l1] * C[l2] * C[l3])


def normalized_bispectrum_hat_many(alm: HarmonicCoefficients, triples: Iterable[Sequence[int]],
                                   chat: np.ndarray | None = None) -> np.ndarray:
    """``I_hat`` for each triple, with ``C_hat`` computed once from ``alm``."""
    triples = [tuple(int(x) for x in t) for t in triples]
    if chat is None:
        chat = estimate_spectrum(alm)
    b = bispectrum_many(alm, triples)
    out = np.empty(len(triples))
    for k, (l1, l2, l3) in enumerate(triples):
        den = chat[l1] * chat[l2] * chat[l3]
        if not den > 0.0:
            raise NumericGuardError(f"C_hat vanishes on ({l1},{l2},{l3})")
        out[k] = _parity_sign(l1, l2, l3) * b[k] / math.sqrt(den)
    return out


def normalized_bispectrum_hat(alm: HarmonicCoefficients, l1: int, l2: int, l3: int) -> float:
    """``(-1)^((l1+l2+l3)/2) B_hat / sqrt(C_hat_l1 C_hat_l2 C_hat_l3)``."""
    return float(normalized_bispectrum_hat_many(alm, [(l1, l2, l3)])[0])


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def delta_factor(l1: int, l2: int, l3: int) -> int:
    """Multiplicity constant: 1 (all distinct), 2 (exactly two equal) or 6 (all equal)."""
    if not l1 <= l2 <= l3:
        raise DomainError("delta_factor expects l1 <= l2 <= l3")
    return 1 + (l1 == l2) + (l2 == l3) + 3 * (l1 == l3)


def moment_I2(l1: int, l2: int, l3: int) -> float:
    """``E I^2`` under Gaussianity (equal to the multiplicity constant)."""
    _check_admissible(l1, l2, l3)
    return float(delta_factor(*sorted((l1, l2, l3))))


def moment_I4_offdiag(l1: int, l2: int, l3: int) -> float:
    """Exact ``E I^4`` for strictly increasing ``l1 < l2 < l3``.

    ``3 + 6/(2l1+1) + 6/(2l2+1) + 6/(2l3+1) + 6 {l1 l2 l3; l1 l2 l3}``.
    """
    if not l1 < l2 < l3:
        raise DomainError("moment_I4_offdiag needs l1 < l2 < l3")
    _check_admissible(l1, l2, l3)
    return (3.0 + 6.0 / (2 * l1 + 1) + 6.0 / (2 * l2 + 1) + 6.0 / (2 * l3 + 1)
            + 6.0 * wigner_6j(l1, l2, l3, l1, l2, l3))


def moment_I4_asymptotic(l1: int, l2: int, l3: int) -> float:
    """Leading term ``3 Delta^2`` of ``E I^4``; an approximation with O(1/l1) error."""
    _check_admissible(l1, l2, l3)
    return 3.0 * delta_factor(*sorted((l1, l2, l3))) ** 2


def moment_I4(l1: int, l2: int, l3: int) -> float:
    """Exact ``E I^4`` for any admissible triple.

    Distinct multipoles use the closed form; repeated multipoles use the
    diagram oracle, which is only available for ``max(l) <= 6``.
    """
    l1, l2, l3 = sorted((l1, l2, l3))
    if l1 < l2 < l3:
        return moment_I4_offdiag(l1, l2, l3)
    from .diagrams import moment_bruteforce

    return moment_bruteforce(2, l1, l2, l3)


def g_factor(l: int, p: int) -> float:
    """``prod_{k=1}^{p} (2l+1)/(2l+2k-1)``."""
    if l < 1 or p < 0:
        raise DomainError("need l >= 1 and p >= 0")
    return float(math.prod(Fraction(2 * l + 1, 2 * l + 2 * k - 1) for k in range(1, p + 1)))


def _ihat_g(l1: int, l2: int, l3: int, p: int) -> float:
    if l1 < l2 < l3:
        return g_factor(l1, p) * g_factor(l2, p) * g_factor(l3, p)
    if l1 == l2 < l3:
        return g_factor(l1, 2 * p) * g_factor(l3, p)
    if l1 < l2 == l3:
        return g_factor(l1, p) * g_factor(l3, 2 * p)
    return g_factor(l1, 3 * p)


def moment_Ihat(l1: int, l2: int, l3: int, p: int) -> float:
    """``E I_hat^{2p}`` for ``p`` in {1, 2}: ``E I^{2p}`` times the g-factor pattern.

    For repeated multipoles at ``p = 2`` the exact ``E I^4`` comes from the
    diagram oracle and is therefore limited to ``max(l) <= 6``.
    """
    l1, l2, l3 = sorted((l1, l2, l3))
    _check_admissible(l1, l2, l3)
    if p == 1:
        base = moment_I2(l1, l2, l3)
    elif p == 2:
        base = moment_I4(l1, l2, l3)
    else:
        raise DomainError("only p = 1 and p = 2 are supported")
    return base * _ihat_g(l1, l2, l3, p)


def uhat_mixed_moment(l: int, q0: int, pair_powers: Sequence[int | tuple[int, int]]) -> float:
    """Mixed moment of the studentised coefficients ``u_hat_lm = a_lm / sqrt(C_hat_l)``.

    Parameters
    ----------
    l : int
        Multipole.
    q0 : int
        Power of ``u_hat_l0``.
    pair_powers : sequence
        One entry per distinct order ``m > 0``: either ``p_i`` (meaning
        ``|u_hat_lm|^(2 p_i)``) or a pair ``(q_i, q_i')`` of powers of
        ``u_hat_lm`` and its conjugate.

    Returns
    -------
    float
        ``(2 p0 - 1)!! prod p_i! g(l; p)`` with ``p0 = q0/2`` and
        ``p = p0 + sum p_i``; zero when ``q0`` is odd or a pair is unbalanced.
    """
    if l < 1:
        raise DomainError("need l >= 1")
    if q0 < 0:
        raise DomainError("powers must be nonnegative")
    if len(pair_powers) > l:
        raise DomainError(f"at most {l} distinct nonzero orders exist at l={l}")
    if q0 % 2:
        return 0.0
    ps = []
    for entry in pair_powers:
        q, qc = (entry, entry) if isinstance(entry, (int, np.integer)) else entry
        if q < 0 or qc < 0:
            raise DomainError("powers must be nonnegative")
        if q != qc:
            return 0.0
        ps.append(int(q))
    p0 = q0 // 2
    p = p0 + sum(ps)
    value = math.prod(range(2 * p0 - 1, 0, -2)) * math.prod(math.factorial(x) for x in ps)
    return value * g_factor(l, p)
