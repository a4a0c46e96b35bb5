"""Brute-force residuals of the classical 3j/6j sum rules.

Each function evaluates both sides of an identity by explicit summation over
dense 3j tensors (see :func:`spherebispec.wigner.wigner_3j_tensor`) and
returns the maximum absolute difference over all free orders.  They serve as
conformance checks for the 3j and 6j implementations.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .wigner import triangle_ok, wigner_3j_tensor, wigner_6j

__all__ = [
    "orthonormality_residual",
    "orthogonality_residual",
    "alternating_sum_residual",
    "sixj_contraction",
    "sixj_contraction_residual",
    "recoupling_three_residual",
    "recoupling_four_residual",
]


@lru_cache(maxsize=8192)
def _t(a: int, b: int, c: int) -> np.ndarray:
    out = wigner_3j_tensor(a, b, c)
    out.setflags(write=False)
    return out


def _alt(l: int) -> np.ndarray:
    """(-1)^m for m = -l..l."""
    return np.where(np.arange(-l, l + 1) % 2 == 0, 1.0, -1.0)


def orthonormality_residual(l1: int, l2: int, l3: int) -> float:
    """|sum over all orders of 3j^2 - 1| for a triangle-valid triple."""
    if not triangle_ok(l1, l2, l3):
        return float(np.abs(_t(l1, l2, l3)).max(initial=0.0))
    return abs(float(np.sum(_t(l1, l2, l3) ** 2)) - 1.0)


def orthogonality_residual(l1: int, l2: int, L: int, Lp: int) -> float:
    """Max over (M, M') of |sum_{m1,m2} 3j(l1 l2 L) 3j(l1 l2 L') - delta/(2L+1)|."""
    A = _t(l1, l2, L)
    B = _t(l1, l2, Lp)
    gram = np.einsum("abM,abN->MN", A, B)
    expect = np.zeros_like(gram)
    if L == Lp and triangle_ok(l1, l2, L):
        expect = np.eye(2 * L + 1) / (2 * L + 1)
    return float(np.abs(gram - expect).max())


def alternating_sum_residual(a: int, b: int) -> float:
    """Max over beta of |sum_alpha (-1)^alpha 3j(a a b; alpha -alpha beta) - rhs|.

    rhs is ``(-1)^a sqrt(2a+1)`` at ``b = beta = 0`` and zero otherwise.
    """
    T = _t(a, a, b)
    # T[alpha, -alpha, beta] lives on the anti-diagonal of the first two axes
    anti = T[np.arange(2 * a + 1), np.arange(2 * a, -1, -1), :]
    lhs = _alt(a) @ anti
    rhs = np.zeros(2 * b + 1)
    if b == 0:
        rhs[0] = (-1) ** a * np.sqrt(2 * a + 1)
    return float(np.abs(lhs - rhs).max())


def sixj_contraction(a: int, b: int, e: int, c: int, d: int, f: int) -> float:
    """The 6j symbol {a b e; c d f} as a full contraction of four 3j symbols.

    ``sum (-1)^(e + f + eps + phi) (a b e; al be eps) (c d e; ga de -eps)
    (a d f; al de -phi) (c b f; ga be phi)`` over all six orders.
    """
    A = _t(a, b, e)
    B = _t(c, d, e)[:, :, ::-1] * _alt(e)[None, None, :]
    C = _t(a, d, f)[:, :, ::-1] * _alt(f)[None, None, :]
    D = _t(c, b, f)
    left = np.tensordot(A, B, axes=([2], [2]))                       # x y z w
    right = np.tensordot(C, D, axes=([2], [2])).transpose(0, 3, 2, 1)  # x y z w
    total = np.sum(left * right)
    return float((-1) ** (e + f) * total)


def sixj_contraction_residual(a: int, b: int, e: int, c: int, d: int, f: int) -> float:
    return abs(sixj_contraction(a, b, e, c, d, f) - wigner_6j(a, b, e, c, d, f))


def recoupling_three_residual(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    """Three-3j recoupling rule, maximised over the free orders (gamma, phi, eps).

    ``sum_{al,be,de} (-1)^(de+ga) (a b c; -al -be ga) (a f d; al ph de)
    (e b d; -eps be -de) = (-1)^(a+b+c+d+e+f) (c f e; ga ph -eps) {a b c; e f d}``.
    """
    A = _t(a, b, c)[::-1, ::-1, :]
    B = _t(a, f, d)
    C = _t(e, b, d)[::-1, :, ::-1] * _alt(d)[None, None, :]
    AB = np.tensordot(A, B, axes=([0], [0]))            # b g f d
    lhs = np.tensordot(AB, C, axes=([0, 3], [1, 2]))     # g f e
    lhs = lhs * _alt(c)[:, None, None]
    sign = -1.0 if (a + b + c + d + e + f) % 2 else 1.0
    rhs = sign * _t(c, f, e)[:, :, ::-1] * wigner_6j(a, b, c, e, f, d)
    return float(np.abs(lhs - rhs).max())


def recoupling_four_residual(a: int, b: int, c: int, d: int, e: int, f: int,
                             g: int, j: int) -> float:
    """Four-3j recoupling through an intermediate momentum ``s``.

    ``sum_{be,ga,eps,ph} (a b c; al -be -ga) (d f e; de -ph -eps)
    (g b e; et be eps) (j f c; mu ph ga)`` equals
    ``(-1)^(al+de) sum_{s,sg} (-1)^(a+b+f+g+s+sg) (2s+1)
    (a s j; al sg mu) (g s d; et -sg de) {b c a; j s f} {b e g; d s f}``.
    The residual is the max over the free orders (al, de, et, mu).
    """
    A = _t(a, b, c)[:, ::-1, ::-1]
    D = _t(d, f, e)[:, ::-1, ::-1]
    AG = np.tensordot(A, _t(g, b, e), axes=([1], [1]))   # a c g e
    DJ = np.tensordot(D, _t(j, f, c), axes=([1], [1]))   # d e j c
    lhs = np.tensordot(AG, DJ, axes=([1, 3], [3, 1])).transpose(0, 2, 1, 3)
    lhs = lhs * (_alt(a)[:, None, None, None] * _alt(d)[None, :, None, None])
    rhs = np.zeros_like(lhs)
    for s in range(max(abs(a - j), abs(g - d)), min(a + j, g + d) + 1):
        w = wigner_6j(b, c, a, j, s, f) * wigner_6j(b, e, g, d, s, f)
        if w == 0.0:
            continue
        w *= (2 * s + 1) * (-1) ** (a + b + f + g + s)
        pair = np.tensordot(_t(a, s, j) * _alt(s)[None, :, None], _t(g, s, d)[:, ::-1, :],
                            axes=([1], [1]))             # a j g d
        rhs += w * pair.transpose(0, 3, 2, 1)
    return float(np.abs(lhs - rhs).max())
