"""Partial-sum processes of normalised bispectra and their sup tests.

Four processes on ``r in [0, 1]`` are built from ``I_hat`` ordinates:

* ``J1``/``J2``: near-diagonal triples ``(l-u, l, l+u)`` for even ``l``,
  using ``I_hat / sqrt(Delta)`` and ``(I_hat^2 - Delta) / (sqrt 2 Delta)``;
* ``J3``/``J4``: wide triples ``(l0+u, l, l+l0+u)``, using ``I_hat`` and
  ``(I_hat^2 - 1) / sqrt 2``.

Each summand block is pooled over ``u = 0..K`` and scaled by ``1/sqrt(K+1)``.
Under Gaussianity every path converges to standard Brownian motion, so the
one-sided sup has limiting law ``P(sup <= x) = 2 Phi(x) - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping

import numpy as np

from .errors import DomainError
from .estimators import delta_factor

__all__ = [
    "STATISTICS",
    "TestConfig",
    "TestProcessPath",
    "required_ordinates",
    "j_process",
    "sup_statistic",
    "p_value_sup",
    "critical_value",
    "rejects",
]

STATISTICS = ("J1", "J2", "J3", "J4")
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TestConfig:
    statistic: str
    L: int
    l0: int = 2
    K: int = 0

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise DomainError(f"statistic must be one of {STATISTICS}")
        if self.l0 < 2:
            raise DomainError("l0 must be at least 2")
        if self.K < 0:
            raise DomainError("K must be nonnegative")
        if self.statistic in ("J3", "J4"):
            if self.l0 + self.K + 1 > self.L:
                raise DomainError("need l0 + K + 1 <= L")
        elif self.l0 + self.K > self.L:
            raise DomainError("need l0 + K <= L")

    @property
    def diagonal(self) -> bool:
        return self.statistic in ("J1", "J2")

    def blocks(self) -> list[tuple[int, float, list[tuple[int, int, int]]]]:
        """``(l, jump location r, triples)`` for every summand block, in order."""
        L, l0, K = self.L, self.l0, self.K
        out = []
        if self.diagonal:
            start = max(l0 + K, 2 * K)
            start += start % 2
            for l in range(start, L - K + 1, 2):
                out.append((l, l / L, [(l - u, l, l + u) for u in range(K + 1)]))
        else:
            for l in range(l0 + K + 1, L - l0 - K + 1):
                out.append((l, (l + l0 + K) / L, [(l0 + u, l, l + l0 + u) for u in range(K + 1)]))
        return out


@dataclass
class TestProcessPath:
    """Step-function path: ``values[k]`` is ``J(r)`` for ``r_grid[k] <= r < r_grid[k+1]``."""

    statistic: str
    L: int
    l0: int
    K: int
    r_grid: np.ndarray
    values: np.ndarray
    sup: float = field(init=False)
    p_value: float = field(init=False)

    __test__ = False

    def __post_init__(self):
        self.r_grid = np.asarray(self.r_grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.sup = sup_statistic(self)
        self.p_value = p_value_sup(self.sup)

    def at(self, r: float) -> float:
        """Path value at ``r`` (right-continuous steps)."""
        if not 0.0 <= r <= 1.0:
            raise DomainError("r must lie in [0, 1]")
        k = int(np.searchsorted(self.r_grid, r, side="right")) - 1
        return float(self.values[k])

    def summary(self) -> dict:
        return {"statistic": self.statistic, "L": self.L, "l0": self.l0, "K": self.K,
                "sup": self.sup, "p_value": self.p_value}


def required_ordinates(cfg: TestConfig) -> list[tuple[int, int, int]]:
    """Every ``(l1, l2, l3)`` whose ``I_hat`` enters the process, in summation order."""
    return [t for _, _, triples in cfg.blocks() for t in triples]


def _summand(cfg: TestConfig, triple: tuple[int, int, int], x: float) -> float:
    if cfg.statistic == "J1":
        return x / math.sqrt(delta_factor(*triple))
    if cfg.statistic == "J2":
        d = delta_factor(*triple)
        return (x * x - d) / (_SQRT2 * d)
    if cfg.statistic == "J3":
        return x
    return (x * x - 1.0) / _SQRT2


def j_process(cfg: TestConfig, ihat: Mapping[tuple[int, int, int], float]) -> TestProcessPath:
    """Partial-sum path of ``cfg.statistic`` from a map of ``I_hat`` values.

    The grid is ``0``, the jump location of every summand block, and ``1``;
    the path is exactly zero before the first jump.
    """
    scale = 1.0 / math.sqrt(cfg.L / 2.0 if cfg.diagonal else cfg.L)
    pool = 1.0 / math.sqrt(cfg.K + 1)
    r = [0.0]
    vals = [0.0]
    total = 0.0
    for _, jump, triples in cfg.blocks():
        block = 0.0
        for t in triples:
            try:
                x = ihat[t]
            except KeyError:
                raise DomainError(f"missing I_hat ordinate {t}") from None
            block += _summand(cfg, t, float(x))
        total += scale * pool * block
        r.append(jump)
        vals.append(total)
    if r[-1] < 1.0:
        r.append(1.0)
        vals.append(total)
    return TestProcessPath(cfg.statistic, cfg.L, cfg.l0, cfg.K, np.array(r), np.array(vals))


def sup_statistic(path: TestProcessPath, two_sided: bool = False) -> float:
    """``max(0, max_k J(r_k))``; with ``two_sided`` the sup of ``|J|``."""
    v = np.abs(path.values) if two_sided else path.values
    return float(max(0.0, v.max(initial=0.0)))


def p_value_sup(x: float) -> float:
    """``2 (1 - Phi(x))``: tail of the sup of Brownian motion on [0, 1]."""
    if x < 0:
        raise DomainError("sup statistic is nonnegative")
    return math.erfc(x / _SQRT2)


def critical_value(alpha: float) -> float:
    """Asymptotic threshold ``c`` with ``P(sup > c) = alpha``."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        # sup >= 0 always, so only an infinitely low threshold rejects every draw
        return -math.inf
    return NormalDist().inv_cdf(1.0 - alpha / 2.0)


def rejects(sup: float, threshold: float) -> bool:
    """Strict comparison: ties do not reject."""
    return sup > threshold
