"""Gaussian and quadratic non-Gaussian simulations and Monte Carlo studies.

Replication ``r`` of study cell ``c`` draws its random numbers from a Philox
stream keyed by ``(master seed, c, r)``, so results do not depend on how
replications are scheduled across worker processes.  The non-Gaussian maps
``T + f_nl (T^2 - mean)`` for every ``f_nl`` in a study reuse the same
Gaussian draw ``T`` (common random numbers).
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .estimators import PowerSpectrum, estimate_spectrum, normalized_bispectrum_hat_many
from .gaussianity import STATISTICS, TestConfig, critical_value, j_process
from .sht import GridSpec, HarmonicCoefficients, analyze, synthesize
from .wigner import triangle_ok, wigner_3j_zero

__all__ = [
    "SpectrumModel",
    "NonGaussianConfig",
    "StudyManifest",
    "StudyReport",
    "replication_rng",
    "sample_gaussian_alm",
    "quadratic_component",
    "make_nongaussian_alm",
    "sachs_wolfe_bispectrum",
    "variance_of_field",
    "simulate_sups",
    "run_size_study",
    "run_power_study",
    "worker_count",
]

THREADS_ENV = "SPHEREBISPEC_THREADS"


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumModel:
    """``power_law``: ``C_l = A l^-alpha``; ``sachs_wolfe_like``: ``C_l = A / (l (l+1))``."""

    kind: str = "sachs_wolfe_like"
    amplitude: float = 1.0
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in ("power_law", "sachs_wolfe_like"):
            raise DomainError(f"unknown spectrum kind {self.kind!r}")
        if not self.amplitude > 0:
            raise DomainError("amplitude must be positive")
        if self.alpha < 0:
            raise DomainError("alpha must be nonnegative")

    def cl(self, L: int, l_min: int = 1) -> PowerSpectrum:
        if l_min < 1:
            raise DomainError("analytic spectra start at l = 1")
        ls = np.arange(l_min, L + 1, dtype=np.float64)
        if self.kind == "power_law":
            vals = self.amplitude * ls ** (-self.alpha)
        else:
            vals = self.amplitude / (ls * (ls + 1.0))
        return PowerSpectrum(vals, l_min)

    def with_variance(self, target: float, L: int, l_min: int = 1) -> "SpectrumModel":
        """Same shape with the amplitude chosen so the field variance equals ``target``."""
        if not target > 0:
            raise DomainError("variance target must be positive")
        unit = SpectrumModel(self.kind, 1.0, self.alpha)
        return SpectrumModel(self.kind, target / variance_of_field(unit, L, l_min), self.alpha)


@dataclass(frozen=True)
class NonGaussianConfig:
    """Quadratic model ``T + f_nl (T^2 - m)``.

    ``mean="realized"`` takes ``m`` as the quadrature mean of ``T^2`` on the
    realisation; ``mean="ensemble"`` uses ``ensemble_mean`` (the field
    variance), which must then be supplied.
    """

    f_nl: float
    variance_target: float = 1e-8
    mean: str = "realized"
    ensemble_mean: float | None = None

    def __post_init__(self):
        if self.mean not in ("realized", "ensemble"):
            raise DomainError("mean must be 'realized' or 'ensemble'")
        if self.mean == "ensemble" and self.ensemble_mean is None:
            raise DomainError("ensemble mean requested but not given")

    def signal_fraction(self) -> float:
        """Approximate ``sd(f_nl T^2) / sd(T) = sqrt(2) f_nl sd(T)``."""
        return math.sqrt(2.0) * abs(self.f_nl) * math.sqrt(self.variance_target)


def variance_of_field(model: SpectrumModel | PowerSpectrum, L: int, l_min: int = 1) -> float:
    """``sum_{l=l_min}^{L} (2l+1) C_l / (4 pi)``.

    Analytic models carry no monopole, so their sum starts at ``l = 1``.
    """
    if isinstance(model, SpectrumModel):
        l_min = max(l_min, 1)
        C = model.cl(L, l_min)
    else:
        C = model
        l_min = max(l_min, C.l_min)
    ls = np.arange(l_min, L + 1)
    vals = np.array([C[int(l)] for l in ls])
    return float(np.sum((2 * ls + 1) * vals) / (4.0 * np.pi))


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------

def replication_rng(seed: int, cell: int, rep: int) -> np.random.Generator:
    """Independent counter-based stream for one replication of one study cell."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(cell), int(rep)])))


def sample_gaussian_alm(model: SpectrumModel | PowerSpectrum, L: int,
                        rng: np.random.Generator, l_min: int = 1) -> HarmonicCoefficients:
    """Gaussian coefficients: ``a_l0 ~ N(0, C_l)``; real and imaginary parts of
    ``a_lm`` (``m > 0``) independent ``N(0, C_l / 2)``.

    Draw order is fixed (per ``l``: the real ``m = 0`` term, then real and
    imaginary parts for ``m = 1..l``) so a stream always maps to the same field.
    """
    C = model.cl(L, max(l_min, 1)) if isinstance(model, SpectrumModel) else model
    values = np.zeros((L + 1, L + 1), dtype=np.complex128)
    for l in range(max(l_min, 1), L + 1):
        z = rng.standard_normal(2 * l + 1)
        sd = math.sqrt(C[l])
        values[l, 0] = sd * z[0]
        values[l, 1: l + 1] = (sd / math.sqrt(2.0)) * (z[1::2] + 1j * z[2::2])
    return HarmonicCoefficients(values, l_min)


def quadratic_component(alm: HarmonicCoefficients, L_out: int, l_min: int | None = None,
                        ensemble_mean: float | None = None) -> HarmonicCoefficients:
    """Coefficients of ``T^2 - m`` up to ``L_out`` for the field ``T`` of ``alm``.

    The grid resolves the band-``2L`` square exactly.  ``m`` is the
    quadrature mean of ``T^2`` unless ``ensemble_mean`` is given.
    """
    if L_out > alm.L:
        raise DomainError("L_out cannot exceed the input band limit")
    grid = synthesize(alm, GridSpec(alm.L, 2))
    sq = grid.values ** 2
    sq_grid = grid.with_values(sq, 2 * alm.L)
    m = sq_grid.mean() if ensemble_mean is None else ensemble_mean
    sq_grid = grid.with_values(sq - m, 2 * alm.L)
    return analyze(sq_grid, L_out, alm.l_min if l_min is None else l_min)


def make_nongaussian_alm(alm: HarmonicCoefficients, cfg: NonGaussianConfig,
                         L_out: int | None = None, l_min: int | None = None) -> HarmonicCoefficients:
    """Coefficients of ``T + f_nl (T^2 - m)`` truncated to ``L_out``."""
    L_out = alm.L if L_out is None else L_out
    l_min = alm.l_min if l_min is None else l_min
    base = HarmonicCoefficients(alm.values[: L_out + 1, : L_out + 1], l_min)
    if cfg.f_nl == 0:
        return base
    q = quadratic_component(alm, L_out, l_min,
                            cfg.ensemble_mean if cfg.mean == "ensemble" else None)
    return base + q * float(cfg.f_nl)


def sachs_wolfe_bispectrum(l1: int, l2: int, l3: int, C: PowerSpectrum, f_nl: float,
                           G: float = 1.0) -> float:
    """Leading-order angle-averaged bispectrum of the quadratic model:
    ``G f_nl h 3j(l1 l2 l3; 0 0 0) (C1 C2 + C2 C3 + C1 C3)``."""
    if not triangle_ok(l1, l2, l3):
        raise DomainError(f"triangle rule fails for ({l1},{l2},{l3})")
    if (l1 + l2 + l3) % 2:
        raise DomainError(f"odd l1+l2+l3 for ({l1},{l2},{l3})")
    h = math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / (4.0 * math.pi))
    c1, c2, c3 = C[l1], C[l2], C[l3]
    return G * f_nl * h * wigner_3j_zero(l1, l2, l3) * (c1 * c2 + c2 * c3 + c1 * c3)


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------

@dataclass
class StudyManifest:
    statistics: list[str] = field(default_factory=lambda: ["J3"])
    L_list: list[int] = field(default_factory=lambda: [250])
    K_list: list[int] = field(default_factory=lambda: [0, 2, 4])
    l0: int = 2
    fnl_list: list[float] = field(default_factory=lambda: [0.0])
    reps: int = 200
    seed: int = 0
    alphas: list[float] = field(default_factory=lambda: [0.10, 0.05])
    spectrum: str = "sachs_wolfe_like"
    spectrum_alpha: float = 2.0
    variance_target: float = 1e-8
    l_min: int = 1

    _KEYS = {
        "statistics": ("statistics", lambda v: [s.strip() for s in v.split(",") if s.strip()]),
        "L": ("L_list", lambda v: [int(x) for x in v.split(",")]),
        "K": ("K_list", lambda v: [int(x) for x in v.split(",")]),
        "l0": ("l0", int),
        "fnl": ("fnl_list", lambda v: [float(x) for x in v.split(",")]),
        "reps": ("reps", int),
        "seed": ("seed", int),
        "alpha": ("alphas", lambda v: [float(x) for x in v.split(",")]),
        "spectrum": ("spectrum", str),
        "spectrum_alpha": ("spectrum_alpha", float),
        "variance_target": ("variance_target", float),
        "lmin": ("l_min", int),
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.reps < 1:
            raise DomainError("reps must be at least 1")
        if not self.statistics or any(s not in STATISTICS for s in self.statistics):
            raise DomainError(f"statistics must be drawn from {STATISTICS}")
        if not all(0.0 < a <= 1.0 for a in self.alphas):
            raise DomainError("levels must lie in (0, 1]")
        if self.spectrum in ("sw", "sachs_wolfe"):
            self.spectrum = "sachs_wolfe_like"
        SpectrumModel(self.spectrum, 1.0, self.spectrum_alpha)
        for L in self.L_list:
            for K in self.K_list:
                for s in self.statistics:
                    TestConfig(s, L, self.l0, K)

    @classmethod
    def parse(cls, text: str, **overrides) -> "StudyManifest":
        """Read ``key = value`` lines (``#`` starts a comment)."""
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"manifest line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls._KEYS:
                raise DomainError(f"manifest line {lineno}: unknown key {key!r}")
            name, conv = cls._KEYS[key]
            try:
                kwargs[name] = conv(value)
            except ValueError as exc:
                raise DomainError(f"manifest line {lineno}: {exc}") from None
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def dumps(self) -> str:
        lines = []
        for key, (name, _) in self._KEYS.items():
            v = getattr(self, name)
            lines.append(f"{key} = {','.join(str(x) for x in v) if isinstance(v, list) else v}")
        return "\n".join(lines) + "\n"

    def spectrum_model(self, L: int) -> SpectrumModel:
        return SpectrumModel(self.spectrum, 1.0, self.spectrum_alpha).with_variance(
            self.variance_target, L, self.l_min)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer") from None
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def _one_replication(args) -> np.ndarray:
    """Sup statistics of one replication, shape (n_fnl, n_stat, n_K)."""
    manifest, cell, L, rep = args
    rng = replication_rng(manifest.seed, cell, rep)
    model = manifest.spectrum_model(L)
    alm = sample_gaussian_alm(model, L, rng, manifest.l_min)
    configs = [[TestConfig(s, L, manifest.l0, K) for K in manifest.K_list] for s in manifest.statistics]
    needed = sorted({t for row in configs for cfg in row for t in _ordinates(cfg)})
    quad = None
    if any(f != 0 for f in manifest.fnl_list):
        quad = quadratic_component(alm, L)
    out = np.empty((len(manifest.fnl_list), len(manifest.statistics), len(manifest.K_list)))
    for i, f in enumerate(manifest.fnl_list):
        field_alm = alm if f == 0 else alm + quad * float(f)
        chat = estimate_spectrum(field_alm)
        values = normalized_bispectrum_hat_many(field_alm, needed, chat)
        ihat = dict(zip(needed, values))
        for j, row in enumerate(configs):
            for k, cfg in enumerate(row):
                out[i, j, k] = j_process(cfg, ihat).sup
    return out


def _ordinates(cfg: TestConfig):
    from .gaussianity import required_ordinates

    return required_ordinates(cfg)


def simulate_sups(manifest: StudyManifest, workers: int | None = None) -> dict[int, np.ndarray]:
    """Sup statistics per band limit: ``{L: array (reps, n_fnl, n_stat, n_K)}``."""
    workers = worker_count() if workers is None else max(1, workers)
    result = {}
    for cell, L in enumerate(manifest.L_list):
        jobs = [(manifest, cell, L, r) for r in range(manifest.reps)]
        if workers == 1:
            sups = [_one_replication(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                sups = list(pool.map(_one_replication, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        result[L] = np.stack(sups)
    return result


@dataclass
class CellResult:
    statistic: str
    L: int
    K: int
    f_nl: float
    reps: int
    rate_asymptotic: dict[str, float]
    rate_tabulated: dict[str, float]
    se_asymptotic: dict[str, float]
    se_tabulated: dict[str, float]
    mc_critical: dict[str, float]


@dataclass
class StudyReport:
    manifest: StudyManifest
    cells: list[CellResult]

    def cell(self, statistic: str, L: int, K: int, f_nl: float = 0.0) -> CellResult:
        for c in self.cells:
            if (c.statistic, c.L, c.K, c.f_nl) == (statistic, L, K, float(f_nl)):
                return c
        raise KeyError((statistic, L, K, f_nl))

    def rates_csv(self) -> str:
        """Tables of rejection rates (percent): rows statistic x L x f_nl,
        columns K x {T, A} x level."""
        m = self.manifest
        head = ["statistic", "L", "fnl"]
        for kind in ("T", "A"):
            for K in m.K_list:
                for a in m.alphas:
                    head.append(f"K{K}_{kind}_{_level(a)}")
        rows = [",".join(head)]
        for s in m.statistics:
            for L in m.L_list:
                for f in m.fnl_list:
                    row = [s, str(L), _fmt(f)]
                    for kind in ("T", "A"):
                        for K in m.K_list:
                            c = self.cell(s, L, K, f)
                            rates = c.rate_tabulated if kind == "T" else c.rate_asymptotic
                            for a in m.alphas:
                                row.append(f"{100.0 * rates[_level(a)]:.1f}")
                    rows.append(",".join(row))
        return "\n".join(rows) + "\n"

    def critical_csv(self) -> str:
        """Monte Carlo critical values under f_nl = 0: rows statistic x L, columns K x level."""
        m = self.manifest
        head = ["statistic", "L"] + [f"K{K}_{_level(a)}" for K in m.K_list for a in m.alphas]
        rows = [",".join(head)]
        for s in m.statistics:
            for L in m.L_list:
                row = [s, str(L)]
                for K in m.K_list:
                    c = self.cell(s, L, K, 0.0)
                    row += [f"{c.mc_critical[_level(a)]:.4f}" for a in m.alphas]
                rows.append(",".join(row))
        return "\n".join(rows) + "\n"

    def to_json(self) -> str:
        payload = {
            "manifest": {k: v for k, v in asdict(self.manifest).items()},
            "seed_scheme": "Philox(SeedSequence([seed, cell_index, replication]))",
            "cells": [asdict(c) for c in self.cells],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _level(a: float) -> str:
    return f"{100.0 * a:g}"


def _fmt(x: float) -> str:
    return f"{x:g}"


def _summarize(manifest: StudyManifest, sups: dict[int, np.ndarray], null: dict[int, np.ndarray]) -> StudyReport:
    cells = []
    for L in manifest.L_list:
        arr = sups[L]
        for j, s in enumerate(manifest.statistics):
            for k, K in enumerate(manifest.K_list):
                null_sups = null[L][:, j, k]
                crit_mc = {_level(a): float(np.quantile(null_sups, 1.0 - a)) for a in manifest.alphas}
                for i, f in enumerate(manifest.fnl_list):
                    x = arr[:, i, j, k]
                    R = x.size
                    ra, rt, sa, st = {}, {}, {}, {}
                    for a in manifest.alphas:
                        key = _level(a)
                        thr_a = -math.inf if a == 1.0 else critical_value(a)
                        thr_t = -math.inf if a == 1.0 else crit_mc[key]
                        ra[key] = float(np.mean(x > thr_a))
                        rt[key] = float(np.mean(x > thr_t))
                        sa[key] = math.sqrt(ra[key] * (1 - ra[key]) / R)
                        st[key] = math.sqrt(rt[key] * (1 - rt[key]) / R)
                    cells.append(CellResult(s, L, K, float(f), R, ra, rt, sa, st, crit_mc))
    return StudyReport(manifest, cells)


def _with_null(manifest: StudyManifest) -> tuple[StudyManifest, int]:
    """Manifest whose f_nl list starts with 0 (the null draws are free: they
    are the Gaussian fields underlying every alternative)."""
    fnl = [float(f) for f in manifest.fnl_list]
    if 0.0 in fnl:
        return manifest, fnl.index(0.0)
    extended = StudyManifest(**{**asdict(manifest), "fnl_list": [0.0] + fnl})
    return extended, 0


def run_size_study(manifest: StudyManifest, workers: int | None = None) -> StudyReport:
    """Rejection rates under Gaussianity and Monte Carlo critical values."""
    if 0.0 not in [float(f) for f in manifest.fnl_list]:
        raise DomainError("a size study needs f_nl = 0 in the manifest")
    size_manifest = StudyManifest(**{**asdict(manifest), "fnl_list": [0.0]})
    sups = simulate_sups(size_manifest, workers)
    return _summarize(size_manifest, sups, {L: v[:, 0] for L, v in sups.items()})


def run_power_study(manifest: StudyManifest, workers: int | None = None) -> StudyReport:
    """Rejection rates for every f_nl, against tabulated (Monte Carlo null
    quantiles from the same Gaussian draws) and asymptotic thresholds."""
    full, null_index = _with_null(manifest)
    sups = simulate_sups(full, workers)
    report = _summarize(full, sups, {L: v[:, null_index] for L, v in sups.items()})
    return report
