"""Plain CSV and JSON persistence for coefficients, grids, spectra and test results.

Every writer goes through :func:`atomic_write`, which writes a temporary
file in the destination directory and renames it into place.  Floats are
written with 17 significant digits so files round-trip exactly.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .estimators import BispectrumOrdinate, PowerSpectrum
from .gaussianity import TestProcessPath
from .sht import HarmonicCoefficients, SphereGrid

__all__ = [
    "atomic_write",
    "alm_to_csv",
    "alm_from_csv",
    "grid_to_csv",
    "grid_from_csv",
    "spectrum_to_csv",
    "spectrum_from_csv",
    "bispectrum_to_csv",
    "path_to_csv",
    "result_to_json",
]


def _g(x: float) -> str:
    return repr(float(x))


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(text: str, header: Sequence[str], what: str) -> list[list[str]]:
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise DomainError(f"empty {what} file") from None
    if [h.strip() for h in first] != list(header):
        raise DomainError(f"{what} file must start with header {','.join(header)}")
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    for k, r in enumerate(rows, 2):
        if len(r) != len(header):
            raise DomainError(f"{what} file line {k}: expected {len(header)} fields")
    return rows


# -- harmonic coefficients --------------------------------------------------

def alm_to_csv(alm: HarmonicCoefficients) -> str:
    lines = ["l,m,re,im"]
    for l in range(alm.l_min, alm.L + 1):
        for m in range(l + 1):
            v = alm.values[l, m]
            lines.append(f"{l},{m},{_g(v.real)},{_g(v.imag)}")
    return "\n".join(lines) + "\n"


def alm_from_csv(text: str, l_min: int | None = None) -> HarmonicCoefficients:
    """Parse ``l,m,re,im`` rows (``m >= 0``, sorted by ``(l, m)``).

    ``l_min`` defaults to the smallest ``l`` present.
    """
    rows = _rows(text, ("l", "m", "re", "im"), "coefficient")
    if not rows:
        raise DomainError("coefficient file has no rows")
    try:
        parsed = [(int(r[0]), int(r[1]), float(r[2]), float(r[3])) for r in rows]
    except ValueError as exc:
        raise DomainError(f"malformed coefficient file: {exc}") from None
    keys = [(l, m) for l, m, _, _ in parsed]
    if keys != sorted(keys) or len(set(keys)) != len(keys):
        raise DomainError("coefficient rows must be sorted by (l, m) without repeats")
    L = max(l for l, _ in keys)
    lo = min(l for l, _ in keys) if l_min is None else l_min
    values = np.zeros((L + 1, L + 1), dtype=np.complex128)
    for l, m, re, im in parsed:
        if m < 0 or m > l:
            raise DomainError(f"invalid index (l, m) = ({l}, {m}); only 0 <= m <= l is stored")
        if l < lo:
            raise DomainError(f"row l = {l} lies below l_min = {lo}")
        if m == 0 and im != 0.0:
            raise DomainError(f"a_{l}0 must be real")
        values[l, m] = complex(re, im)
    return HarmonicCoefficients(values, lo)


# -- grids ------------------------------------------------------------------

def grid_to_csv(grid: SphereGrid) -> str:
    lines = ["n_theta,n_phi", f"{grid.n_theta},{grid.n_phi}"]
    for row in grid.values:
        lines.append(",".join(_g(v) for v in row))
    return "\n".join(lines) + "\n"


def grid_from_csv(text: str, field_band: int | None = None) -> SphereGrid:
    reader = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(reader) < 2 or [h.strip() for h in reader[0]] != ["n_theta", "n_phi"]:
        raise DomainError("grid file must start with header n_theta,n_phi and a size line")
    try:
        n_theta, n_phi = (int(x) for x in reader[1])
        values = np.array([[float(x) for x in r] for r in reader[2:]], dtype=np.float64)
    except ValueError as exc:
        raise DomainError(f"malformed grid file: {exc}") from None
    if values.shape != (n_theta, n_phi):
        raise DomainError(f"grid values have shape {values.shape}, expected {(n_theta, n_phi)}")
    return SphereGrid(values, field_band)


# -- spectra, bispectra, paths ------------------------------------------------

def spectrum_to_csv(C: PowerSpectrum | np.ndarray, l_min: int = 0) -> str:
    """``l,cl`` rows; a plain array is taken as indexed by ``l`` from ``l_min``."""
    lines = ["l,cl"]
    if isinstance(C, PowerSpectrum):
        pairs = [(int(l), C[int(l)]) for l in C.ls]
    else:
        pairs = [(l, float(C[l])) for l in range(l_min, len(C))]
    lines += [f"{l},{_g(v)}" for l, v in pairs]
    return "\n".join(lines) + "\n"


def spectrum_from_csv(text: str) -> PowerSpectrum:
    rows = _rows(text, ("l", "cl"), "spectrum")
    try:
        ls = [int(r[0]) for r in rows]
        vals = [float(r[1]) for r in rows]
    except ValueError as exc:
        raise DomainError(f"malformed spectrum file: {exc}") from None
    if not ls or ls != list(range(ls[0], ls[0] + len(ls))):
        raise DomainError("spectrum rows must list consecutive l")
    return PowerSpectrum(vals, ls[0])


def bispectrum_to_csv(ordinates: Iterable[BispectrumOrdinate]) -> str:
    lines = ["l1,l2,l3,kind,value"]
    for o in ordinates:
        lines.append(f"{o.l1},{o.l2},{o.l3},{o.kind},{_g(o.value)}")
    return "\n".join(lines) + "\n"


def path_to_csv(path: TestProcessPath) -> str:
    lines = ["r,value"] + [f"{_g(r)},{_g(v)}" for r, v in zip(path.r_grid, path.values)]
    return "\n".join(lines) + "\n"


def result_to_json(path: TestProcessPath) -> str:
    return json.dumps(path.summary(), indent=2, sort_keys=True) + "\n"
