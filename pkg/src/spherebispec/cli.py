"""Command-line interface.

Exit codes: 0 on success, 1 on invalid input, 2 when a numeric guard trips
(aliasing, resource limits, non-finite results).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import io as sio
from .diagrams import moment_bruteforce
from .errors import DomainError, NumericGuardError
from .estimators import (
    BispectrumOrdinate,
    bispectrum_many,
    estimate_spectrum,
    moment_I2,
    moment_I4,
    normalized_bispectrum_hat_many,
)
from .gaussianity import STATISTICS, TestConfig, j_process, required_ordinates
from .sht import GridSpec, analyze, synthesize
from .simulation import (
    NonGaussianConfig,
    SpectrumModel,
    StudyManifest,
    make_nongaussian_alm,
    replication_rng,
    run_power_study,
    run_size_study,
    sample_gaussian_alm,
)
from .wigner import wigner_3j, wigner_6j

LMIN_HELP = ("lowest multipole kept (dipole convention); default 1 drops the monopole, "
             "use 2 to drop the dipole as well")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _spectrum_kind(name: str) -> str:
    return {"sw": "sachs_wolfe_like", "power_law": "power_law"}[name]


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spherebispec", description="Angular bispectrum tools for random fields on the sphere.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("wigner", help="evaluate a 3j or 6j symbol")
    g = w.add_mutually_exclusive_group(required=True)
    g.add_argument("--3j", dest="threej", type=int, nargs=6, metavar=("l1", "l2", "l3", "m1", "m2", "m3"))
    g.add_argument("--6j", dest="sixj", type=int, nargs=6, metavar=("a", "b", "c", "d", "e", "f"))

    s = sub.add_parser("synth", help="draw a Gaussian (or quadratic non-Gaussian) field")
    s.add_argument("--L", type=int, required=True, help="band limit")
    s.add_argument("--lmin", type=int, default=1, help=LMIN_HELP)
    s.add_argument("--spectrum", choices=("sw", "power_law"), default="sw",
                   help="sw: C_l = A/(l(l+1)); power_law: C_l = A l^-alpha")
    s.add_argument("--alpha", type=float, default=2.0, help="power-law exponent")
    s.add_argument("--amp", type=float, default=None,
                   help="spectrum amplitude A; default scales the field variance to --variance")
    s.add_argument("--variance", type=float, default=1e-8, help="target field variance (default 1e-8)")
    s.add_argument("--fnl", type=float, default=0.0, help="quadratic non-Gaussianity amplitude")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="coefficient CSV (l,m,re,im)")
    s.add_argument("--grid", default=None, help="also write the field on the Gauss-Legendre grid")

    a = sub.add_parser("analyze", help="harmonic coefficients of a gridded field")
    a.add_argument("--grid", required=True, help="grid CSV")
    a.add_argument("--L", type=int, required=True)
    a.add_argument("--lmin", type=int, default=1, help=LMIN_HELP)
    a.add_argument("--band", type=int, default=None,
                   help="band limit of the gridded field (default: --L), used by the aliasing check")
    a.add_argument("--out", required=True)

    sp = sub.add_parser("spectrum", help="sample power spectrum C_hat_l")
    sp.add_argument("--alm", required=True)
    sp.add_argument("--lmin", type=int, default=1, help=LMIN_HELP)
    sp.add_argument("--out", default=None, help="CSV (l,cl); stdout if omitted")

    b = sub.add_parser("bispectrum", help="raw or normalised bispectrum ordinates")
    b.add_argument("--alm", required=True)
    b.add_argument("--lmin", type=int, default=1, help=LMIN_HELP)
    b.add_argument("--triple", type=int, nargs=3, action="append", metavar=("l1", "l2", "l3"),
                   help="ordinate to evaluate (repeatable)")
    b.add_argument("--stat", choices=STATISTICS, default=None,
                   help="evaluate every ordinate entering this test statistic")
    b.add_argument("--L", type=int, default=None)
    b.add_argument("--l0", type=int, default=2)
    b.add_argument("--K", type=int, default=0)
    b.add_argument("--kind", choices=("raw", "Ihat"), default="Ihat")
    b.add_argument("--out", default=None)

    t = sub.add_parser("test", help="sup test of Gaussianity on one field")
    t.add_argument("--stat", choices=STATISTICS, required=True)
    t.add_argument("--L", type=int, required=True)
    t.add_argument("--l0", type=int, default=2)
    t.add_argument("--K", type=int, default=0)
    t.add_argument("--lmin", type=int, default=1, help=LMIN_HELP)
    t.add_argument("--alm", required=True)
    t.add_argument("--out", default=None, help="JSON result file; stdout if omitted")
    t.add_argument("--path", default=None, help="also write the partial-sum path as CSV (r,value)")

    o = sub.add_parser("oracle", help="exact Gaussian moments of the normalised bispectrum")
    o.add_argument("--triple", type=int, nargs=3, required=True, metavar=("l1", "l2", "l3"))
    o.add_argument("--p", type=int, choices=(1, 2), default=2, help="moment order E I^(2p)")

    st = sub.add_parser("study", help="Monte Carlo size or power study")
    st.add_argument("--manifest", required=True, help="key = value study description")
    st.add_argument("--seed", type=int, required=True, help="master seed (mandatory)")
    st.add_argument("--reps", type=int, default=None, help="override the manifest replication count")
    st.add_argument("--out", required=True, help="output prefix; writes PREFIX_rates.csv, "
                                                "PREFIX_critical.csv and PREFIX_report.json")
    return p


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        sio.atomic_write(out, text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from None


def _load_alm(path: str, lmin: int):
    alm = sio.alm_from_csv(_read(path))
    if lmin < alm.l_min:
        raise DomainError(f"--lmin {lmin} is below the lowest multipole in {path}")
    return alm.truncate(alm.L, lmin)


def _cmd_wigner(args) -> None:
    if args.threej is not None:
        v = wigner_3j(*args.threej)
    else:
        v = wigner_6j(*args.sixj)
    print(repr(v))


def _cmd_synth(args) -> None:
    kind = _spectrum_kind(args.spectrum)
    if args.amp is None:
        model = SpectrumModel(kind, 1.0, args.alpha).with_variance(args.variance, args.L, args.lmin)
    else:
        model = SpectrumModel(kind, args.amp, args.alpha)
    cfg = NonGaussianConfig(args.fnl)
    rng = replication_rng(args.seed, 0, 0)
    alm = sample_gaussian_alm(model, args.L, rng, args.lmin)
    alm = make_nongaussian_alm(alm, cfg)
    sio.atomic_write(args.out, sio.alm_to_csv(alm))
    if args.grid is not None:
        sio.atomic_write(args.grid, sio.grid_to_csv(synthesize(alm, GridSpec(args.L))))


def _cmd_analyze(args) -> None:
    band = args.L if args.band is None else args.band
    grid = sio.grid_from_csv(_read(args.grid), band)
    sio.atomic_write(args.out, sio.alm_to_csv(analyze(grid, args.L, args.lmin)))


def _cmd_spectrum(args) -> None:
    alm = _load_alm(args.alm, args.lmin)
    chat = estimate_spectrum(alm)
    _emit(sio.spectrum_to_csv(chat, alm.l_min), args.out)


def _cmd_bispectrum(args) -> None:
    triples = [tuple(t) for t in (args.triple or [])]
    if args.stat is not None:
        if args.L is None:
            raise DomainError("--stat needs --L")
        triples += required_ordinates(TestConfig(args.stat, args.L, args.l0, args.K))
    if not triples:
        raise DomainError("give --triple or --stat")
    alm = _load_alm(args.alm, args.lmin)
    if args.kind == "raw":
        vals = bispectrum_many(alm, triples)
    else:
        vals = normalized_bispectrum_hat_many(alm, triples)
    ords = [BispectrumOrdinate(*sorted(t), args.kind, v) for t, v in zip(triples, vals)]
    _emit(sio.bispectrum_to_csv(ords), args.out)


def _cmd_test(args) -> None:
    cfg = TestConfig(args.stat, args.L, args.l0, args.K)
    alm = _load_alm(args.alm, args.lmin)
    if alm.L < args.L:
        raise DomainError(f"coefficients stop at l = {alm.L} but --L is {args.L}")
    triples = required_ordinates(cfg)
    values = normalized_bispectrum_hat_many(alm, triples)
    path = j_process(cfg, dict(zip(triples, values)))
    _emit(sio.result_to_json(path), args.out)
    if args.path is not None:
        sio.atomic_write(args.path, sio.path_to_csv(path))


def _cmd_oracle(args) -> None:
    l1, l2, l3 = sorted(args.triple)
    exact = moment_bruteforce(args.p, l1, l2, l3)
    closed = moment_I2(l1, l2, l3) if args.p == 1 else moment_I4(l1, l2, l3)
    print(json.dumps({"triple": [l1, l2, l3], "p": args.p, "bruteforce": exact, "closed_form": closed},
                     indent=2, sort_keys=True))


def _cmd_study(args) -> None:
    manifest = StudyManifest.parse(_read(args.manifest), seed=args.seed, reps=args.reps)
    if any(f != 0 for f in manifest.fnl_list):
        report = run_power_study(manifest)
    else:
        report = run_size_study(manifest)
    sio.atomic_write(f"{args.out}_rates.csv", report.rates_csv())
    sio.atomic_write(f"{args.out}_critical.csv", report.critical_csv())
    sio.atomic_write(f"{args.out}_report.json", report.to_json())


_COMMANDS = {
    "wigner": _cmd_wigner,
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "spectrum": _cmd_spectrum,
    "bispectrum": _cmd_bispectrum,
    "test": _cmd_test,
    "oracle": _cmd_oracle,
    "study": _cmd_study,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        _COMMANDS[args.command](args)
    except NumericGuardError as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
