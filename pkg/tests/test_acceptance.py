"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The recorded lines are repeated in the terminal summary (see conftest.py).
"""
import itertools
import math

import numpy as np
import pytest

from spherebispec.diagrams import (
    classify,
    diagram_value,
    enumerate_diagrams,
    moment_bruteforce,
    paired_family_value,
    verify_loop_reduction,
)
from spherebispec.errors import DomainError
from spherebispec.estimators import (
    PowerSpectrum,
    delta_factor,
    moment_I2,
    moment_I4,
    moment_I4_offdiag,
    moment_Ihat,
    normalized_bispectrum,
    normalized_bispectrum_hat_many,
    uhat_mixed_moment,
)
from spherebispec.gaussianity import critical_value
from spherebispec.identities import (
    alternating_sum_residual,
    orthogonality_residual,
    orthonormality_residual,
    recoupling_four_residual,
    recoupling_three_residual,
    sixj_contraction_residual,
)
from spherebispec.sht import GridSpec, analyze, synthesize
from spherebispec.simulation import (
    SpectrumModel,
    StudyManifest,
    replication_rng,
    run_power_study,
    run_size_study,
    sample_gaussian_alm,
)
from spherebispec.wigner import triangle_ok, wigner_3j, wigner_3j_exact

pytestmark = pytest.mark.slow

# published size and critical-value tables for S3 (J3), alpha = 10% and 5%
SIZE_TABLE_250 = {0: (9.5, 4.5), 2: (9.0, 4.0), 4: (8.0, 2.5)}
CRIT_TABLE = {
    250: {0: (1.61, 1.81), 2: (1.55, 1.83), 4: (1.61, 1.72)},
    500: {0: (1.69, 1.90), 2: (1.63, 1.92), 4: (1.61, 1.80)},
}
REPS = 200
SIZE_SEED = 2500
TREND_SEED = 5000
POWER_SEED = 1000


def _triads(*triples):
    return all(triangle_ok(*t) for t in triples)


def _mc_close(samples: np.ndarray, expect: float) -> tuple[bool, float, float]:
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size))
    return abs(mean - expect) <= 4 * se + 1e-12, mean, se


# --------------------------------------------------------------------------
# 1-3: special functions and transforms
# --------------------------------------------------------------------------

class TestCriterion1WignerIdentities:
    def test_identity_suite(self, record_criterion):
        r = range(7)
        worst = {}
        worst["orthonormality"] = max(orthonormality_residual(a, b, c)
                                      for a, b, c in itertools.product(r, repeat=3) if triangle_ok(a, b, c))
        w = 0.0
        for l1, l2 in itertools.product(r, repeat=2):
            band = range(abs(l1 - l2), min(l1 + l2, 6) + 1)
            for L, Lp in itertools.product(band, repeat=2):
                w = max(w, orthogonality_residual(l1, l2, L, Lp))
        worst["orthogonality"] = w
        worst["alternating"] = max(alternating_sum_residual(a, b) for a in r for b in range(min(2 * a, 6) + 1))
        worst["sixj_contraction"] = max(
            sixj_contraction_residual(a, b, e, c, d, f)
            for a, b, e, c, d, f in itertools.product(r, repeat=6)
            if _triads((a, b, e), (c, d, e), (a, d, f), (c, b, f)))
        worst["recoupling_three"] = max(
            recoupling_three_residual(a, b, c, d, e, f)
            for a, b, c, d, e, f in itertools.product(r, repeat=6)
            if _triads((a, b, c), (a, f, d), (e, b, d), (c, f, e)))
        worst["recoupling_four"] = max(
            recoupling_four_residual(a, b, c, d, e, f, g, j)
            for a, b, c, d, e, f, g, j in itertools.product(r, repeat=8)
            if _triads((a, b, c), (d, f, e), (g, b, e), (j, f, c)))

        rng = np.random.default_rng(50)
        w = 0.0
        for _ in range(500):
            l1, l2 = (int(x) for x in rng.integers(0, 51, 2))
            l3 = int(rng.integers(abs(l1 - l2), min(l1 + l2, 50) + 1))
            w = max(w, orthonormality_residual(l1, l2, l3))
        ok = max(worst.values()) <= 1e-9 and w <= 1e-10
        detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
        record_criterion(1, ok, f"max residuals (args <= 6): {detail}; random l <= 50: {w:.1e}")
        assert ok


class TestCriterion2ThreeJConformance:
    def test_fast_path_vs_exact(self, record_criterion):
        rng = np.random.default_rng(2)
        worst_rel, worst_zero, n = 0.0, 0.0, 0
        while n < 10_000:
            l1, l2 = (int(x) for x in rng.integers(0, 101, 2))
            l3 = int(rng.integers(abs(l1 - l2), min(l1 + l2, 100) + 1))
            m1 = int(rng.integers(-l1, l1 + 1))
            lo, hi = max(-l2, -l3 - m1), min(l2, l3 - m1)
            if lo > hi:
                continue
            m2 = int(rng.integers(lo, hi + 1))
            exact = wigner_3j_exact(l1, l2, l3, m1, m2, -m1 - m2)
            fast = wigner_3j(l1, l2, l3, m1, m2, -m1 - m2)
            if exact == 0.0:
                worst_zero = max(worst_zero, abs(fast))
            else:
                worst_rel = max(worst_rel, abs(fast - exact) / abs(exact))
            n += 1
        ok = worst_rel <= 1e-10 and worst_zero <= 1e-13
        record_criterion(2, ok, f"10^4 arguments, l <= 100: worst relative error {worst_rel:.2e}, "
                                f"worst value at exact zeros {worst_zero:.1e}")
        assert ok


class TestCriterion3RoundTrip:
    def test_round_trip(self, record_criterion):
        errs = {}
        for L in (64, 128):
            C = PowerSpectrum(np.ones(L + 1), 0)
            alm = sample_gaussian_alm(C, L, np.random.default_rng(L), l_min=0)
            back = analyze(synthesize(alm, GridSpec(L)), L, l_min=0)
            errs[L] = float(np.abs(back.values - alm.values).max())
        ok = all(e < 1e-10 for e in errs.values())
        record_criterion(3, ok, "max |analyze(synthesize(a)) - a|: "
                         + ", ".join(f"L={L} {e:.1e}" for L, e in errs.items()))
        assert ok


# --------------------------------------------------------------------------
# 4-7: moments
# --------------------------------------------------------------------------

MOMENT_TRIPLES = [(2, 3, 5), (3, 3, 4), (4, 4, 4)]


@pytest.fixture(scope="module")
def ihat_draws():
    """Studentised normalised bispectra at the moment triples, 10^4 Gaussian fields."""
    model = SpectrumModel()
    out = np.empty((10_000, len(MOMENT_TRIPLES)))
    for r in range(out.shape[0]):
        alm = sample_gaussian_alm(model, 5, replication_rng(4, 0, r))
        out[r] = normalized_bispectrum_hat_many(alm, MOMENT_TRIPLES)
    return out


class TestCriterion4SecondMoment:
    def test_monte_carlo_second_moment(self, ihat_draws, record_criterion):
        ok, parts = True, []
        for k, t in enumerate(MOMENT_TRIPLES):
            good, mean, se = _mc_close(ihat_draws[:, k] ** 2, moment_Ihat(*t, 1))
            ok &= good
            parts.append(f"{t}: MC {mean:.4f} +- {se:.4f} vs {moment_Ihat(*t, 1):.4f}")
        record_criterion(4, ok, "; ".join(parts))
        assert ok


class TestCriterion5FourthMoment:
    def test_triangulation(self, record_criterion):
        closed = moment_I4_offdiag(2, 3, 5)
        brute = moment_bruteforce(2, 2, 3, 5)
        C = SpectrumModel().cl(5)
        R = 100_000
        vals = np.empty(R)
        for r in range(R):
            alm = sample_gaussian_alm(C, 5, replication_rng(5, 0, r))
            vals[r] = normalized_bispectrum(alm, 2, 3, 5, C)
        x = vals ** 4
        ok_closed, mean, se = _mc_close(x, closed)
        ok_brute = _mc_close(x, brute)[0]
        ok = abs(closed - brute) <= 1e-10 and ok_closed and ok_brute
        record_criterion(5, ok, f"(2,3,5): closed form {closed:.12f}, diagram oracle {brute:.12f}, "
                                f"MC E[I^4] {mean:.4f} +- {se:.4f} (10^5 reps)")
        assert ok


class TestCriterion6DiagramRules:
    def test_lemmas(self, record_criterion):
        diagrams = enumerate_diagrams(2)
        flat = [d for d in diagrams if classify(d).category == "flat"]
        flat_worst = max(abs(diagram_value(d, *t)) for t in [(2, 3, 5), (3, 3, 4), (2, 4, 4), (4, 4, 4)]
                         for d in flat)

        ls = (2, 3, 4)
        loops = {}
        for order, kind in ((2, "two_loop"), (3, "three_loop")):
            worst, count = 0.0, 0
            for d in diagrams:
                c = classify(d)
                if c.category != "connected" or c.min_loop_order != order:
                    continue
                try:
                    lhs, rhs = verify_loop_reduction(d, kind, *ls, require_even=False)
                except DomainError:
                    continue
                worst = max(worst, abs(lhs - rhs))
                count += 1
            loops[kind] = (count, worst)

        paired = {}
        for t in [(2, 3, 5), (3, 3, 4), (2, 4, 4), (4, 4, 4)]:
            for p in (1, 2):
                expect = math.prod(range(2 * p - 1, 0, -2)) * delta_factor(*t) ** p
                paired[(t, p)] = abs(paired_family_value(p, *t) - expect)

        ok = (len(flat) == 7047 and flat_worst <= 1e-12
              and all(n >= 1 and w <= 1e-10 for n, w in loops.values())
              and max(paired.values()) <= 1e-12)
        loop_txt = ", ".join(f"{k} {n} checked worst {w:.1e}" for k, (n, w) in loops.items())
        record_criterion(6, ok, f"{len(flat)} flat diagrams, worst |value| {flat_worst:.1e}; "
                                f"(2,3,4) {loop_txt}; paired family worst gap {max(paired.values()):.1e}")
        assert ok


def _uhat_monomials(max_degree: int = 6):
    for q0, a, b, c, d in itertools.product(range(max_degree + 1), repeat=5):
        if 0 < q0 + a + b + c + d <= max_degree:
            yield q0, (a, b), (c, d)


class TestCriterion7StudentisedMoments:
    def test_uhat_moments(self, ihat_draws, record_criterion):
        rng = np.random.default_rng(7)
        R, l = 100_000, 2
        a0 = rng.standard_normal(R)
        am = (rng.standard_normal((R, l)) + 1j * rng.standard_normal((R, l))) / math.sqrt(2)
        chat = (a0 ** 2 + 2 * np.sum(np.abs(am) ** 2, axis=1)) / (2 * l + 1)
        u0 = a0 / np.sqrt(chat)
        u = am / np.sqrt(chat)[:, None]

        failures, n_checked, n_zero = [], 0, 0
        for q0, (a, b), (c, d) in _uhat_monomials():
            x = u0 ** q0 * u[:, 0] ** a * np.conj(u[:, 0]) ** b * u[:, 1] ** c * np.conj(u[:, 1]) ** d
            expect = uhat_mixed_moment(l, q0, [(a, b), (c, d)])
            n_zero += expect == 0.0
            for part, target in ((x.real, expect), (x.imag, 0.0)):
                good, mean, se = _mc_close(part, target)
                if not good:
                    failures.append(((q0, a, b, c, d), mean, se, target))
            n_checked += 1

        # E Ihat^{2p} <= E I^{2p}: closed forms, then Monte Carlo against the exact E I^{2p}
        ordering = []
        for t in [(2, 3, 5), (3, 3, 4), (2, 4, 4), (4, 4, 4), (1, 2, 3)]:
            ordering.append(moment_Ihat(*t, 1) <= moment_I2(*t))
            ordering.append(moment_Ihat(*t, 2) <= moment_I4(*t))
        for k, t in enumerate(MOMENT_TRIPLES):
            for p, exact in ((1, moment_I2(*t)), (2, moment_I4(*t))):
                x = ihat_draws[:, k] ** (2 * p)
                ordering.append(x.mean() <= exact + 4 * x.std(ddof=1) / math.sqrt(x.size))

        ok = not failures and all(ordering)
        record_criterion(7, ok, f"l=2, p<=3: {n_checked} monomials ({n_zero} with zero mean), "
                                f"{len(failures)} outside 4 SE; E Ihat^2p <= E I^2p on "
                                f"{sum(ordering)}/{len(ordering)} checks")
        assert ok, failures[:5]


# --------------------------------------------------------------------------
# 8-11: simulation studies
# --------------------------------------------------------------------------

def _size_manifest(**kw) -> StudyManifest:
    base = dict(statistics=["J3"], L_list=[250], K_list=[0, 2, 4], fnl_list=[0.0], reps=REPS, seed=SIZE_SEED)
    base.update(kw)
    return StudyManifest(**base)


@pytest.fixture(scope="module")
def size_report():
    return run_size_study(_size_manifest(), workers=1)


class TestCriterion8Size:
    def test_empirical_size(self, size_report, record_criterion):
        band = 3 * math.sqrt(0.10 * 0.90 / REPS)
        parts, ok = [], True
        for K, (table10, table5) in SIZE_TABLE_250.items():
            c = size_report.cell("J3", 250, K)
            rate10, rate5 = 100 * c.rate_asymptotic["10"], 100 * c.rate_asymptotic["5"]
            ok &= abs(rate10 / 100 - table10 / 100) <= band
            parts.append(f"K={K} {rate10:.1f}% vs {table10} (5%: {rate5:.1f} vs {table5})")
        record_criterion(8, ok, f"S3 L=250 R={REPS}, band +-{100 * band:.2f} pp: " + "; ".join(parts))
        assert ok


class TestCriterion9CriticalTrend:
    def test_quantiles_move_toward_limit(self, record_criterion):
        rep = run_size_study(_size_manifest(L_list=[250, 500], seed=TREND_SEED), workers=1)
        levels = (("10", critical_value(0.10)), ("5", critical_value(0.05)))
        dist = {}
        misses, parts = [], []
        for L in (250, 500):
            d = []
            for K in (0, 2, 4):
                c = rep.cell("J3", L, K)
                for i, (key, z) in enumerate(levels):
                    q = c.mc_critical[key]
                    d.append(abs(q - z))
                    if abs(q - CRIT_TABLE[L][K][i]) > 0.15:
                        misses.append((L, K, key, round(q, 3), CRIT_TABLE[L][K][i]))
                parts.append(f"L={L} K={K} {c.mc_critical['10']:.2f} ({c.mc_critical['5']:.2f})")
            dist[L] = float(np.mean(d))
        ok = dist[500] < dist[250] and not misses
        record_criterion(9, ok, f"mean |q - z| L=250 {dist[250]:.3f}, L=500 {dist[500]:.3f}; "
                                f"{len(misses)} of 12 quantiles off table by > 0.15; " + "; ".join(parts))
        assert ok, misses


class TestCriterion10Power:
    def test_power_and_trend(self, record_criterion):
        m = StudyManifest(statistics=["J3", "J1", "J2"], L_list=[250], K_list=[2],
                          fnl_list=[0.0, 100.0, 300.0, 1000.0], reps=REPS, seed=POWER_SEED)
        rep = run_power_study(m, workers=1)
        j3 = [rep.cell("J3", 250, 2, f).rate_asymptotic["10"] for f in (100.0, 300.0, 1000.0)]
        strong = j3[2] >= 0.95
        monotone = all(b > a or (b == a == 1.0) for a, b in zip(j3, j3[1:]))
        weak, weak_txt = True, []
        for s in ("J1", "J2"):
            for f in (100.0, 300.0, 1000.0):
                c = rep.cell(s, 250, 2, f)
                for key, nominal in (("10", 0.10), ("5", 0.05)):
                    weak &= c.rate_asymptotic[key] <= 2 * nominal
                weak_txt.append(f"{s} f={f:g} {100 * c.rate_asymptotic['10']:.1f} "
                                f"({100 * c.rate_asymptotic['5']:.1f})")
        ok = strong and monotone and weak
        record_criterion(10, ok, "S3 K=2 power at 10%: "
                         + ", ".join(f"f={f} {100 * r:.1f}%" for f, r in zip((100, 300, 1000), j3))
                         + f" (>= 95%: {strong}, monotone: {monotone}); "
                         + "; ".join(weak_txt) + f" (<= 2x nominal: {weak})")
        assert ok


class TestCriterion11Determinism:
    def test_worker_count_does_not_change_reports(self, size_report, record_criterion):
        again = run_size_study(_size_manifest(), workers=2)
        same = (again.to_json() == size_report.to_json()
                and again.rates_csv() == size_report.rates_csv()
                and again.critical_csv() == size_report.critical_csv())
        record_criterion(11, same, "size study at L=250 rerun with 2 workers vs 1: "
                                   + ("byte-identical reports" if same else "reports differ"))
        assert same
