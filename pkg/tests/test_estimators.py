import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherebispec.errors import DomainError, NumericGuardError, ParityError
from spherebispec.estimators import (
    BispectrumOrdinate,
    PowerSpectrum,
    bispectrum_many,
    delta_factor,
    estimate_bispectrum,
    estimate_cl,
    estimate_spectrum,
    g_factor,
    moment_I2,
    moment_I4,
    moment_I4_asymptotic,
    moment_I4_offdiag,
    moment_Ihat,
    normalized_bispectrum,
    normalized_bispectrum_hat,
    uhat_mixed_moment,
)
from spherebispec.sht import HarmonicCoefficients
from spherebispec.wigner import wigner_3j, wigner_6j


def random_alm(L, seed, l_min=1):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((L + 1, L + 1)) + 1j * rng.standard_normal((L + 1, L + 1))
    v[:, 0] = v[:, 0].real
    return HarmonicCoefficients(v, l_min)


def bispectrum_direct(alm, l1, l2, l3):
    total = 0.0
    for m1 in range(-l1, l1 + 1):
        for m2 in range(-l2, l2 + 1):
            m3 = -m1 - m2
            if abs(m3) <= l3:
                total += wigner_3j(l1, l2, l3, m1, m2, m3) * alm[l1, m1] * alm[l2, m2] * alm[l3, m3]
    return total


class TestPowerSpectrum:
    def test_estimate_cl_definition(self):
        alm = random_alm(6, 1)
        for l in range(1, 7):
            row = alm.row(l)
            assert estimate_cl(alm, l) == pytest.approx(np.sum(np.abs(row) ** 2) / (2 * l + 1))
        chat = estimate_spectrum(alm)
        assert chat[3] == pytest.approx(estimate_cl(alm, 3))

    def test_positive_spectrum_required(self):
        with pytest.raises(DomainError):
            PowerSpectrum([1.0, 0.0], 1)

    def test_indexing_and_dense(self):
        C = PowerSpectrum([3.0, 2.0, 1.0], 2)
        assert C.L == 4 and C[3] == 2.0
        assert np.isnan(C.dense()[1]) and C.dense()[4] == 1.0
        with pytest.raises(DomainError):
            C[1]


class TestBispectrum:
    def test_matches_direct_sum(self):
        alm = random_alm(8, 2)
        for t in [(2, 3, 5), (4, 4, 4), (3, 5, 6), (1, 1, 2), (2, 7, 7)]:
            direct = bispectrum_direct(alm, *t)
            assert abs(direct.imag) < 1e-10
            assert estimate_bispectrum(alm, *t) == pytest.approx(direct.real, rel=1e-11)

    def test_permutation_invariant_bitwise(self):
        alm = random_alm(10, 3)
        vals = bispectrum_many(alm, [(3, 5, 8), (8, 5, 3), (5, 3, 8), (3, 8, 5)])
        assert len(set(vals.tolist())) == 1

    def test_odd_and_triangle_rejected(self):
        alm = random_alm(6, 4)
        with pytest.raises(ParityError):
            estimate_bispectrum(alm, 2, 3, 4)
        with pytest.raises(DomainError):
            estimate_bispectrum(alm, 1, 1, 4)
        with pytest.raises(DomainError):
            estimate_bispectrum(alm, 2, 3, 9)

    def test_imaginary_guard(self):
        # the constructor enforces a real a_l0, so corrupt the array afterwards
        corrupt = HarmonicCoefficients.zeros(3)
        corrupt.values[2, 0] = 1.0j
        with pytest.raises(NumericGuardError):
            estimate_bispectrum(corrupt, 2, 2, 2)

    def test_normalised_sign_and_known_spectrum(self):
        alm = random_alm(6, 5)
        C = PowerSpectrum(np.arange(1, 7, dtype=float), 1)
        b = estimate_bispectrum(alm, 2, 3, 5)
        assert normalized_bispectrum(alm, 2, 3, 5, C) == pytest.approx(-b / math.sqrt(2 * 3 * 5))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), st.integers(0, 10 ** 6))
    def test_ihat_scale_invariant(self, c, seed):
        alm = random_alm(6, seed)
        base = normalized_bispectrum_hat(alm, 2, 3, 5)
        scaled = normalized_bispectrum_hat(alm * c, 2, 3, 5)
        assert scaled == pytest.approx(math.copysign(1.0, c) * base, rel=1e-12)

    def test_ordinate_record(self):
        o = BispectrumOrdinate(2, 3, 5, "Ihat", 0.5)
        assert o.triple == (2, 3, 5)
        with pytest.raises(DomainError):
            BispectrumOrdinate(3, 2, 5, "Ihat", 0.5)
        with pytest.raises(DomainError):
            BispectrumOrdinate(2, 3, 5, "other", 0.5)


class TestMoments:
    def test_delta_factor(self):
        assert delta_factor(2, 3, 5) == 1
        assert delta_factor(3, 3, 4) == 2
        assert delta_factor(2, 4, 4) == 2
        assert delta_factor(4, 4, 4) == 6
        with pytest.raises(DomainError):
            delta_factor(5, 3, 2)

    def test_second_moment(self):
        assert moment_I2(2, 3, 5) == 1.0
        assert moment_I2(3, 3, 4) == 2.0
        assert moment_I2(4, 4, 4) == 6.0

    def test_fourth_moment_offdiag_linear_sixj(self):
        w = wigner_6j(2, 3, 5, 2, 3, 5)
        expect = 3 + 6 / 5 + 6 / 7 + 6 / 11 + 6 * w
        assert moment_I4_offdiag(2, 3, 5) == pytest.approx(expect, rel=1e-15)
        # frozen from the diagram oracle
        assert moment_I4_offdiag(2, 3, 5) == pytest.approx(5.605194805194805, abs=1e-12)
        assert moment_I4_offdiag(2, 4, 6) == pytest.approx(5.32913752913753, abs=1e-12)

    def test_fourth_moment_limit(self):
        l1 = 3
        gaps = [abs(moment_I4_offdiag(l1, l, l + 1) - (6 * l1 + 9) / (2 * l1 + 1)) for l in (10, 40, 160)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.1

    def test_fourth_moment_offdiag_rejects_repeats(self):
        with pytest.raises(DomainError):
            moment_I4_offdiag(3, 3, 4)

    def test_repeated_fourth_moment_from_oracle(self):
        assert moment_I4(3, 3, 4) == pytest.approx(31.740259740259738, abs=1e-10)
        assert moment_I4_asymptotic(3, 3, 4) == 12.0

    def test_g_factor(self):
        for l in (1, 5, 40):
            assert g_factor(l, 1) == 1.0
            assert g_factor(l, 0) == 1.0
        assert g_factor(2, 2) == pytest.approx(5 / 7)
        vals = [g_factor(l, 3) for l in (2, 20, 200, 2000)]
        assert all(v < 1 for v in vals) and vals == sorted(vals) and vals[-1] > 0.998

    def test_ihat_moments(self):
        assert moment_Ihat(2, 3, 5, 1) == 1.0
        for l in (2, 4, 10):
            expect = 6 * (1 - 2 / (2 * l + 3)) * (1 - 4 / (2 * l + 5))
            assert moment_Ihat(l, l, l, 1) == pytest.approx(expect)
        assert moment_Ihat(4, 4, 4, 1) == pytest.approx(486 / 143)
        assert moment_Ihat(2, 3, 5, 2) == pytest.approx(
            moment_I4_offdiag(2, 3, 5) * g_factor(2, 2) * g_factor(3, 2) * g_factor(5, 2))
        assert moment_Ihat(3, 3, 4, 1) == pytest.approx(2 * g_factor(3, 2) * g_factor(4, 1))
        with pytest.raises(DomainError):
            moment_Ihat(2, 3, 5, 3)

    def test_ihat_not_above_i(self):
        for t in [(2, 3, 5), (3, 3, 4), (2, 4, 4), (4, 4, 4), (1, 2, 3)]:
            for p in (1, 2):
                base = moment_I2(*t) if p == 1 else moment_I4(*t)
                assert moment_Ihat(*t, p) <= base


class TestUhatMoments:
    def test_trivial_and_special(self):
        assert uhat_mixed_moment(3, 2, []) == 1.0
        assert uhat_mixed_moment(2, 4, []) == pytest.approx(15 / 7)
        for p in range(1, 4):
            expect = math.prod(range(2 * p - 1, 0, -2)) * float(
                Fraction(5 ** p, math.prod(5 + 2 * k for k in range(p))))
            assert uhat_mixed_moment(2, 2 * p, []) == pytest.approx(expect)

    def test_zero_cases(self):
        assert uhat_mixed_moment(2, 3, []) == 0.0
        assert uhat_mixed_moment(2, 0, [(2, 0)]) == 0.0
        assert uhat_mixed_moment(2, 2, [(1, 2)]) == 0.0

    def test_pair_formula(self):
        assert uhat_mixed_moment(2, 0, [1]) == 1.0
        assert uhat_mixed_moment(2, 0, [2]) == pytest.approx(2 * g_factor(2, 2))
        assert uhat_mixed_moment(2, 2, [1, 1]) == pytest.approx(g_factor(2, 3))
        assert uhat_mixed_moment(2, 0, [(1, 1), 2]) == uhat_mixed_moment(2, 0, [1, 2])

    def test_too_many_slots(self):
        with pytest.raises(DomainError):
            uhat_mixed_moment(2, 0, [1, 1, 1])
