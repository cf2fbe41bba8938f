import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, special

from pcfpair import dispersion as dp
from pcfpair.errors import DomainError

F2 = dp.FiberSpec(2.0)


def oracle_neff(lam, d):
    """Plain bracketed root of the unscaled LP01 equation, independent of the solver."""
    n = dp.silica_index(lam)
    v = math.pi * d / lam * math.sqrt(n * n - 1)

    def g(u):
        w = math.sqrt(v * v - u * u)
        return u * special.j1(u) * special.k0(w) - w * special.k1(w) * special.j0(u)

    hi = min(v, dp.J0_ZERO) * (1 - 1e-15)
    u = optimize.brentq(g, 1e-12 * v, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    b = 1 - (u / v) ** 2
    return math.sqrt(1 + b * (n * n - 1))


def material_zdw_oracle():
    lam = np.arange(1.0, 1.5, 1e-4)
    n = dp.silica_index(lam)
    d2 = np.gradient(np.gradient(n, lam), lam)
    i = np.nonzero(np.sign(d2[:-1]) != np.sign(d2[1:]))[0][0]
    return float(lam[i] - d2[i] * (lam[i + 1] - lam[i]) / (d2[i + 1] - d2[i]))


class TestSellmeier:
    def test_hand_value_d_line(self):
        # 3-term fit evaluated by hand at 587.6 nm
        lam2 = 0.5876 ** 2
        b = (0.6961663, 0.4079426, 0.8974794)
        c = (0.0684043, 0.1162414, 9.896161)
        hand = math.sqrt(1 + sum(bk * lam2 / (lam2 - ck**2) for bk, ck in zip(b, c)))
        assert dp.silica_index(0.5876) == pytest.approx(hand, abs=1e-15)
        assert dp.silica_index(0.5876) == pytest.approx(1.4585, abs=2e-4)

    def test_window_edges(self):
        assert math.isfinite(dp.silica_index(0.21))
        assert math.isfinite(dp.silica_index(3.7))

    @pytest.mark.parametrize("lam", [5.0, 0.2, float("nan"), -1.0])
    def test_out_of_window(self, lam):
        with pytest.raises(DomainError, match=r"\[0.21, 3.7\]"):
            dp.silica_index(lam)

    def test_vectorized_matches_scalar(self):
        lam = np.linspace(0.3, 3.0, 17)
        assert np.array_equal(dp.silica_index(lam), [dp.silica_index(x) for x in lam])

    def test_invalid_model(self):
        with pytest.raises(DomainError):
            dp.SellmeierModel(b=(1.0, -1.0, 1.0))

    @given(st.floats(0.25, 3.6))
    def test_index_at_least_one_and_smooth(self, lam):
        n = dp.silica_index(lam)
        assert n >= 1
        h = 1e-4
        d2 = (dp.silica_index(lam + h) - 2 * n + dp.silica_index(lam - h)) / h**2
        assert math.isfinite(d2)


class TestFiberSpec:
    @pytest.mark.parametrize("d", [0.5, -1.0, 0.0, 60.0])
    def test_bad_diameter(self, d):
        with pytest.raises(DomainError, match="core_diameter"):
            dp.FiberSpec(d)

    def test_bad_length_and_n2(self):
        with pytest.raises(DomainError):
            dp.FiberSpec(2.0, length=0.0)
        with pytest.raises(DomainError):
            dp.FiberSpec(2.0, n2=-1e-20)


class TestModeSolver:
    def test_frozen_value(self):
        assert dp.n_eff(0.7, F2) == pytest.approx(1.4350029926158174, abs=1e-13)

    def test_v_number_identity(self):
        m = dp.effective_index(0.7, F2)
        n = dp.silica_index(0.7)
        assert m.v_number == pytest.approx(math.pi * 2.0 / 0.7 * math.sqrt(n * n - 1), rel=1e-15)
        assert m.u**2 + m.w**2 == pytest.approx(m.v_number**2, rel=1e-12)

    def test_bulk_limit(self):
        for lam in (0.6, 1.0, 1.5):
            assert dp.n_eff(lam, dp.FiberSpec(50.0)) == pytest.approx(dp.silica_index(lam), abs=1e-3)

    def test_monotone_in_diameter(self):
        ds = np.linspace(0.6, 5.0, 40)
        ne = [dp.n_eff(0.7, dp.FiberSpec(d)) for d in ds]
        assert np.all(np.diff(ne) > 0)
        assert all(1 < x < dp.silica_index(0.7) for x in ne)

    def test_oracle_agreement_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            lam = rng.uniform(0.3, 3.5)
            d = rng.uniform(0.6, 5.0)
            assert dp.n_eff(lam, dp.FiberSpec(d)) == pytest.approx(oracle_neff(lam, d), abs=1e-10)

    @given(st.floats(0.22, 3.69), st.floats(0.51, 50.0))
    def test_residual_and_bounds(self, lam, d):
        m = dp.effective_index(lam, dp.FiberSpec(d))
        assert abs(m.residual) < 1e-12
        assert 1.0 < m.n_eff < dp.silica_index(lam)

    def test_extreme_v_residuals(self):
        # V from about 0.1 to about 600
        lam = np.array([3.69, 3.69, 0.22, 0.22])
        for d, l in zip([0.51, 50.0, 0.51, 50.0], lam):
            assert abs(dp.effective_index(float(l), dp.FiberSpec(d)).residual) < 1e-12

    def test_vectorized_matches_scalar(self):
        lam = np.linspace(0.4, 1.6, 25)
        vec = dp.n_eff(lam, F2)
        assert np.allclose(vec, [dp.n_eff(float(x), F2) for x in lam], rtol=0, atol=1e-15)

    def test_deterministic(self):
        assert dp.effective_index(0.81, F2) == dp.effective_index(0.81, F2)


class TestZdw:
    FROZEN = {1.0: 613.645, 1.5: 687.941, 2.0: 755.598, 2.5: 813.973}

    def test_frozen_and_monotone(self):
        z = [dp.zero_dispersion_wavelength(dp.FiberSpec(d)) for d in (1.0, 1.5, 2.0, 2.5)]
        assert all(a < b for a, b in zip(z, z[1:]))
        for d, zz in zip((1.0, 1.5, 2.0, 2.5), z):
            assert zz * 1e3 == pytest.approx(self.FROZEN[d], abs=0.05)

    def test_bulk_limit_against_material_oracle(self):
        z = dp.zero_dispersion_wavelength(dp.FiberSpec(50.0))
        ref = material_zdw_oracle()
        assert ref == pytest.approx(1.27, abs=0.02)
        assert abs(z - ref) < 0.020

    def test_sign_flip_across(self):
        z = dp.zero_dispersion_wavelength(F2)
        assert dp.d2n_dlam2(z - 1e-4, F2) * dp.d2n_dlam2(z + 1e-4, F2) < 0

    def test_no_zdw(self):
        with pytest.raises(DomainError, match="no ZDW in range"):
            dp.zero_dispersion_wavelength(F2, window=(1.0, 1.5))

    def test_gvd_sign(self):
        z = dp.zero_dispersion_wavelength(F2)
        assert dp.gvd(z - 0.05, F2) < 0 < dp.gvd(z + 0.05, F2)

    def test_richardson_vs_finer_step(self):
        lam = 0.9
        a = dp.d2n_dlam2(lam, F2, h=1e-4)
        b = dp.d2n_dlam2(lam, F2, h=2e-4)
        assert a == pytest.approx(b, rel=1e-5)


class TestAreaGamma:
    def test_order_of_magnitude_and_oracle(self):
        a = dp.effective_area(0.7, F2) * 1e12
        assert 1.0 <= a <= 10.0
        ref = dp.overlap_area(0.7, F2) * 1e12
        assert abs(a - ref) / ref < 0.20

    def test_increases_with_wavelength(self):
        lam = np.linspace(0.5, 1.6, 30)
        assert np.all(np.diff(dp.effective_area(lam, F2)) > 0)

    def test_confinement_ratio(self):
        r = [dp.effective_index(0.7, dp.FiberSpec(d)).mode_field_radius / d for d in (10, 20, 50)]
        assert all(x < 1 for x in r)
        assert abs(r[2] - r[1]) < abs(r[1] - r[0])
        assert r[2] == pytest.approx(0.325, abs=0.005)

    def test_gamma_hand_value(self):
        g = dp.gamma(0.708, F2, a_eff=3.0e-12)
        assert g == pytest.approx(2 * math.pi * 2e-20 / (0.708e-6 * 3.0e-12), rel=1e-14)
        assert g == pytest.approx(0.0592, abs=1e-4)

    def test_gamma_inverse_area(self):
        assert dp.gamma(0.7, F2, a_eff=6e-12) == pytest.approx(dp.gamma(0.7, F2, a_eff=3e-12) / 2)

    def test_gamma_continuous(self):
        lam = np.linspace(0.6, 0.9, 301)
        g = np.array([dp.gamma(x, F2) for x in lam])
        assert np.all(g > 0)
        # no jumps: first differences vary smoothly on a 1 nm grid
        d1 = np.diff(g)
        assert np.max(np.abs(d1)) < 5e-3 * g.max()
        assert np.max(np.abs(np.diff(d1))) < 0.05 * np.max(np.abs(d1))

    def test_gamma_bad_area(self):
        with pytest.raises(DomainError):
            dp.gamma(0.7, F2, a_eff=0.0)
