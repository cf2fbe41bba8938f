import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcfpair import pairstats as ps
from pcfpair.errors import DomainError

POWERS = np.linspace(0.1, 10.0, 10)


class TestScaling:
    def test_mu_exactly_quadratic(self):
        base = ps.mu_from_pump(0.1, 1.0, 0.12, 3.0)
        for p in POWERS:
            assert ps.mu_from_pump(0.1, p, 0.12, 3.0) == pytest.approx(base * p * p, rel=1e-14)

    def test_raman_exactly_linear(self):
        for p in POWERS:
            assert ps.raman_rate(p, 0.02) == pytest.approx(0.02 * p, rel=1e-15)
        assert ps.raman_rate(0.0, 0.02) == 0.0

    def test_pair_to_raman_ratio_grows_linearly(self):
        r = [ps.mu_from_pump(0.1, p, 0.12, 3.0) / ps.raman_rate(p, 0.02) for p in POWERS]
        assert np.allclose(np.array(r) / POWERS, r[0] / POWERS[0], rtol=1e-13)

    def test_calibrate_k_reproduces_target(self):
        k = ps.calibrate_k(1700.0, 0.11, 2.0, 0.12)
        src = ps.SourceParams(ps.mu_from_pump(0.11, 2.0, 0.12, k))
        assert ps.coincidence_rates(src).twofold == pytest.approx(1700.0, rel=1e-12)

    def test_negative_inputs(self):
        with pytest.raises(DomainError):
            ps.mu_from_pump(0.1, -1.0, 0.12, 1.0)
        with pytest.raises(DomainError):
            ps.raman_rate(1.0, -0.1)
        with pytest.raises(DomainError):
            ps.calibrate_k(10.0, 0.1, 0.0, 0.1)


class TestParams:
    @pytest.mark.parametrize("kw", [dict(mu=-0.1), dict(mu=float("inf")), dict(mu=0.1, eta_s=1.2),
                                    dict(mu=0.1, raman_per_pulse=-1), dict(mu=0.1, rep_rate=0)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            ps.SourceParams(**kw)

    def test_string_statistics_accepted(self):
        assert not ps.SourceParams(0.1, photon_statistics="poissonian").thermal


class TestAnalyticRates:
    def test_zero_source(self):
        r = ps.coincidence_rates(ps.SourceParams(0.0), ps.SourceParams(0.0))
        assert (r.singles_s, r.singles_i, r.twofold, r.accidental_twofold, r.fourfold) == (0, 0, 0, 0, 0)

    def test_formulas(self):
        s = ps.SourceParams(0.05, 0.01, 0.5, 0.4, 1e6)
        r = ps.coincidence_rates(s)
        assert r.singles_s == pytest.approx(1e6 * 0.06 * 0.5)
        assert r.twofold == pytest.approx(1e6 * 0.05 * 0.2)
        assert r.accidental_twofold == pytest.approx(r.singles_s * r.singles_i / 1e6)
        assert ps.coincidence_rates(s, window_accidentals=False).accidental_twofold == 0.0

    def test_fourfold_independence(self):
        s = ps.SourceParams(0.03)
        r = ps.coincidence_rates(s, s)
        assert r.fourfold == pytest.approx(r.twofold**2 / s.rep_rate, rel=1e-14)

    def test_fourfold_arithmetic(self):
        f = ps.fourfold_from_twofold(1700.0, 1700.0)
        assert f == pytest.approx(0.036125, rel=1e-12)
        assert abs(f - 0.04) / 0.04 <= 0.2

    def test_warning_above_half(self):
        assert ps.coincidence_rates(ps.SourceParams(0.6)).warning == "mu_above_0.5"
        assert ps.coincidence_rates(ps.SourceParams(0.1), ps.SourceParams(0.7)).warning == "mu_above_0.5"
        assert ps.coincidence_rates(ps.SourceParams(0.5)).warning == ""

    def test_csv_row(self):
        r = ps.coincidence_rates(ps.SourceParams(0.1))
        assert ps.RateReport.csv_header().split(",") == list(ps.RATE_HEADER)
        assert len(r.csv_row().split(",")) == len(ps.RATE_HEADER)


class TestMonteCarlo:
    N = 1_000_000

    @pytest.mark.parametrize("mu", [0.01, 0.05, 0.1])
    def test_twofold_matches_exact_expectation(self, mu):
        s = ps.SourceParams(mu)
        rate, err = ps.mc_rates(s, self.N, seed=3)["twofold"]
        exact = s.rep_rate * ps.exact_twofold_probability(s)
        assert abs(rate - exact) < 3 * err

    @pytest.mark.parametrize("mu", [0.01, 0.05, 0.1])
    def test_twofold_matches_small_mu_rate(self, mu):
        s = ps.SourceParams(mu)
        rate, err = ps.mc_rates(s, self.N, seed=4)["twofold"]
        analytic = ps.coincidence_rates(s).twofold
        # small-mu expansion differs from the exact value at O(mu^2)
        bias = s.rep_rate * abs(ps.exact_twofold_probability(s) - mu * s.eta_s * s.eta_i)
        assert abs(rate - analytic) < 3 * err + bias

    def test_exact_probability_small_mu_limit(self):
        for mu in (1e-4, 1e-5):
            s = ps.SourceParams(mu)
            assert ps.exact_twofold_probability(s) / (mu * 0.36) == pytest.approx(1.0, abs=5 * mu)

    def test_fourfold_independence_mc(self):
        s = ps.SourceParams(0.2, eta_s=0.9, eta_i=0.9)
        out = ps.mc_rates(s, self.N, seed=5, p2=s)
        f, ef = out["fourfold"]
        pred = out["twofold"][0] * out["twofold_2"][0] / s.rep_rate
        assert abs(f - pred) < 3 * ef

    @pytest.mark.parametrize("stats", ["thermal", "poissonian"])
    def test_mean_pair_number(self, stats):
        s = ps.SourceParams(0.1, photon_statistics=stats)
        n = ps.sample_events(s, self.N, seed=6).n_pairs
        sigma = math.sqrt(0.1 * (1.1 if stats == "thermal" else 1.0) / self.N)
        assert abs(n.mean() - 0.1) < 3 * sigma

    def test_thermal_variance_exceeds_poisson(self):
        vt = ps.sample_events(ps.SourceParams(0.3), self.N, seed=7).n_pairs.var()
        vp = ps.sample_events(ps.SourceParams(0.3, photon_statistics="poissonian"), self.N, seed=7).n_pairs.var()
        assert vt > vp
        assert vt == pytest.approx(0.3 * 1.3, rel=0.02)
        assert vp == pytest.approx(0.3, rel=0.02)

    def test_deterministic(self):
        s = ps.SourceParams(0.1, 0.01)
        a = ps.sample_events(s, 100_000, seed=11)
        b = ps.sample_events(s, 100_000, seed=11)
        assert np.array_equal(a.n_pairs, b.n_pairs) and np.array_equal(a.click_s, b.click_s)
        c = ps.sample_events(s, 100_000, seed=12)
        assert not np.array_equal(a.n_pairs, c.n_pairs)

    @given(st.integers(1, 200_000), st.integers(1, 150_000))
    def test_split_ranges_match_sequential(self, split, extra):
        s = ps.SourceParams(0.2, 0.01)
        n = split + extra
        whole = ps.sample_events(s, n, seed=1)
        a = ps.sample_events(s, split, seed=1)
        b = ps.sample_events(s, extra, seed=1, start=split)
        assert np.array_equal(whole.n_pairs, np.concatenate([a.n_pairs, b.n_pairs]))
        assert np.array_equal(whole.click_i, np.concatenate([a.click_i, b.click_i]))

    def test_zero_pulses(self):
        with pytest.raises(DomainError):
            ps.sample_events(ps.SourceParams(0.1), 0, seed=0)


def test_dump_format():
    r1, r2 = ps.sample_two_sources(ps.SourceParams(0.5), ps.SourceParams(0.5), 50, seed=2, start=7)
    lines = ps.dump_events(r1, r2)
    assert len(lines) == 50
    assert lines[0].startswith("7,")
    for ln in lines:
        head, clicks = ln.split(",clicks:")
        assert len(head.split(",")) == 3
        assert all(c in "01" for c in clicks.split(","))
    with pytest.raises(DomainError):
        ps.dump_events(r1, ps.sample_events(ps.SourceParams(0.5), 49, seed=2, start=7))
