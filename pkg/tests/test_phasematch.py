import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcfpair import dispersion as dp
from pcfpair import phasematch as pm
from pcfpair.errors import DomainError

F2 = dp.FiberSpec(2.0)


def dense_roots(lp, pp, fiber, step=1e-5):
    """Sign changes of the mismatch on a 0.01 nm signal grid, away from the pump."""
    grid = np.arange(pm._scan_floor(lp, fiber), lp - 2 * pm.DEGENERATE_WIDTH, step)
    dk = pm.phase_mismatch(lp, grid, pp, fiber)
    i = np.nonzero(np.sign(dk[:-1]) != np.sign(dk[1:]))[0]
    return grid[i] - dk[i] * step / (dk[i + 1] - dk[i])


class TestEnergy:
    def test_583_900_pair(self):
        assert pm.idler_from_energy(0.7076, 0.583) * 1e3 == pytest.approx(900.0, abs=0.5)

    @given(st.floats(0.4, 1.6), st.floats(0.05, 0.95))
    def test_involution(self, lp, frac):
        ls = lp * (2 / 3 + frac / 3)
        li = pm.idler_from_energy(lp, ls)
        assert pm.idler_from_energy(lp, li) == pytest.approx(ls, rel=1e-12)

    def test_divergent_idler(self):
        with pytest.raises(DomainError, match="idler diverges"):
            pm.idler_from_energy(0.7, 0.35)
        with pytest.raises(DomainError, match="idler diverges"):
            pm.idler_from_energy(0.7, 1.4)

    def test_degenerate_fixed_point(self):
        assert pm.idler_from_energy(0.75, 0.75) == pytest.approx(0.75, rel=1e-15)


class TestMismatch:
    @given(st.floats(0.45, 1.5), st.floats(0.51, 10.0))
    def test_zero_at_degenerate_point_without_power(self, lp, d):
        dk = pm.phase_mismatch(lp, lp, 0.0, dp.FiberSpec(d))
        # rounding of beta ~ 1e7 rad/m
        assert abs(dk) < 1e-7 * pm.beta(lp, dp.FiberSpec(d))

    def test_linear_in_power(self):
        g = float(dp.gamma(0.72, F2))
        base = pm.phase_mismatch(0.72, 0.65, 0.0, F2)
        for p in (1.0, 10.0, 50.0):
            assert pm.phase_mismatch(0.72, 0.65, p, F2) - base == pytest.approx(-2 * g * p, rel=1e-6)

    def test_signal_idler_symmetry(self):
        ls = 0.62
        li = pm.idler_from_energy(0.75, ls)
        a = pm.phase_mismatch(0.75, ls, 5.0, F2)
        b = pm.phase_mismatch(0.75, li, 5.0, F2)
        assert a == pytest.approx(b, abs=1e-6)

    def test_units_rad_per_m(self):
        # beta is 2 pi n / lambda in rad/m: about 1.3e7 at 0.7 um
        assert pm.beta(0.7, F2) == pytest.approx(2 * math.pi * dp.n_eff(0.7, F2) / 0.7e-6, rel=1e-15)


class TestSolvePair:
    FROZEN = {0.70: (429.914, 1882.898), 0.75: (621.605, 945.243)}

    @pytest.mark.parametrize("lp", sorted(FROZEN))
    def test_frozen_rows(self, lp):
        sols = [s for s in pm.solve_pair(lp, 0.0, F2) if s.branch is pm.Branch.SIGNAL]
        assert len(sols) == 1
        s = sols[0]
        assert s.lambda_s * 1e3 == pytest.approx(self.FROZEN[lp][0], abs=1e-3)
        assert s.lambda_i * 1e3 == pytest.approx(self.FROZEN[lp][1], abs=1e-3)

    def test_degenerate_only_beyond_zdw(self):
        sols = pm.solve_pair(0.80, 0.0, F2)
        assert [s.branch for s in sols] == [pm.Branch.DEGENERATE]
        assert sols[0].lambda_s == sols[0].lambda_i == 0.80

    def test_power_opens_anomalous_sidebands(self):
        sols = pm.solve_pair(0.80, 50.0, F2)
        assert sols and all(s.branch is pm.Branch.SIGNAL for s in sols)
        assert 0 < sols[0].separation < 0.05

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lp = rng.uniform(0.55, 0.95)
            d = rng.uniform(1.0, 3.0)
            pp = rng.choice([0.0, 20.0])
            fib = dp.FiberSpec(d)
            got = sorted(s.lambda_s for s in pm.solve_pair(lp, pp, fib)
                         if s.lambda_s < lp - 2 * pm.DEGENERATE_WIDTH)
            ref = sorted(dense_roots(lp, pp, fib))
            assert len(got) == len(ref), (lp, d, pp)
            assert np.allclose(got, ref, atol=1e-8)

    @given(st.floats(0.55, 1.0), st.floats(1.0, 4.0), st.sampled_from([0.0, 1.0, 30.0]))
    def test_contracts(self, lp, d, pp):
        for s in pm.solve_pair(lp, pp, dp.FiberSpec(d)):
            assert s.energy_residual() < 1e-12
            assert abs(s.mismatch_residual) < 1e-6
            assert s.lambda_s <= s.lambda_p <= s.lambda_i
            assert s.pump_peak_power == pp

    def test_out_of_window_pump(self):
        with pytest.raises(DomainError):
            pm.solve_pair(4.0, 0.0, F2)

    def test_deterministic(self):
        assert pm.solve_pair(0.73, 3.0, F2) == pm.solve_pair(0.73, 3.0, F2)


class TestSweep:
    def test_grid_validation(self):
        with pytest.raises(DomainError, match="non-empty"):
            pm.SweepGrid((0.7, 0.8, 0.01), ())
        with pytest.raises(DomainError):
            pm.SweepGrid((0.8, 0.7, 0.01), (2.0,))
        with pytest.raises(DomainError):
            pm.SweepGrid((0.7, 0.8, 0.0), (2.0,))

    def test_ordering_and_determinism(self):
        g = pm.SweepGrid((0.70, 0.78, 0.02), (2.5, 1.5))
        a = pm.sweep(g, F2)
        b = pm.sweep(g, F2)
        assert pm.sweep_csv(a.rows) == pm.sweep_csv(b.rows)
        keys = [(r.core_diameter, r.lambda_p, r.lambda_s) for r in a.rows]
        ds = [k[0] for k in keys]
        assert ds == sorted(ds, key=lambda x: [2.5, 1.5].index(x))
        for d in (1.5, 2.5):
            sub = [k[1:] for k in keys if k[0] == d]
            assert sub == sorted(sub)

    def test_failures_are_recorded_not_raised(self):
        res = pm.sweep_points([0.7, 4.5], [2.0], 0.0, F2)
        assert len(res.failures) == 1 and res.failures[0][1] == 4.5
        assert res.rows

    def test_csv_roundtrip(self):
        rows = pm.solve_pair(0.7, 0.0, F2)
        back = pm.read_sweep_csv(pm.sweep_csv(rows))
        assert len(back) == len(rows)
        assert back[0][2] == pytest.approx(rows[0].lambda_s * 1e3, rel=1e-11)
        assert pm.sweep_csv(rows).splitlines()[0] == ",".join(pm.CSV_HEADER)

    def test_topology_below_zdw(self):
        z = dp.zero_dispersion_wavelength(F2)
        pumps = np.arange(0.68, z, 0.01)
        seps = []
        for lp in pumps:
            s = [x.separation for x in pm.solve_pair(lp, 0.0, F2) if x.branch is pm.Branch.SIGNAL]
            seps.append(s[0])
        assert max(seps) > 0.1
        assert np.all(np.diff(seps) < 0)
        near = [x.separation for x in pm.solve_pair(z - 0.002, 0.0, F2) if x.branch is pm.Branch.SIGNAL]
        assert near and near[0] < 0.1 * seps[0]
