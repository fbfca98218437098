"""Deficit scheme, deposition scheme, and their invariants at desk scale."""
import math

import numpy as np
import pytest

import liesegang as lg
from liesegang import solver

PARAMS = lg.ModelParams.from_fraction(1.0, 1.0, 0.8)


def coarse_grid(t_max=0.05, dx=0.02, dt=1e-4, x_max=2.0):
    return lg.GridSpec.make(dx=dx, dt=dt, x_max=x_max, t_max=t_max)


class TestDeficitScheme:
    def test_zero_precipitation_reproduces_psi_exactly(self):
        rec = lg.run(PARAMS, coarse_grid(), lg.RelayKind.sharp(), snapshot_stride=100,
                     force_zero_p=True)
        assert np.all(rec.w == 0.0)
        assert np.all(rec.p == 0.0)

    def test_infinite_threshold_is_bit_identical_to_forced_zero(self):
        grid = coarse_grid()
        inf_params = lg.ModelParams(1.0, 1.0, math.inf)
        a = lg.run(inf_params, grid, lg.RelayKind.sharp(), snapshot_stride=100)
        b = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=100,
                   force_zero_p=True)
        np.testing.assert_array_equal(a.w, b.w)
        np.testing.assert_array_equal(a.p, b.p)
        assert not np.isfinite(a.ignition_time).any()

    def test_subcritical_threshold_never_precipitates(self):
        # u <= psi <= Psi(alpha) < u_star: the relay stays off for all time
        sub = lg.ModelParams(1.0, 1.0, 1.1 * PARAMS.psi_alpha)
        assert not sub.supercritical
        rec = lg.run(sub, coarse_grid(), lg.RelayKind.sharp(), snapshot_stride=100)
        assert rec.constants is None
        assert not rec.p.any()
        assert not np.isfinite(rec.ignition_time).any()

    def test_determinism_bitwise(self):
        grid = coarse_grid()
        a = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=50)
        b = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=50)
        for name in ("w", "p", "accum", "ignition_time", "times"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_non_finite_guard(self):
        stepper = lg.DeficitStepper(PARAMS, coarse_grid(), lg.RelayKind.sharp())
        stepper.step()
        stepper.w[0] = math.nan
        with pytest.raises(lg.NonFiniteField):
            stepper.step()

    def test_domain_truncation_validated(self):
        c = lg.compute_constants(PARAMS)
        grid = lg.GridSpec.make(dx=0.02, dt=1e-4, x_max=1.0, t_max=1.0)
        assert grid.x_max < grid.required_x_max(c.alpha_star)
        with pytest.raises(ValueError):
            lg.run(PARAMS, grid, lg.RelayKind.sharp())

    def test_snapshot_stride_validation(self):
        with pytest.raises(ValueError):
            lg.run(PARAMS, coarse_grid(), lg.RelayKind.sharp(), snapshot_stride=0)


class TestInvariants:
    """Structural bounds on a supercritical run (coarse grid; the acceptance
    suite re-checks them on the default grid)."""

    def test_u_below_psi(self, rec_coarse_sharp):
        assert rec_coarse_sharp.w.max() <= 1e-8

    def test_deficit_monotone_in_time(self, rec_coarse_sharp):
        w = rec_coarse_sharp.w
        slack = 1e-8 * (1.0 + np.abs(w[:-1]))
        assert np.all(np.diff(w, axis=0) <= slack)

    def test_positivity(self, rec_coarse_sharp):
        assert rec_coarse_sharp.u.min() > -1e-8

    def test_u_bounded_by_plateau(self, rec_coarse_sharp):
        assert rec_coarse_sharp.u.max() <= rec_coarse_sharp.params.psi_alpha + 1e-8

    def test_precipitation_confined_below_threshold_parabola(self, rec_coarse_sharp):
        c = rec_coarse_sharp.constants
        x = rec_coarse_sharp.x
        for k, t in enumerate(rec_coarse_sharp.times):
            if t <= 0:
                continue
            beyond = x > c.alpha_star * math.sqrt(t) + rec_coarse_sharp.grid.dx
            assert not rec_coarse_sharp.p[k, beyond].any()

    def test_ut_upper_bound(self, rec_coarse_sharp):
        c = rec_coarse_sharp.constants
        t = rec_coarse_sharp.times
        u = rec_coarse_sharp.u
        fwd = (u[1:] - u[:-1]) / np.diff(t)[:, None]
        rows = t[:-1] >= 10 * rec_coarse_sharp.grid.dt
        bound = c.C_psi / t[:-1][rows][:, None]
        assert np.max(fwd[rows] - bound) <= 2e-4

    def test_weaker_sink_gives_less_precipitation_and_larger_u(self):
        grid = coarse_grid(t_max=2 * lg.compute_constants(PARAMS).T2, x_max=4.0)
        low = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=50)
        weaker = lg.ModelParams(1.0, 1.0, PARAMS.u_star * 1.1)
        high = lg.run(weaker, grid, lg.RelayKind.sharp(), snapshot_stride=50)
        assert np.all(high.p <= low.p)
        assert np.all(high.u >= low.u - 1e-10)


class TestDepositionScheme:
    def test_starts_at_dt_with_closed_form_bootstrap(self):
        grid = coarse_grid()
        rec = lg.source_deposition_run(PARAMS, grid, lg.RelayKind.sharp(),
                                       snapshot_stride=100, force_zero_p=True)
        assert rec.times[0] == pytest.approx(grid.dt)
        assert np.allclose(rec.w[0], 0.0, atol=1e-15)

    def test_mass_balance_against_exact_source_integral(self):
        grid = lg.GridSpec.make(dx=5e-3, dt=2e-4, x_max=8.0, t_max=1.0)
        rec = lg.source_deposition_run(PARAMS, grid, lg.RelayKind.sharp(),
                                       snapshot_stride=100, force_zero_p=True)
        from scipy.integrate import trapezoid
        k1, k2 = 10, 40
        added = trapezoid(rec.u[k2] - rec.u[k1], rec.x)
        exact = PARAMS.alpha * PARAMS.beta * (math.sqrt(rec.times[k2]) - math.sqrt(rec.times[k1]))
        assert added == pytest.approx(exact, rel=0.01)

    def test_agrees_with_deficit_formulation_when_p_zero(self):
        grid = lg.GridSpec.make(dx=5e-3, dt=2e-4, x_max=8.0, t_max=1.0)
        depo = lg.source_deposition_run(PARAMS, grid, lg.RelayKind.sharp(),
                                        snapshot_stride=100, force_zero_p=True)
        defi = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=100,
                      force_zero_p=True)
        sel_d = depo.times >= 0.25
        sel_w = np.isin(np.round(defi.times, 12), np.round(depo.times[sel_d], 12))
        gap = np.abs(depo.u[sel_d] - defi.u[sel_w]).max()
        assert gap <= 5.0 * (grid.dx + math.sqrt(grid.dt))

    def test_with_precipitation_tracks_deficit_scheme(self):
        c = lg.compute_constants(PARAMS)
        grid = lg.GridSpec.make(dx=0.01, dt=5e-5, x_max=4.0, t_max=2 * c.T2)
        depo = lg.source_deposition_run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=100)
        defi = lg.run(PARAMS, grid, lg.RelayKind.sharp(), snapshot_stride=100)
        common = np.intersect1d(np.round(depo.times, 12), np.round(defi.times, 12))
        sel_d = np.isin(np.round(depo.times, 12), common)
        sel_w = np.isin(np.round(defi.times, 12), common)
        gap = np.abs(depo.u[sel_d] - defi.u[sel_w]).max()
        assert gap <= 5.0 * (grid.dx + math.sqrt(grid.dt))


class TestMeasureT1:
    def test_gradient_bound_holds_through_coarse_record(self, rec_coarse_sharp):
        t1 = solver.measure_t1(rec_coarse_sharp)
        assert t1 == pytest.approx(rec_coarse_sharp.grid.t_max)

    def test_requires_constants(self):
        grid = coarse_grid()
        rec = lg.run(lg.ModelParams(1.0, 1.0, math.inf), grid, lg.RelayKind.sharp())
        with pytest.raises(lg.NotSupercritical):
            solver.measure_t1(rec)

    def test_feeds_back_into_constants(self, rec_coarse_sharp):
        t1 = solver.measure_t1(rec_coarse_sharp)
        c = lg.compute_constants(PARAMS, t1=t1)
        assert c.T1 == t1
        assert c.T2 == pytest.approx(min((c.ring_width_L / c.alpha_star) ** 2, t1))
