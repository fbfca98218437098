"""Two-ODE relay system: closed forms, feasibility, switching dichotomy."""
import math

import numpy as np
import pytest

from liesegang import odetoy
from liesegang.odetoy import SwitchPolicy, ToyConfig


class TestIntegrate:
    def test_constant_forcing_no_switch_closed_form(self):
        cfg = ToyConfig(forcing="constant", horizon=1.0, dt=1e-4)
        tr = odetoy.integrate(cfg, SwitchPolicy(False, False))
        exact = (math.exp(2.0) - 1.0) / 4.0
        assert abs(tr.u[-1] - exact) < 1e-8
        assert abs(tr.v[-1] - exact) < 1e-8

    def test_constant_forcing_single_switch_closed_form(self):
        cfg = ToyConfig(forcing="constant", horizon=1.0, dt=1e-4)
        tr = odetoy.integrate(cfg, SwitchPolicy(True, False))
        assert abs(tr.u[-1] + 0.5) < 1e-8   # u(t) = -t/2
        assert abs(tr.v[-1] - 0.5) < 1e-8   # v(t) = +t/2

    def test_linear_forcing_single_switch_closed_form(self):
        cfg = ToyConfig(forcing="linear", horizon=1.0, dt=1e-4)
        tr = odetoy.integrate(cfg, SwitchPolicy(True, False))
        assert abs(tr.u[-1] + 1.0) < 1e-8   # u(t) = -t
        assert abs(tr.v[-1]) < 1e-8         # v(t) = 0

    def test_policy_swap_symmetry_is_exact(self):
        for forcing in ("constant", "linear"):
            cfg = ToyConfig(forcing=forcing, horizon=1.0, dt=1e-3)
            a = odetoy.integrate(cfg, SwitchPolicy(True, False))
            b = odetoy.integrate(cfg, SwitchPolicy(False, True))
            np.testing.assert_array_equal(a.u, b.v)
            np.testing.assert_array_equal(a.v, b.u)

    def test_sum_variable_matches_scalar_rk4_oracle(self):
        # s = u + v solves s' = 2 f + 2 s - (p_u + p_v); independent scalar RK4
        cfg = ToyConfig(forcing="linear", horizon=1.0, dt=1e-3)
        policy = SwitchPolicy(True, False)
        tr = odetoy.integrate(cfg, policy)
        p_total = 1.0

        def rhs(t, s):
            return 2 * cfg.f(t) + 2 * s - p_total

        s, t, dt = 0.0, 0.0, cfg.dt
        for k in range(tr.t.size - 1):
            k1 = rhs(t, s)
            k2 = rhs(t + dt / 2, s + dt / 2 * k1)
            k3 = rhs(t + dt / 2, s + dt / 2 * k2)
            k4 = rhs(t + dt, s + dt * k3)
            s += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (k + 1) * dt
        assert abs((tr.u[-1] + tr.v[-1]) - s) < 1e-10

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ToyConfig(forcing="quadratic")
        with pytest.raises(ValueError):
            ToyConfig(horizon=-1.0)


class TestFeasibility:
    def test_constant_no_switch_violates(self):
        cfg = ToyConfig(forcing="constant")
        policy = SwitchPolicy(False, False)
        res = odetoy.feasible(odetoy.integrate(cfg, policy), policy)
        assert not res.ok
        comp, t_viol, acc = res.violation
        assert comp == "u" and t_viol > 0 and acc > 0

    def test_constant_both_switch_feasible(self):
        cfg = ToyConfig(forcing="constant")
        policy = SwitchPolicy(True, True)
        assert odetoy.feasible(odetoy.integrate(cfg, policy), policy).ok

    def test_linear_single_switches_feasible(self):
        cfg = ToyConfig(forcing="linear")
        for policy in (SwitchPolicy(True, False), SwitchPolicy(False, True)):
            assert odetoy.feasible(odetoy.integrate(cfg, policy), policy).ok


class TestEnumerate:
    def test_constant_forcing_unique(self):
        table = odetoy.enumerate_policies(ToyConfig(forcing="constant"))
        assert table.verdict == "unique"
        assert table.feasible_policies() == [SwitchPolicy(True, True)]

    def test_linear_forcing_non_unique(self):
        table = odetoy.enumerate_policies(ToyConfig(forcing="linear"))
        assert table.verdict == "non-unique"
        feas = table.feasible_policies()
        assert SwitchPolicy(True, False) in feas
        assert SwitchPolicy(False, True) in feas
        assert SwitchPolicy(False, False) not in feas
        # the both-switch combination is computed, not assumed: its trajectory
        # u = v = (1/2 - t - e^{2t}/2)/2 stays nonpositive, hence feasible
        assert SwitchPolicy(True, True) in feas
        cfg = ToyConfig(forcing="linear")
        tr = odetoy.integrate(cfg, SwitchPolicy(True, True))
        closed = 0.5 * (0.5 - tr.t - 0.5 * np.exp(2 * tr.t))
        np.testing.assert_allclose(tr.u, closed, atol=1e-8)
        assert np.all(tr.u <= 1e-12)

    def test_table_serialization(self):
        table = odetoy.enumerate_policies(ToyConfig(forcing="constant"))
        d = table.to_json_dict()
        assert d["verdict"] == "unique"
        assert len(d["policies"]) == 4
        text = table.to_text()
        assert "verdict: unique" in text
