import math

import pytest

from beamvar.numerics import (BracketError, IntegrationError, OdeState, QuadratureError, RootBracket,
                              quad_adaptive, rk4_integrate, root_bisect, shoot_dirichlet)

# E from the limiting left problem; frozen from euler.solve_E (see test_euler for its oracle)
E_CONST = 3.2060194235511927


class TestQuadrature:
    def test_sine(self):
        assert quad_adaptive(math.sin, 0.0, math.pi, 1e-13) == pytest.approx(2.0, abs=1e-12)

    def test_cubic_exact(self):
        assert quad_adaptive(lambda x: x**3, 0.0, 1.0) == 0.25

    def test_half_angle_closed_form(self):
        val = quad_adaptive(lambda s: 1 / math.sqrt(4 * math.pi + 4 * math.pi * math.sin(s)), 0, math.pi, 1e-12)
        assert val == pytest.approx(math.sqrt(2) * math.log(1 + math.sqrt(2)) / math.sqrt(math.pi), abs=1e-10)

    def test_non_smooth_exhausts_depth(self):
        with pytest.raises(QuadratureError):
            quad_adaptive(lambda x: 1 / math.sqrt(abs(x - 0.3)) if x != 0.3 else 1e300, 0.0, 1.0, 1e-14,
                          max_depth=8)


class TestBisection:
    def test_linear(self):
        f = lambda x: x - 0.5
        assert root_bisect(f, RootBracket.of(f, 0, 1)) == pytest.approx(0.5, abs=1e-12)

    def test_theta_oracle(self):
        f = lambda t: t - 0.5 * math.cos(t)
        r = root_bisect(f, RootBracket.of(f, 0, 1), 1e-14)
        assert r == pytest.approx(0.450183611294874, abs=1e-13)

    def test_bracket_must_change_sign(self):
        with pytest.raises(BracketError):
            RootBracket.of(lambda x: x * x + 1, -1, 1)
        with pytest.raises(BracketError):
            RootBracket(1.0, 0.0, -1.0, 1.0)


class TestRK4:
    def test_linear_exact(self):
        traj = rk4_integrate(lambda t, y, v: 0.0, OdeState(0.0, 0.0, 1.0), 1.0, 7)
        assert traj[-1].y == pytest.approx(1.0, abs=1e-15)
        assert len(traj) == 8

    def test_sine(self):
        end = rk4_integrate(lambda t, y, v: -y, OdeState(0.0, 0.0, 1.0), math.pi / 2, 1000)[-1]
        assert end.y == pytest.approx(1.0, abs=1e-8)

    def test_fourth_order(self):
        errs = [abs(rk4_integrate(lambda t, y, v: -y, OdeState(0.0, 0.0, 1.0), 2.0, n)[-1].y - math.sin(2.0))
                for n in (80, 160)]
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)

    def test_first_integral_drift(self):
        rhs = lambda t, y, v: -2 * math.pi * math.cos(y)
        traj = rk4_integrate(rhs, OdeState(0.0, 0.0, -math.sqrt(E_CONST)), 1.0, 2000)
        inv = [0.5 * s.yp**2 + 2 * math.pi * math.sin(s.y) for s in traj]
        assert max(abs(v - inv[0]) for v in inv) < 1e-8

    def test_blow_up_detected(self):
        with pytest.raises(IntegrationError):
            rk4_integrate(lambda t, y, v: y**3, OdeState(0.0, 10.0, 10.0), 10.0, 50)


class TestShooting:
    def test_linear(self):
        s = shoot_dirichlet(lambda t, y, v: 0.0, 0.0, 0.0, 1.0, -math.pi, (-10.0, 10.0), 1e-12, 10)
        assert s.yp == pytest.approx(-math.pi, abs=1e-10)

    def test_sine(self):
        s = shoot_dirichlet(lambda t, y, v: -y, 0.0, 0.0, math.pi / 2, 1.0, (0.0, 3.0), 1e-12, 2000)
        assert s.yp == pytest.approx(1.0, abs=1e-7)

    def test_pendulum_end_slope(self):
        rhs = lambda t, y, v: -2 * math.pi * math.cos(y)
        s = shoot_dirichlet(rhs, 0.0, 0.0, 1.0, -math.pi, (-5.0, 0.0), 1e-13, 4000)
        end = rk4_integrate(rhs, s, 1.0, 4000)[-1]
        assert end.yp == pytest.approx(-math.sqrt(E_CONST), abs=1e-5)

    def test_bad_bracket(self):
        with pytest.raises(BracketError):
            shoot_dirichlet(lambda t, y, v: 0.0, 0.0, 0.0, 1.0, 5.0, (-1.0, 1.0))
