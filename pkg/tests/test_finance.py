import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bsdemc.finance import (AsianCall, Call, CallsCombination, DifferentialRates,
                            LinearRiskNeutral, ParameterError, ZeroDriver, black_scholes_call,
                            combination_bounds, eval_driver, eval_payoff)
from bsdemc.numkit import DimensionError

SIGMA, R_LOW, R_HIGH, MU = 0.2, 0.04, 0.06, 0.06


def quadrature_call(s0, k, r, sig, t, n=400):
    """Discounted E[(S_T - K)+] by Gauss-Legendre over the exercise region in x ~ N(0, 1)."""
    a, b = (math.log(k / s0) - (r - sig ** 2 / 2) * t) / (sig * math.sqrt(t)), 40.0
    nodes, weights = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (b - a) * nodes + 0.5 * (b + a)
    dens = np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi)
    st_ = s0 * np.exp((r - sig ** 2 / 2) * t + sig * math.sqrt(t) * x)
    return math.exp(-r * t) * 0.5 * (b - a) * np.sum(weights * (st_ - k) * dens)


def drivers():
    dr = DifferentialRates(R_LOW, R_HIGH, MU, SIGMA)
    return [ZeroDriver(), LinearRiskNeutral(R_LOW, dr.theta), dr]


class TestDrivers:
    @pytest.mark.parametrize("drv", drivers())
    def test_origin(self, drv):
        assert eval_driver(drv, 0.0, [100.0], 0.0, [0.0]) == 0.0

    def test_equal_rates_is_linear(self):
        rng = np.random.default_rng(0)
        y, z = rng.normal(size=500), rng.normal(size=(500, 1))
        dr = DifferentialRates(0.05, 0.05, MU, SIGMA)
        lin = LinearRiskNeutral(0.05, dr.theta)
        np.testing.assert_array_equal(dr(0, None, y, z), lin(0, None, y, z))

    def test_negative_part_vanishes(self):
        dr = DifferentialRates(R_LOW, R_HIGH, MU, SIGMA)
        val = eval_driver(dr, 0.0, [100.0], 1.0, [SIGMA])
        assert val == pytest.approx(-(R_LOW + SIGMA * dr.theta))

    def test_borrowing_branch(self):
        dr = DifferentialRates(R_LOW, R_HIGH, MU, SIGMA)
        y, z = 1.0, 2.0  # y - z/sigma = -9 -> borrow 9
        expected = -(y * R_LOW + z * dr.theta - 9.0 * (R_HIGH - R_LOW))
        assert eval_driver(dr, 0.0, [100.0], y, [z]) == pytest.approx(expected)

    def test_parameter_checks(self):
        with pytest.raises(ParameterError):
            DifferentialRates(0.04, 0.06, 0.06, 0.0)
        with pytest.raises(ParameterError):
            DifferentialRates(0.06, 0.04, 0.06, 0.2)

    def test_lipschitz_bound(self):
        dr = DifferentialRates(R_LOW, R_HIGH, MU, SIGMA)
        c = dr.lipschitz()
        assert c == pytest.approx(R_LOW + abs(dr.theta) + (R_HIGH - R_LOW) * (1 + 1 / SIGMA))
        rng = np.random.default_rng(1)
        y1, y2 = rng.normal(0, 10, (2, 10 ** 4))
        z1, z2 = rng.normal(0, 10, (2, 10 ** 4, 1))
        lhs = np.abs(dr(0, None, y2, z2) - dr(0, None, y1, z1))
        rhs = c * (np.abs(y2 - y1) + np.abs(z2 - z1)[:, 0])
        assert np.all(lhs <= rhs + 1e-12)


class TestPayoffs:
    def test_examples(self):
        assert eval_payoff(Call(100.0), [100.0]) == 0.0
        assert eval_payoff(CallsCombination(95.0, 105.0), [110.0]) == 5.0
        assert eval_payoff(AsianCall(100.0), [120.0, 100.0]) == 0.0
        assert eval_payoff(AsianCall(100.0), [90.0, 103.0]) == 3.0

    def test_signs_and_cap(self):
        s = np.linspace(0, 300, 3001)[:, None]
        assert np.all(Call(100.0)(s) >= 0)
        combo = CallsCombination(95.0, 105.0)(s)
        assert combo.max() == pytest.approx(10.0) and np.all(combo <= 10.0)
        assert s[np.argmax(combo), 0] == pytest.approx(105.0)
        assert np.all(AsianCall(100.0)(np.hstack([s, s])) >= 0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            Call(0.0)
        with pytest.raises(ParameterError):
            CallsCombination(105.0, 95.0)
        with pytest.raises(DimensionError):
            AsianCall(100.0)(np.array([[100.0]]))


class TestBlackScholes:
    def test_reference_value_two_decimals(self):
        # The reference figure is 7.15 with a +-0.005 band; the exact value
        # is 7.155896..., just outside that band (see the decisions log).
        assert black_scholes_call(100, 100, 0.06, 0.2, 0.5) == pytest.approx(7.15, abs=0.005)

    @pytest.mark.parametrize("args", [(100, 100, 0.06, 0.2, 0.5), (100, 95, 0.03, 0.25, 0.75),
                                      (80, 120, 0.1, 0.6, 3.0)])
    def test_against_independent_quadrature(self, args):
        s0, k, r, sig, t = args
        assert black_scholes_call(*args) == pytest.approx(quadrature_call(*args), abs=1e-9)

    def test_exact_reference(self):
        assert black_scholes_call(100, 100, 0.06, 0.2, 0.5) == pytest.approx(7.155896, abs=1e-6)

    def test_limits(self):
        assert black_scholes_call(100, 1e-12, 0.05, 0.2, 1.0) == pytest.approx(100.0, abs=1e-9)
        assert black_scholes_call(100, 100, 0.0, 1e-10, 1.0) == pytest.approx(0.0, abs=1e-8)

    def test_rejects_nonpositive(self):
        for args in [(0, 100, 0.0, 0.2, 1), (100, 100, 0.0, 0.0, 1), (100, 100, 0.0, 0.2, 0)]:
            with pytest.raises(ParameterError):
                black_scholes_call(*args)

    @given(s0=st.floats(1, 500), k=st.floats(1, 500), r=st.floats(-0.05, 0.2),
           sig=st.floats(0.01, 1.5), t=st.floats(0.01, 5))
    def test_bounds_and_monotonicity(self, s0, k, r, sig, t):
        v = black_scholes_call(s0, k, r, sig, t)
        assert v >= max(s0 - k * math.exp(-r * t), 0.0) - 1e-9
        assert v <= s0 + 1e-9
        assert black_scholes_call(s0, k, r, sig * 1.1, t) >= v - 1e-9
        assert black_scholes_call(s0 * 1.01, k, r, sig, t) >= v - 1e-9


class TestCombinationBounds:
    def test_table_values(self):
        got = combination_bounds(100, 95, 105, 0.01, 0.06, 0.2, 0.25)
        for g, want in zip(got, (2.75, 2.76, 1.92, 3.60)):
            assert g == pytest.approx(want, abs=0.01)
        lows, high = got[:3], got[3]
        assert max(lows) < high

    def test_equal_rates(self):
        got = combination_bounds(100, 95, 105, 0.03, 0.03, 0.2, 0.25)
        assert got[0] == got[1]

    def test_far_second_strike(self):
        got = combination_bounds(100, 95, 1e6, 0.01, 0.06, 0.2, 0.25)
        bs_r = black_scholes_call(100, 95, 0.01, 0.2, 0.25)
        bs_big = black_scholes_call(100, 95, 0.06, 0.2, 0.25)
        np.testing.assert_allclose(got, (bs_big, bs_r, bs_r, bs_big), atol=1e-12)
