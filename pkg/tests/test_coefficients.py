import math

import numpy as np
import pytest
from scipy import integrate

from asymptint.coefficients import (
    EmdenFowler,
    Envelope,
    ExpDecay,
    ExprCoefficient,
    GeneralLipschitz,
    PowerDecay,
    coefficient_from_dict,
    double_tail,
    eval_coefficient,
    nonlinearity_from_dict,
    weighted_tail,
)
from asymptint.errors import BadParam, DivergentTail, DomainError


def quad_tail(f, k, T):
    val, _ = integrate.quad(lambda s: s**k * f(s), T, np.inf, epsabs=1e-15, epsrel=1e-13, limit=500)
    return val


class TestEvaluation:
    def test_power_value(self):
        assert eval_coefficient(PowerDecay(0.5, 4), 2) == pytest.approx(0.03125, rel=1e-15)

    def test_zero_coefficient(self):
        assert eval_coefficient(PowerDecay(0, 4), 7) == 0.0

    def test_domain_gate(self):
        with pytest.raises(DomainError):
            eval_coefficient(ExpDecay(1, 1), 0.0)

    @pytest.mark.parametrize("kw", [dict(mu=-1, p=2), dict(mu=1, p=-1)])
    def test_power_rejects(self, kw):
        with pytest.raises(BadParam):
            PowerDecay(**kw)

    def test_expr_needs_envelope(self):
        with pytest.raises(BadParam):
            ExprCoefficient("t^-3", None)


class TestWeightedTail:
    def test_power_examples(self):
        assert weighted_tail(PowerDecay(0.5, 4), 1, 1).value == pytest.approx(0.25, rel=1e-14)
        assert weighted_tail(PowerDecay(0.1, 5), 3, 1).value == pytest.approx(0.1, rel=1e-14)

    @pytest.mark.parametrize("coef, k", [(PowerDecay(1, 2), 1), (PowerDecay(1, 3), 2), (PowerDecay(1, 0), 0)])
    def test_divergence_gate(self, coef, k):
        with pytest.raises(DivergentTail):
            weighted_tail(coef, k, 1)

    @pytest.mark.parametrize("mu, gamma, k, T", [(1, 1, 0, 1), (2, 0.5, 1, 1), (1, 3, 2.5, 2), (0.3, 0.1, 1, 5)])
    def test_exp_against_quad(self, mu, gamma, k, T):
        got = weighted_tail(ExpDecay(mu, gamma), k, T).value
        assert got == pytest.approx(quad_tail(lambda s: mu * math.exp(-gamma * s), k, T), rel=1e-10)

    @pytest.mark.parametrize("k, T", [(0, 1), (1, 1), (1.5, 3), (2, 10)])
    def test_expr_against_quad(self, k, T):
        c = ExprCoefficient("t^-5 * (2 + exp(-t))", (2 + math.exp(-1), 5.0))
        res = weighted_tail(c, k, T)
        ref = quad_tail(lambda s: s**-5 * (2 + math.exp(-s)), k, T)
        assert abs(res.value - ref) <= max(res.error, 1e-12 * abs(ref)) + 1e-14

    def test_expr_matches_power(self):
        e = ExprCoefficient("0.5*t^-4", (0.5, 4.0))
        assert e.weighted_tail(1, 1).value == pytest.approx(0.25, rel=1e-10)


class TestDoubleTail:
    def test_power(self):
        # int_1^inf (s - 1) 0.5 s^-4 ds = 0.5 (1/2 - 1/3)
        assert double_tail(PowerDecay(0.5, 4), 1).value == pytest.approx(1 / 12, rel=1e-14)

    def test_zero(self):
        assert double_tail(PowerDecay(0, 4), 3).value == 0.0

    def test_exp_by_parts(self):
        assert double_tail(ExpDecay(1, 1), 1).value == pytest.approx(math.exp(-1), rel=1e-10)

    @pytest.mark.parametrize("T", [1.0, 2.5, 40.0])
    def test_power_large_T(self, T):
        # s = T/u maps the tail onto (0, 1]
        ref, _ = integrate.quad(lambda u: (T / u - T) * 0.3 * (T / u) ** -3.5 * T / u**2, 0, 1, epsrel=1e-13)
        assert double_tail(PowerDecay(0.3, 3.5), T).value == pytest.approx(ref, rel=1e-9)


def test_envelope_tail():
    env = Envelope(2.0, 4.0)
    assert env.tail(1, 1) == pytest.approx(1.0)
    assert not env.integrable(3)


def test_exp_envelope_sound():
    c = ExpDecay(1.3, 0.7)
    t = np.geomspace(1, 1e4, 2000)
    assert np.all(c(t) <= c.envelope(t) * (1 + 1e-12))


@pytest.mark.parametrize(
    "coef",
    [PowerDecay(0.5, 4), ExpDecay(1, 2, 0.5), ExprCoefficient("t^-3", (1, 3)), PowerDecay(1, 4).scaled(2),
     PowerDecay(1, 4).weighted(1)],
)
def test_dict_round_trip(coef):
    back = coefficient_from_dict(coef.to_dict())
    assert back.to_dict() == coef.to_dict()
    t = np.array([1.0, 3.0, 50.0])
    np.testing.assert_allclose(back(t), coef(t), rtol=1e-15)


def test_nonlinearities():
    ef = EmdenFowler(3, PowerDecay(1, 4))
    assert ef(2.0, -1.0) == pytest.approx(-1 / 16)
    assert nonlinearity_from_dict(ef.to_dict()).to_dict() == ef.to_dict()
    gl = GeneralLipschitz("t^-4*u", PowerDecay(1, 4))
    assert gl(2.0, 3.0) == pytest.approx(3 / 16)
    assert nonlinearity_from_dict(gl.to_dict()).to_dict() == gl.to_dict()
    with pytest.raises(BadParam):
        EmdenFowler(0.5, PowerDecay(1, 4))
