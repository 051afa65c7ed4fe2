import json
import math

import pytest

from asymptint.coefficients import EmdenFowler, ExpDecay, GeneralLipschitz, PowerDecay
from asymptint.criteria import (
    Condition,
    ProblemInstance,
    check_atkinson,
    check_cor9,
    check_derivative_space,
    check_dube_mingarelli,
    check_scheme,
    check_theorem6,
    check_theorem10_cor11,
    check_theorem12,
    run_all,
    select_p,
)
from asymptint.errors import BadParam, NotApplicable


def ef(lam, mu, p, t0=1.0, **params):
    return ProblemInstance(EmdenFowler(lam, PowerDecay(mu, p)), t0, params)


class TestCondition:
    def test_strict_pass_fail(self):
        assert Condition("x", 0.5, 1.0).verdict == "pass"
        assert Condition("x", 1.5, 1.0).verdict == "fail"

    def test_boundary_inconclusive(self):
        assert Condition("x", 1.0, 1.0).verdict == "inconclusive"

    def test_error_widens_margin(self):
        assert Condition("x", 0.99, 1.0, error=0.02).verdict == "inconclusive"

    def test_non_strict_boundary_passes(self):
        assert Condition("x", 1.0, 1.0, strict=False).verdict == "pass"

    def test_nan_fails(self):
        assert Condition("x", math.inf, 1.0).verdict == "fail"


class TestAtkinson:
    def test_pass(self):
        res = check_atkinson(ef(3, 0.5, 4))
        assert res.constants["eta"] == pytest.approx(0.75, rel=1e-14)
        assert res.constants["p"] == pytest.approx(1.5)
        assert res.passed

    def test_fail(self):
        res = check_atkinson(ef(3, 1, 4))
        assert res.constants["eta"] == pytest.approx(1.5)
        assert res.verdict == "fail"

    def test_divergent_flags_oscillation(self):
        res = check_atkinson(ef(3, 0.7, 2))
        assert res.oscillatory
        assert not res.passed

    def test_limit_above_one_fails(self):
        assert not check_atkinson(ef(3, 0.5, 4, c=1.5)).passed


class TestSelectP:
    def test_superlinear(self):
        assert select_p(3, 0.05) == pytest.approx(1.5)

    def test_gate(self):
        with pytest.raises(NotApplicable):
            select_p(2, 0.6)

    def test_linear(self):
        p = select_p(1, 0.5)
        assert p == pytest.approx(1 / (1 - 0.5 * (1 + 1e-6)), rel=1e-14)
        assert (p - 1) / p > 0.5


class TestDubeMingarelli:
    def test_m1(self):
        res = check_dube_mingarelli(ef(3, 0.5, 4, M=1.0))
        # int_1^inf (t-1) 0.5 t^-4 dt = 0.5 (1/2 - 1/3) = 1/12
        assert res.constants["hale_onuchic"] == pytest.approx(1 / 12, rel=1e-14)
        assert res.constants["eta"] == pytest.approx(0.25, rel=1e-14)
        assert res.passed

    def test_zero_coefficient(self):
        res = check_dube_mingarelli(ef(3, 0.0, 4, M=1.0))
        assert res.constants["eta"] == 0.0
        assert res.passed

    def test_m2_boundary(self):
        res = check_dube_mingarelli(ef(3, 0.5, 4, M=2.0))
        assert res.constants["hale_onuchic"] == pytest.approx(8 / 12)
        # eta = 3 * 4 / 12 = 1 sits exactly on the strict threshold
        assert res.constants["eta"] == pytest.approx(1.0, rel=1e-14)
        assert not res.passed

    def test_general_nonlinearity(self):
        inst = ProblemInstance(GeneralLipschitz("t^-4*u", PowerDecay(1, 4)), 1.0, {"M": 1.0})
        res = check_dube_mingarelli(inst)
        assert res.constants["eta"] == pytest.approx(1 / 6)


class TestDerivativeSpaceCheck:
    # mu/(p-1) = 0.5 and mu/((p-1)(p-2)) = 0.375
    K1 = PowerDecay(7 / 6, 10 / 3)

    def test_chi(self):
        res = check_theorem6(ef(3, 0.1, 4), self.K1, None, zeta=0.5)
        assert res.constants["int_k1"] == pytest.approx(0.5, rel=1e-14)
        assert res.constants["moment_k1"] == pytest.approx(0.375, rel=1e-14)
        assert res.constants["chi"] == pytest.approx(0.625, rel=1e-14)
        assert res.passed

    def test_zero_moduli(self):
        res = check_theorem6(ef(3, 0.1, 4), PowerDecay(0, 4), PowerDecay(0, 4), zeta=3.0)
        assert res.constants["chi"] == 0.0
        assert res.passed

    def test_zeta_gate(self):
        with pytest.raises(BadParam):
            check_theorem6(ef(3, 0.1, 4), self.K1, zeta=0.0)

    def test_optimal_zeta_minimizes(self):
        k2 = PowerDecay(0.2, 5)
        res = check_theorem6(ef(3, 0.1, 4), self.K1, k2)
        z = res.constants["zeta"]
        for other in (0.5 * z, 2 * z):
            assert check_theorem6(ef(3, 0.1, 4), self.K1, k2, zeta=other).constants["chi"] >= res.constants["chi"]

    def test_bracket_budget(self):
        res = check_derivative_space(ef(3, 0.3, 4, M=1.0))
        assert res.condition("bracket_budget").value == pytest.approx(0.3 / 6)
        assert res.passed


class TestLinearLikeCheck:
    def test_pass(self):
        res = check_cor9(ef(2, 0.05, 4, A=0.5, nu=0.5))
        assert res.constants["c_nu"] == pytest.approx(0.1, rel=1e-14)
        assert res.condition("first").value == pytest.approx(0.12, rel=1e-14)
        assert res.condition("second").threshold == pytest.approx(0.1 / 0.36, rel=1e-14)
        assert res.passed

    def test_zero_degenerate(self):
        res = check_cor9(ef(2, 0.0, 4, A=0.5, nu=0.5))
        assert res.constants["c_nu"] == 0.0
        assert res.condition("second").verdict != "pass"
        assert not res.passed

    def test_fail(self):
        res = check_cor9(ef(2, 1.0, 4, A=0.5, nu=0.5))
        assert res.condition("first").value == pytest.approx(10.0)
        assert not res.passed

    def test_nu_range(self):
        with pytest.raises(BadParam):
            check_cor9(ef(2, 0.05, 4, A=0.5, nu=1.0))


class TestWronskianCheck:
    def test_pass(self):
        res = check_theorem10_cor11(ef(3, 0.1, 6, a=1.0, b=0.0, c_exp=1.0, eps=0.5))
        assert res.constants["I_c"] == pytest.approx(0.1, rel=1e-14)
        assert res.condition("first").value == pytest.approx(0.675, rel=1e-14)
        assert res.condition("second").value == pytest.approx(0.3375, rel=1e-14)
        assert res.passed

    def test_zero(self):
        res = check_theorem10_cor11(ef(3, 0.0, 6, a=1.0, b=0.0, c_exp=1.0, eps=0.5))
        assert res.passed
        assert res.kappa == 0.0

    def test_offset_fails(self):
        res = check_theorem10_cor11(ef(3, 0.1, 6, a=1.0, b=1.0, c_exp=1.0, eps=0.5))
        assert res.condition("second").value == pytest.approx(1.3375)
        assert not res.passed


class TestSandwichCheck:
    def test_pass(self):
        res = check_theorem12(ef(3, 0.1, 5, c=1.0, d=0.5))
        k = res.constants
        assert k["max_factor"] == pytest.approx(6.75, rel=1e-14)
        assert k["J"] == pytest.approx(0.1, rel=1e-14)
        assert k["product"] == pytest.approx(0.675, rel=1e-14)
        assert k["vartheta"] == pytest.approx(0.675, rel=1e-14)
        assert res.passed

    def test_zero(self):
        assert check_theorem12(ef(3, 0.0, 5, c=1.0, d=0.5)).passed

    def test_fail(self):
        res = check_theorem12(ef(3, 0.2, 5, c=1.0, d=0.5))
        assert res.constants["product"] == pytest.approx(1.35)
        assert not res.passed

    def test_needs_t0_at_least_one(self):
        with pytest.raises(BadParam):
            check_theorem12(ef(3, 0.1, 5, t0=0.5, c=1.0, d=0.5))


class TestReport:
    def test_run_all_selects_by_params(self):
        rep = run_all(ef(3, 0.5, 4, c=1.0))
        assert [c.scheme for c in rep.checks] == ["bounded_limit", "derivative_space"]
        assert "bounded_limit" in rep.applicable

    def test_all_fail(self):
        assert run_all(ef(3, 5, 4, c=1.0)).applicable == []

    def test_json_is_deterministic(self):
        inst = ef(3, 0.1, 5, c=1.0, d=0.5, M=1.0)
        a, b = run_all(inst).to_json(), run_all(inst).to_json()
        assert a == b
        assert json.loads(a)["applicable"]

    def test_unknown_scheme(self):
        with pytest.raises(BadParam):
            check_scheme(ef(3, 0.1, 5), "nope")

    def test_exp_decay_instance(self):
        inst = ProblemInstance(EmdenFowler(3, ExpDecay(0.5, 1.0)), 1.0, {"c": 1.0})
        # int_1^inf t e^-t dt = 2/e
        assert check_atkinson(inst).constants["eta"] == pytest.approx(3 * 0.5 * 2 / math.e, rel=1e-12)
