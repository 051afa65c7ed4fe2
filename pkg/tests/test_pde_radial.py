import math

import numpy as np
import pytest
from scipy import integrate

from asymptint.coefficients import PowerDecay
from asymptint.errors import BadParam, CriteriaFail, GridMismatch, OrderingViolated
from asymptint.fixpoint import default_grid
from asymptint.funcspace import graded_grid
from asymptint.pde_radial import (
    RadialPDEInstance,
    assemble_sandwich,
    beta_map,
    beta_prime,
    build_subsolution,
    build_supersolution,
    change_of_variables_gap,
    run_pipeline,
    supersolution_chain,
    transformed_q,
)


def bundle(h0=0.2, a=None, g=None, n=3, C=0.5, rho=0.5):
    return RadialPDEInstance(n, a or PowerDecay(0.05, 4, 0.5), g or PowerDecay(1.0, 1, 0.5), C, rho, h0, 1.0)


class TestBeta:
    def test_identity_in_three_dimensions(self):
        assert beta_map(3, 7.0) == 7.0

    def test_four_dimensions(self):
        assert beta_map(4, 8.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("n, s", [(3, 0.0), (3, -1.0), (2, 1.0), (3.5, 1.0)])
    def test_rejects(self, n, s):
        with pytest.raises(BadParam):
            beta_map(n, s)

    @pytest.mark.parametrize("n", [3, 4, 5, 7])
    def test_prime_matches_difference(self, n):
        s = np.array([1.0, 2.5, 40.0])
        h = 1e-6 * s
        fd = (beta_map(n, s + h) - beta_map(n, s - h)) / (2 * h)
        np.testing.assert_allclose(beta_prime(n, s), fd, rtol=1e-8)


class TestTransformedCoefficient:
    def test_three_dimensions(self):
        inst = bundle(a=PowerDecay(0.05, 4, 0.5))
        s = np.array([1.0, 2.0, 10.0])
        np.testing.assert_allclose(transformed_q(inst, s), 0.05 * s**-4, rtol=1e-14)

    def test_zero(self):
        assert transformed_q(bundle(a=PowerDecay(0.0, 4, 0.5)), 3.0) == 0.0

    def test_four_dimensions(self):
        inst = bundle(n=4, a=PowerDecay(0.05, 4, 0.5))
        s = np.array([1.0, 2.0, 10.0])
        np.testing.assert_allclose(transformed_q(inst, s), 0.05 / (2 * s**3), rtol=1e-13)

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_integral_identity(self, n):
        assert change_of_variables_gap(bundle(n=n, a=PowerDecay(0.05, 4, 0.4))) < 1e-10

    @pytest.mark.parametrize("n, k", [(3, 1), (4, 1), (5, 1), (5, 0), (4, 1.5)])
    def test_tail_against_quad(self, n, k):
        q = bundle(n=n, a=PowerDecay(0.05, 4, 0.4)).q
        ref, _ = integrate.quad(lambda s: s**k * q(s), 1.0, np.inf, epsrel=1e-12, limit=400)
        assert q.weighted_tail(k, 1.0).value == pytest.approx(ref, rel=1e-8)


class TestSupersolution:
    def test_constants_and_chain(self):
        inst = bundle()
        h2, cert, check = build_supersolution(inst, grid=graded_grid(1, 1e3, 1.05))
        assert check.constants["J"] == pytest.approx(0.025, rel=1e-14)
        assert check.constants["product"] == pytest.approx(0.05, rel=1e-14)
        assert cert.certified
        assert all(supersolution_chain(h2, inst).values())

    def test_zero_coefficient_is_linear(self):
        inst = bundle(a=PowerDecay(0.0, 4, 0.5))
        h2, _, _ = build_supersolution(inst, grid=graded_grid(1, 1e3, 1.05))
        np.testing.assert_allclose(h2.values, 0.25 * h2.nodes, rtol=1e-15)
        chain = supersolution_chain(h2, inst)
        assert chain["slope_lower"] and chain["ratio_upper"]
        assert not chain["slope_below_ratio"]

    def test_criteria_fail(self):
        with pytest.raises(CriteriaFail):
            build_supersolution(bundle(a=PowerDecay(10.0, 4, 0.5)))


class TestSubsolution:
    def test_zero_g_closed_form(self):
        inst = bundle(g=PowerDecay(0.0, 1, 0.5))
        grid = graded_grid(1, 1e3, 1.02)
        sub = build_subsolution(inst, grid)
        s = grid.nodes
        np.testing.assert_allclose(sub.h1.values, s * (0.2 - 1) + 1, rtol=1e-9)

    def test_non_integrable_g(self):
        # g(r) = 1/r gives k = 1 and H(tau) = -exp(-(tau - 1))
        grid = graded_grid(1, 1e3, 1.02)
        sub = build_subsolution(bundle(), grid)
        for s in (2.0, 10.0, 300.0):
            i = int(np.argmin(np.abs(grid.nodes - s)))
            si = grid.nodes[i]
            inner, _ = integrate.quad(lambda tau: -math.exp(-(tau - 1)) / tau**2, 1.0, si, epsabs=1e-14)
            assert sub.h1.values[i] == pytest.approx(si * (0.2 + inner), rel=1e-9)
        assert sub.residual_max < 1e-6
        assert sub.bounds_ok

    @pytest.mark.parametrize("h0", [0.25, 0.0, -0.1])
    def test_strict_range(self, h0):
        with pytest.raises(BadParam):
            build_subsolution(bundle(h0=h0))


class TestSandwich:
    def test_zero_data(self):
        inst = bundle(a=PowerDecay(0.0, 4, 0.5), g=PowerDecay(0.0, 1, 0.5))
        grid = graded_grid(1, 1e3, 1.05)
        h2, _, _ = build_supersolution(inst, grid=grid)
        prof = assemble_sandwich(inst, build_subsolution(inst, grid).h1, h2)
        assert np.all(prof.u1 <= prof.u2)
        assert prof.checks["lower_bound"] and prof.checks["upper_bound"]

    def test_pipeline_passes(self):
        res = run_pipeline(bundle(), grid=graded_grid(1, 1e4, 1.02))
        assert all(v for v in res.profile.checks.values() if isinstance(v, bool))
        assert res.profile.checks["subsolution_residual"] <= 1e-6
        assert res.profile.lower == pytest.approx(-0.8)
        assert res.profile.upper == 0.5

    def test_inverted_ordering(self):
        with pytest.raises(OrderingViolated):
            run_pipeline(bundle(h0=0.6), grid=graded_grid(1, 1e3, 1.05))

    def test_h0_above_slope_bound_inverts_at_start(self):
        # h2(s0) stays close to rho*C*s0 = 0.25, below h0 = 0.4
        grid = graded_grid(1, 1e3, 1.05)
        inst = bundle(h0=0.4)
        h2, _, _ = build_supersolution(inst, grid=grid)
        h1 = build_subsolution(inst, grid, validate=False).h1
        assert h1.values[0] > h2.values[0]
        with pytest.raises(OrderingViolated):
            assemble_sandwich(inst, h1, h2)

    def test_grid_mismatch(self):
        inst = bundle()
        h2, _, _ = build_supersolution(inst, grid=graded_grid(1, 1e3, 1.05))
        h1 = build_subsolution(inst, graded_grid(1, 1e3, 1.1)).h1
        with pytest.raises(GridMismatch):
            assemble_sandwich(inst, h1, h2)

    def test_csv_columns(self):
        res = run_pipeline(bundle(), grid=graded_grid(1, 1e3, 1.05))
        assert res.profile.to_csv().splitlines()[0] == "r,u1,u2"


class TestInstance:
    @pytest.mark.parametrize(
        "kw",
        [dict(n=2), dict(rho=1.0), dict(C=2.0), dict(s0=0.5), dict(A=5.0), dict(a=PowerDecay(1, 2, 0.5))],
    )
    def test_validation(self, kw):
        base = dict(n=3, a=PowerDecay(0.05, 4, 0.5), g=PowerDecay(1, 1, 0.5), C=0.5, rho=0.5, h0=0.2, s0=1.0, eps=1.0)
        base.update(kw)
        with pytest.raises(BadParam):
            RadialPDEInstance(**base)

    def test_to_dict(self):
        d = bundle().to_dict()
        assert d["n"] == 3 and d["eps"] == 1.0 and d["A"] == 0.5
