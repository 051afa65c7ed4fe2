import math

import numpy as np
import pytest

from asymptint.errors import StepFailure
from asymptint.rk import DormandPrince, integrate_second_order, locate_crossing, second_order_rhs


def test_exponential_decay():
    dp = DormandPrince(lambda t, y: -y, rtol=1e-12, atol=1e-14)
    traj = dp.integrate(0.0, [1.0], 5.0)
    assert traj.y[-1, 0] == pytest.approx(math.exp(-5.0), rel=1e-10)


def test_lands_on_stops():
    dp = DormandPrince(lambda t, y: np.array([1.0]))
    stops = [0.3, 0.7, 1.9]
    traj = dp.integrate(0.0, [0.0], 2.0, stops=stops)
    for s in stops + [2.0]:
        assert s in traj.t
    np.testing.assert_allclose(traj.y[:, 0], traj.t, atol=1e-14)


def test_harmonic_oscillator_energy():
    traj = integrate_second_order(lambda t, x: x, 0.0, 1.0, 0.0, 20.0, rtol=1e-11, atol=1e-13)
    x, v = traj.y[-1]
    assert x == pytest.approx(math.cos(20.0), abs=1e-8)
    assert v == pytest.approx(-math.sin(20.0), abs=1e-8)


def test_crossing_of_cosine():
    dp = DormandPrince(second_order_rhs(lambda t, x: x), rtol=1e-12, atol=1e-14)
    # bracket of the size of one accepted step
    y0 = np.array([math.cos(1.5), -math.sin(1.5)])
    assert locate_crossing(dp, 1.5, y0, 1.65, tol=1e-12) == pytest.approx(math.pi / 2, abs=1e-10)


def test_blow_up_raises():
    dp = DormandPrince(lambda t, y: y**2, max_steps=10_000)
    with pytest.raises(StepFailure):
        dp.integrate(0.0, [1.0], 2.0)


def test_agrees_with_scipy_on_emden_fowler():
    from scipy.integrate import solve_ivp

    from asymptint.coefficients import EmdenFowler, PowerDecay

    nl = EmdenFowler(3, PowerDecay(1.0, 0))
    traj = integrate_second_order(nl, 1.0, 1.0, 0.0, 50.0, rtol=1e-11, atol=1e-13)
    ref = solve_ivp(lambda t, y: [y[1], -float(nl(t, y[0]))], (1.0, 50.0), [1.0, 0.0],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(traj.y[-1], ref.y[:, -1], atol=1e-7)
