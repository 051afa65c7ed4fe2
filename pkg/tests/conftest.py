import numpy as np
import pytest

from asymptint.coefficients import EmdenFowler, ExprCoefficient, PowerDecay
from asymptint.criteria import ProblemInstance

DELTA = 0.01


def manufactured_q(delta=DELTA):
    """q with x(t) = 1 - delta/t solving x'' + q x^3 = 0 exactly."""
    src = f"{2 * delta}*t^-3*(1-{delta}/t)^-3"
    return ExprCoefficient(src, (2 * delta / (1 - delta) ** 3, 3.0))


def manufactured_exact(t, delta=DELTA):
    return 1 - delta / np.asarray(t)


@pytest.fixture
def manufactured():
    return ProblemInstance(EmdenFowler(3, manufactured_q()), 1.0, {"c": 1.0})


# one criteria-passing instance per scheme
SCHEME_CASES = {
    "bounded_limit": (3, 0.5, 4, {"c": 1.0}),
    "dube_mingarelli": (3, 1.0, 4, {"M": 1.0}),
    "derivative_space": (3, 0.3, 4, {"M": 1.0}),
    "linear_like": (2, 0.05, 4, {"A": 0.5, "nu": 0.5}),
    "wronskian": (3, 0.1, 6, {"a": 1.0, "b": 0.0, "c_exp": 1.0, "eps": 0.5}),
    "sandwich": (3, 0.1, 5, {"c": 1.0, "d": 0.5}),
}


def scheme_instance(name, mu=None):
    lam, mu0, p, params = SCHEME_CASES[name]
    return ProblemInstance(EmdenFowler(lam, PowerDecay(mu0 if mu is None else mu, p)), 1.0, dict(params))
