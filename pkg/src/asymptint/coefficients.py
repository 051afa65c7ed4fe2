"""Nonnegative coefficients q(t) on [t_start, inf) and ODE nonlinearities.

Every coefficient carries a power-law envelope ``q(t) <= C_env * t**(-p_env)``.
Built-in kinds integrate their weighted tails ``int_T^inf s**k q(s) ds`` in
closed form; expression-backed coefficients use adaptive quadrature on a
finite window whose truncation is bounded a priori by the envelope.
"""

from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import BadParam, DivergentTail, DomainError, QuadratureFailure
from .expr import Expression, spow

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-14
_DOMAIN_SLACK = 1e-12


class TailValue(NamedTuple):
    """An integral value together with a bound on its absolute error."""

    value: float
    error: float


@dataclass(frozen=True)
class Envelope:
    """Power-law majorant ``C * t**(-p)``."""

    C: float
    p: float

    def __post_init__(self):
        if not (self.C >= 0 and math.isfinite(self.C)):
            raise BadParam(f"envelope constant must be finite and >= 0, got {self.C}")
        if not self.p >= 0:
            raise BadParam(f"envelope exponent must be >= 0, got {self.p}")

    def integrable(self, k: float) -> bool:
        return self.C == 0 or self.p > k + 1

    def tail(self, k: float, T: float) -> float:
        """Upper bound for ``int_T^inf s**k * C * s**(-p) ds``."""
        if self.C == 0:
            return 0.0
        if self.p <= k + 1:
            return math.inf
        return self.C * T ** (k - self.p + 1) / (self.p - k - 1)

    def __call__(self, t):
        return self.C * np.asarray(t, dtype=float) ** (-self.p)


def improper_quad(func, T, k, envelope, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, limit=400):
    """Integrate ``s**k * func(s)`` over ``[T, inf)``.

    ``|func|`` must be dominated by ``envelope``.  The integral is cut at the
    smallest ``T_cut`` whose envelope tail is below half the target error and
    the window ``[T, T_cut]`` is integrated in the variable ``log s``.

    Returns
    -------
    TailValue
        Value and error bound (quadrature estimate plus envelope truncation).
    """
    if not envelope.integrable(k):
        raise DivergentTail(f"envelope exponent {envelope.p} <= k + 1 = {k + 1}")
    if envelope.C == 0:
        return TailValue(0.0, 0.0)

    def g(x):
        s = math.exp(x)
        return float(func(s)) * s ** (k + 1)

    # rough magnitude fixes the absolute target
    x0 = math.log(T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rough = integrate.quad(g, x0, x0 + math.log(100.0), limit=100)[0]
    rough += envelope.tail(k, 100.0 * T)
    # relative target: small tails are often multiplied by large lever arms downstream
    target = rtol * abs(rough) if rough != 0 else atol
    expo = k - envelope.p + 1
    t_cut = (0.5 * target * (envelope.p - k - 1) / envelope.C) ** (1.0 / expo)
    t_cut = max(t_cut, T)
    if t_cut == T:
        return TailValue(0.0, envelope.tail(k, T))
    value, qerr, info = integrate.quad(
        g, x0, math.log(t_cut), epsabs=0.5 * target, epsrel=rtol, limit=limit, full_output=1
    )[:3]
    trunc = envelope.tail(k, t_cut)
    err = qerr + trunc
    if not math.isfinite(value) or err > 10 * max(target, rtol * abs(value)):
        raise QuadratureFailure(
            f"tail quadrature from T={T} reached error {err:.3g} above target {target:.3g}"
        )
    return TailValue(value, err)


class Coefficient(ABC):
    """Continuous nonnegative function on ``[t_start, inf)`` with an envelope."""

    kind = "abstract"

    def __init__(self, t_start: float, envelope: Envelope):
        if not (t_start > 0 and math.isfinite(t_start)):
            raise BadParam(f"t_start must be positive, got {t_start}")
        self.t_start = float(t_start)
        self.envelope = envelope

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_start * (1 - _DOMAIN_SLACK)):
            raise DomainError(f"{self.kind} coefficient queried below t_start={self.t_start}")
        out = self._eval(t_arr)
        return float(out) if np.ndim(out) == 0 else out

    @abstractmethod
    def _eval(self, t: np.ndarray) -> np.ndarray: ...

    def converges(self, k: float) -> bool:
        """Whether ``int^inf s**k q(s) ds`` is finite."""
        return self.envelope.integrable(k)

    def weighted_tail(self, k: float, T: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> TailValue:
        """``int_T^inf s**k q(s) ds`` with an absolute error bound."""
        if T < self.t_start * (1 - _DOMAIN_SLACK):
            raise DomainError(f"tail start {T} below t_start={self.t_start}")
        if not self.converges(k):
            raise DivergentTail(f"{self.kind}: weighted tail with k={k} does not converge")
        return self._tail(float(k), float(T), rtol, atol)

    def _tail(self, k, T, rtol, atol):
        return improper_quad(self._eval_scalar, T, k, self.envelope, rtol, atol)

    def _eval_scalar(self, s):
        return float(self._eval(np.asarray(s, dtype=float)))

    def double_tail(self, T: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> TailValue:
        """``int_T^inf (s - T) q(s) ds``."""
        w1 = self.weighted_tail(1, T, rtol, atol)
        w0 = self.weighted_tail(0, T, rtol, atol)
        return TailValue(max(w1.value - T * w0.value, 0.0), w1.error + T * w0.error)

    @property
    def is_zero(self) -> bool:
        return self.envelope.C == 0

    def scaled(self, factor: float) -> "Coefficient":
        return ScaledCoefficient(self, factor)

    def weighted(self, m: float) -> "Coefficient":
        """The coefficient ``t**m * q(t)``."""
        return WeightedCoefficient(self, m)

    @abstractmethod
    def to_dict(self) -> dict: ...


class PowerDecay(Coefficient):
    """``q(t) = mu * t**(-p)``; ``p = 0`` gives a constant coefficient."""

    kind = "power"

    def __init__(self, mu: float, p: float, t_start: float = 1.0):
        if not mu >= 0:
            raise BadParam(f"mu must be >= 0, got {mu}")
        if not p >= 0:
            raise BadParam(f"p must be >= 0, got {p}")
        self.mu = float(mu)
        self.p = float(p)
        super().__init__(t_start, Envelope(self.mu, self.p))

    def _eval(self, t):
        return self.mu * t ** (-self.p)

    def _tail(self, k, T, rtol, atol):
        if self.mu == 0:
            return TailValue(0.0, 0.0)
        return TailValue(self.mu * T ** (k - self.p + 1) / (self.p - k - 1), 0.0)

    def double_tail(self, T, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
        if T < self.t_start * (1 - _DOMAIN_SLACK):
            raise DomainError(f"tail start {T} below t_start={self.t_start}")
        if not self.converges(1):
            raise DivergentTail("power: double tail needs p > 2")
        if self.mu == 0:
            return TailValue(0.0, 0.0)
        # int_T^inf (s - T) mu s^-p ds, combined to avoid cancellation
        return TailValue(self.mu * T ** (2 - self.p) / ((self.p - 1) * (self.p - 2)), 0.0)

    def to_dict(self):
        return {"kind": self.kind, "mu": self.mu, "p": self.p, "t_start": self.t_start}

    def __repr__(self):
        return f"PowerDecay(mu={self.mu}, p={self.p}, t_start={self.t_start})"


class ExpDecay(Coefficient):
    """``q(t) = mu * exp(-gamma t)``."""

    kind = "exp"

    def __init__(self, mu: float, gamma: float, t_start: float = 1.0, p_env: float = 12.0):
        if not mu >= 0:
            raise BadParam(f"mu must be >= 0, got {mu}")
        if not gamma > 0:
            raise BadParam(f"gamma must be > 0, got {gamma}")
        self.mu = float(mu)
        self.gamma = float(gamma)
        # sup_{t >= t_start} t^p exp(-gamma t)
        t_peak = max(p_env / gamma, t_start)
        log_c = p_env * math.log(t_peak) - gamma * t_peak
        C = self.mu * math.exp(log_c) if self.mu > 0 else 0.0
        super().__init__(t_start, Envelope(C, p_env))

    def _eval(self, t):
        return self.mu * np.exp(-self.gamma * t)

    def converges(self, k):
        return k > -1 or self.mu == 0

    def _tail(self, k, T, rtol, atol):
        if self.mu == 0:
            return TailValue(0.0, 0.0)
        a = k + 1
        val = self.mu * self.gamma ** (-a) * special.gamma(a) * special.gammaincc(a, self.gamma * T)
        return TailValue(float(val), 0.0)

    def to_dict(self):
        return {"kind": self.kind, "mu": self.mu, "gamma": self.gamma, "t_start": self.t_start}

    def __repr__(self):
        return f"ExpDecay(mu={self.mu}, gamma={self.gamma}, t_start={self.t_start})"


class ExprCoefficient(Coefficient):
    """Coefficient given by an expression in ``t`` with a declared envelope."""

    kind = "expr"

    def __init__(self, expr, envelope, t_start: float = 1.0):
        if envelope is None:
            raise BadParam("expression coefficients require an envelope (C_env, p_env)")
        if not isinstance(envelope, Envelope):
            envelope = Envelope(*envelope)
        self.expr = expr if isinstance(expr, Expression) else Expression(expr, ("t",))
        super().__init__(t_start, envelope)

    def _eval(self, t):
        return np.asarray(self.expr(t=t), dtype=float)

    def check_envelope(self, samples: int = 1000, t_max: float | None = None) -> bool:
        """Sample ``q <= envelope`` and ``q >= 0`` at log-spaced points."""
        t_max = t_max or self.t_start * 1e6
        t = np.geomspace(self.t_start, t_max, samples)
        q = self._eval(t)
        env = self.envelope(t)
        return bool(np.all(q >= 0) and np.all(q <= env * (1 + 1e-12) + 1e-300))

    def to_dict(self):
        return {
            "kind": self.kind,
            "expr": self.expr.source,
            "envelope": [self.envelope.C, self.envelope.p],
            "t_start": self.t_start,
        }

    def __repr__(self):
        return f"ExprCoefficient({self.expr.source!r}, {self.envelope})"


class ScaledCoefficient(Coefficient):
    """``factor * base(t)``."""

    kind = "scaled"

    def __init__(self, base: Coefficient, factor: float):
        if not factor >= 0:
            raise BadParam(f"scale factor must be >= 0, got {factor}")
        self.base = base
        self.factor = float(factor)
        super().__init__(base.t_start, Envelope(base.envelope.C * self.factor, base.envelope.p))

    def _eval(self, t):
        return self.factor * self.base._eval(t)

    def converges(self, k):
        return self.factor == 0 or self.base.converges(k)

    def _tail(self, k, T, rtol, atol):
        if self.factor == 0:
            return TailValue(0.0, 0.0)
        v, e = self.base._tail(k, T, rtol, atol)
        return TailValue(self.factor * v, self.factor * e)

    def to_dict(self):
        return {"kind": self.kind, "factor": self.factor, "base": self.base.to_dict()}


class WeightedCoefficient(Coefficient):
    """``t**m * base(t)``; tails shift the weight exponent by ``m``."""

    kind = "weighted"

    def __init__(self, base: Coefficient, m: float):
        self.base = base
        self.m = float(m)
        super().__init__(base.t_start, Envelope(base.envelope.C, max(base.envelope.p - self.m, 0.0)))
        if base.envelope.p - self.m < 0:
            # envelope grows; tails are never convergent through it
            self.envelope = Envelope(base.envelope.C, 0.0)

    def _eval(self, t):
        return t**self.m * self.base._eval(t)

    def converges(self, k):
        return self.base.converges(k + self.m)

    def _tail(self, k, T, rtol, atol):
        return self.base._tail(k + self.m, T, rtol, atol)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "base": self.base.to_dict()}


def coefficient_from_dict(d: dict) -> Coefficient:
    """Inverse of ``Coefficient.to_dict``."""
    kind = d.get("kind")
    t_start = d.get("t_start", 1.0)
    if kind == "power":
        return PowerDecay(d["mu"], d["p"], t_start)
    if kind == "exp":
        return ExpDecay(d["mu"], d["gamma"], t_start)
    if kind == "expr":
        return ExprCoefficient(d["expr"], d.get("envelope"), t_start)
    if kind == "scaled":
        return ScaledCoefficient(coefficient_from_dict(d["base"]), d["factor"])
    if kind == "weighted":
        return WeightedCoefficient(coefficient_from_dict(d["base"]), d["m"])
    raise BadParam(f"unknown coefficient kind {kind!r}")


def eval_coefficient(c: Coefficient, t: float) -> float:
    """Evaluate ``c`` at a single point."""
    return c(float(t))


def weighted_tail(c: Coefficient, k: float, T: float) -> TailValue:
    return c.weighted_tail(k, T)


def double_tail(c: Coefficient, T: float) -> TailValue:
    return c.double_tail(T)


class EmdenFowler:
    """``f(t, x) = q(t) * x**lam`` with the signed power."""

    kind = "emden_fowler"

    def __init__(self, lam: float, q: Coefficient):
        if not lam >= 1:
            raise BadParam(f"lambda must be >= 1, got {lam}")
        self.lam = float(lam)
        self.q = q

    def __call__(self, t, u, v=None):
        return self.q(t) * spow(u, self.lam)

    def lipschitz_modulus(self, t, bound):
        """Lipschitz constant of ``u -> f(t, u)`` on ``|u| <= bound``."""
        return self.lam * self.q(t) * bound ** (self.lam - 1)

    def to_dict(self):
        return {"type": self.kind, "lambda": self.lam, "q": self.q.to_dict()}

    def __repr__(self):
        return f"EmdenFowler(lam={self.lam}, q={self.q!r})"


class GeneralLipschitz:
    """``f(t, u[, v])`` given as an expression, with Lipschitz moduli ``k`` (in u)
    and ``k2`` (in v, default zero)."""

    kind = "general"

    def __init__(self, f, k: Coefficient, k2: Coefficient | None = None):
        self.f = f if isinstance(f, Expression) else Expression(f, ("t", "u", "v"))
        self.k = k
        self.k2 = k2 if k2 is not None else PowerDecay(0.0, 0.0, k.t_start)

    def __call__(self, t, u, v=None):
        if v is None:
            v = np.zeros_like(np.asarray(u, dtype=float))
        return self.f(t=t, u=u, v=v)

    def to_dict(self):
        return {
            "type": self.kind,
            "f": self.f.source,
            "k": self.k.to_dict(),
            "k2": self.k2.to_dict(),
        }

    def __repr__(self):
        return f"GeneralLipschitz({self.f.source!r})"


def nonlinearity_from_dict(d: dict):
    kind = d.get("type")
    if kind == "emden_fowler":
        return EmdenFowler(d["lambda"], coefficient_from_dict(d["q"]))
    if kind == "general":
        k2 = d.get("k2")
        return GeneralLipschitz(
            d["f"], coefficient_from_dict(d["k"]), coefficient_from_dict(k2) if k2 else None
        )
    raise BadParam(f"unknown nonlinearity type {kind!r}")
