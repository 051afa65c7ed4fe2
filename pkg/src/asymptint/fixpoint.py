"""Contraction operators on grid functions and certified Picard iteration.

Five schemes are provided, each with its candidate set, metric and
contraction constant:

================  ==========================================  ================
scheme            operator                                    metric
================  ==========================================  ================
bounded_limit     c - int_t^inf (s-t) f(s, u(s)) ds           sup
derivative_space  int_t^inf f(s, M - int_s^inf v, v(s)) ds    L1 + zeta * sup
linear_like       x0 + A(t-t0) + int_t0^t int_s^inf f         sup t^nu |du'|
wronskian         -(1/t) int_t0^t s f(s, a s + b - s I_v(s))  sup t^c |dv|
sandwich          t (c + int_t^inf s^-2 int_t0^s tau f)       sup |du| / t
================  ==========================================  ================

Integrals over ``[T_max, inf)`` are evaluated at ``T_max`` only, by adaptive
quadrature of the integrand built from the candidate's tail model clamped to
the candidate set; everything inside the mesh uses the grid's cumulative
rules.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from . import criteria
from .coefficients import EmdenFowler, Envelope, improper_quad
from .errors import BadParam, CandidateOutOfSet, CriteriaFail, NoConvergence, NotApplicable
from .expr import Expression, spow
from .funcspace import (
    ConstantTail,
    Grid,
    GridFunction,
    LinearTail,
    Metric,
    PowerTail,
    ZeroTail,
    graded_grid,
)

DEFAULT_RATIO = 1.02
DEFAULT_SPAN = 1e4
MEMBER_RTOL = 1e-9
RATIO_SLACK = 0.05


def default_grid(t0: float, t_max: float | None = None, ratio: float = DEFAULT_RATIO) -> Grid:
    return graded_grid(t0, t_max or DEFAULT_SPAN * t0, ratio)


def _q_envelope(nl) -> Envelope:
    if isinstance(nl, EmdenFowler):
        return nl.q.envelope
    return nl.k.envelope


def _fit_power(limit: float, exponent: float, t_end: float, value: float):
    if value == limit:
        return ConstantTail(limit) if limit != 0 else ZeroTail()
    return PowerTail.fit(limit, exponent, t_end, value)


def _random_profile(rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    """Smooth random function of ``log t`` with values in ``[0, 1]``."""
    omega = rng.uniform(0.2, 3.0)
    phase = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(0.0, 1.0)
    centre = rng.uniform(amp / 2, 1 - amp / 2)
    return np.clip(centre + 0.5 * amp * np.sin(omega * np.log(t) + phase), 0.0, 1.0)


class Scheme(ABC):
    """A contraction operator together with its candidate set and metric."""

    name = "abstract"

    def __init__(self, inst: criteria.ProblemInstance, grid: Grid, kappa: float, metric: Metric, /, **kw):
        if grid.t0 != inst.t0 and not np.isclose(grid.t0, inst.t0, rtol=1e-14):
            raise BadParam(f"grid starts at {grid.t0}, instance at t0={inst.t0}")
        self.inst = inst
        self.grid = grid
        self.kappa = float(kappa)
        self.metric = metric
        self.label = self.name
        self._kw = kw

    def on_grid(self, grid: Grid) -> "Scheme":
        other = type(self)(self.inst, grid, **self._kw)
        other.label = self.label
        return other

    @property
    def nl(self):
        return self.inst.nonlinearity

    def distance(self, u: GridFunction, v: GridFunction) -> float:
        return self.metric.distance(u, v)

    def _tol(self, scale) -> np.ndarray:
        return MEMBER_RTOL * np.maximum(1.0, np.abs(scale))

    def _check_between(self, what: str, val, lo, hi):
        tol = self._tol(np.maximum(np.abs(lo), np.abs(hi)))
        bad = np.nonzero((val < lo - tol) | (val > hi + tol))[0]
        if bad.size:
            i = int(bad[0])
            raise CandidateOutOfSet(
                f"{self.name}: {what} = {val[i]:.6g} outside [{lo[i]:.6g}, {hi[i]:.6g}] at t = {self.grid.nodes[i]:.6g}"
            )

    @abstractmethod
    def check_member(self, u: GridFunction, tight: bool = False) -> None: ...

    @abstractmethod
    def apply(self, u: GridFunction, check: bool = True) -> GridFunction: ...

    @abstractmethod
    def initial(self) -> GridFunction: ...

    @abstractmethod
    def solution(self, u: GridFunction) -> tuple[GridFunction, GridFunction]:
        """``(x, x')`` recovered from a fixed point."""

    @abstractmethod
    def random_member(self, rng: np.random.Generator) -> GridFunction: ...

    def params(self) -> dict:
        return {}

    def transfer(self, u: GridFunction, grid: Grid) -> GridFunction:
        """Interpolate ``u`` (and its slopes) onto another grid."""
        vals = u(grid.nodes)
        slopes = None
        if u.slopes is not None:
            slopes = u.derivative()(grid.nodes)
        vals = np.asarray(vals)
        vals[0], vals[-1] = u.values[0], u.values[-1]
        return GridFunction(grid, vals, u.tail, slopes, u.slope_tail, stitch_tol=None)


# ---------------------------------------------------------------------------


class BoundedLimit(Scheme):
    """``T(u) = c - int_t^inf (s - t) f(s, u(s)) ds`` on ``lo <= u <= hi``.

    With ``lo = c/p, hi = c`` this is the bounded-limit construction with
    contraction constant ``lam int t q``; with ``lo = 0, hi = c = M`` it is
    the Lipschitz-modulus version with constant ``int (t - t0) k``.
    """

    name = "bounded_limit"

    def __init__(self, inst, grid, c: float, lo: float, hi: float, kappa: float):
        super().__init__(inst, grid, kappa, Metric.sup(), c=c, lo=lo, hi=hi, kappa=kappa)
        self.c, self.lo, self.hi = float(c), float(lo), float(hi)
        env = _q_envelope(self.nl)
        scale = max(abs(self.lo), abs(self.hi))
        if isinstance(self.nl, EmdenFowler):
            self._env = Envelope(env.C * scale**self.nl.lam, env.p)
        else:
            self._env = Envelope(env.C * scale, env.p)

    @classmethod
    def from_instance(cls, inst, grid, check=None, variant="atkinson"):
        if variant == "atkinson":
            check = check or criteria.check_atkinson(inst)
            c = inst.get("c", 1.0)
            p = check.constants.get("p")
            if p is None:
                p = 1.0 / max(1.0 - check.constants.get("int_tq", 0.0), 1e-300)
            return cls(inst, grid, c, c / p, c, check.kappa)
        check = check or criteria.check_dube_mingarelli(inst)
        M = check.constants["M"]
        return cls(inst, grid, M, 0.0, M, check.kappa)

    def params(self):
        return {"c": self.c, "lower": self.lo, "upper": self.hi}

    def check_member(self, u, tight=False):
        n = len(self.grid)
        self._check_between("u", u.values, np.full(n, self.lo), np.full(n, self.hi))

    def apply(self, u, check=True):
        if check:
            self.check_member(u)
        g = self.grid
        t, T = g.nodes, g.t_max
        F = self.nl(t, u.values)
        lo, hi = self.lo, self.hi

        def f_tail(s):
            return float(self.nl(s, float(np.clip(u.tail(s), lo, hi))))

        tf0 = improper_quad(f_tail, T, 0, self._env).value
        env1 = Envelope(self._env.C, max(self._env.p - 1, 0.0))
        tf1 = improper_quad(lambda s: (s - T) * f_tail(s), T, 0, env1).value
        G = g.tail_from(F) + tf0
        D = g.tail_from(G) + tf1
        vals = self.c - D
        p = self._env.p
        tail = _fit_power(self.c, 2 - p, T, vals[-1])
        slope_tail = _fit_power(0.0, 1 - p, T, G[-1])
        return GridFunction(g, vals, tail, G, slope_tail)

    def initial(self):
        mid = 0.5 * (self.lo + self.hi)
        return GridFunction(self.grid, np.full(len(self.grid), mid), ConstantTail(mid))

    def solution(self, u):
        return u, u.derivative()

    def random_member(self, rng):
        r = _random_profile(rng, self.grid.nodes)
        vals = self.lo + (self.hi - self.lo) * r
        return GridFunction(self.grid, vals, ConstantTail(float(vals[-1])))


class DerivativeSpace(Scheme):
    """``T(v) = int_t^inf f(s, M - int_s^inf v, v(s)) ds`` on ``alpha <= v <= beta``
    with the metric ``||.||_L1 + zeta sup|.|``."""

    name = "derivative_space"

    def __init__(self, inst, grid, M: float, zeta: float, kappa: float, alpha=None, beta=None):
        super().__init__(inst, grid, kappa, Metric.l1_zeta(zeta), M=M, zeta=zeta, kappa=kappa,
                         alpha=alpha, beta=beta)
        self.M, self.zeta = float(M), float(zeta)
        t = grid.nodes
        nl = self.nl
        if isinstance(nl, EmdenFowler):
            q = nl.q
            w0 = q.weighted_tail(0, grid.t_max).value
            self.alpha = np.zeros_like(t)
            self.beta = self.M**nl.lam * (grid.tail_from(q(t)) + w0)
            self._env = Envelope(q.envelope.C * abs(self.M) ** nl.lam, q.envelope.p)
        else:
            if alpha is None or beta is None:
                raise NotApplicable("general nonlinearities need explicit bracket functions alpha, beta")
            self.alpha = np.broadcast_to(np.asarray(Expression(alpha)(t=t), dtype=float), t.shape).copy()
            self.beta = np.broadcast_to(np.asarray(Expression(beta)(t=t), dtype=float), t.shape).copy()
            k1, k2 = nl.k.envelope, nl.k2.envelope
            bound = abs(self.M) + float(np.trapezoid(np.abs(self.beta), t))
            self._env = Envelope(k1.C * bound + k2.C * float(np.max(np.abs(self.beta))), min(k1.p, k2.p) if k2.C else k1.p)

    @classmethod
    def from_instance(cls, inst, grid, check=None):
        check = check or criteria.check_derivative_space(inst)
        M = check.constants.get("M", inst.params.get("M"))
        return cls(inst, grid, M, check.constants["zeta"], check.kappa,
                   inst.params.get("alpha"), inst.params.get("beta"))

    def params(self):
        return {"M": self.M, "zeta": self.zeta}

    def check_member(self, v, tight=False):
        self._check_between("v", v.values, self.alpha, self.beta)

    def _u_of(self, v):
        g = self.grid
        V = g.tail_from(v.values) + v.tail.integral(0, g.t_max)
        return self.M - V

    def apply(self, v, check=True):
        if check:
            self.check_member(v)
        g = self.grid
        t, T = g.nodes, g.t_max
        u = self._u_of(v)
        F = self.nl(t, u, v.values)
        M = self.M

        def f_tail(s):
            return float(self.nl(s, M - v.tail.integral(0, s), float(v.tail(s))))

        vals = g.tail_from(F) + improper_quad(f_tail, T, 0, self._env).value
        return GridFunction(g, vals, _fit_power(0.0, 1 - self._env.p, T, vals[-1]))

    def initial(self):
        return GridFunction(self.grid, np.zeros(len(self.grid)), ZeroTail())

    def solution(self, v):
        g = self.grid
        x = self._u_of(v)
        xt = _fit_power(self.M, 2 - self._env.p, g.t_max, x[-1])
        xf = GridFunction(g, x, xt, slopes=v.values, slope_tail=v.tail)
        return xf, GridFunction(g, v.values, v.tail, stitch_tol=None)

    def random_member(self, rng):
        r = _random_profile(rng, self.grid.nodes)
        vals = self.alpha + (self.beta - self.alpha) * r
        return GridFunction(self.grid, vals, _fit_power(0.0, 1 - self._env.p, self.grid.t_max, vals[-1]))

    def bracket_consistency(self, rng, samples: int = 20) -> float:
        """Largest observed violation of ``alpha <= T(v) <= beta`` over random members."""
        worst = 0.0
        for _ in range(samples):
            w = self.apply(self.random_member(rng), check=False).values
            worst = max(worst, float(np.max(np.maximum(self.alpha - w, w - self.beta))))
        return worst


class LinearLike(Scheme):
    """``T(u) = x0 + A(t - t0) + int_t0^t int_s^inf q u^lam`` with the
    derivative metric ``sup t^nu |u1' - u2'|``."""

    name = "linear_like"

    def __init__(self, inst, grid, A: float, nu: float, c_nu: float, kappa: float, x0: float | None = None):
        super().__init__(inst, grid, kappa, Metric.weighted(nu), A=A, nu=nu, c_nu=c_nu, kappa=kappa, x0=x0)
        inst.require_ef("the linear-like scheme")
        self.A, self.nu, self.c_nu = float(A), float(nu), float(c_nu)
        self.x0 = float(A * grid.t0 if x0 is None else x0)
        lam, q = inst.lam, inst.q
        t = grid.nodes
        W = grid.tail_from(t**lam * q(t)) + q.weighted_tail(lam, grid.t_max).value
        self.alpha = self.A**lam * W
        self.beta = (self.A + self.c_nu) ** lam * W
        self._shift = self.x0 - self.A * grid.t0
        K = self.A + self.c_nu + abs(self._shift) / grid.t0
        self._env = Envelope(q.envelope.C * K**lam, q.envelope.p - lam)

    @classmethod
    def from_instance(cls, inst, grid, check=None):
        check = check or criteria.check_cor9(inst)
        k = check.constants
        return cls(inst, grid, k["A"], k["nu"], k["c_nu"], check.kappa, inst.params.get("x0"))

    def params(self):
        return {"A": self.A, "nu": self.nu, "x0": self.x0, "c_nu": self.c_nu}

    def distance(self, u, v):
        return self.metric.distance(u.derivative(), v.derivative())

    def check_member(self, u, tight=False):
        if abs(u.values[0] - self.x0) > MEMBER_RTOL * max(1.0, abs(self.x0)):
            raise CandidateOutOfSet(f"linear_like: u(t0) = {u.values[0]:.17g} differs from x0 = {self.x0:.17g}")
        du = u.derivative().values - self.A
        lo = self.alpha if tight else np.zeros_like(self.alpha)
        self._check_between("u' - A", du, lo, self.beta)

    def apply(self, u, check=True):
        if check:
            self.check_member(u)
        g = self.grid
        t, T = g.nodes, g.t_max
        lam, q = self.inst.lam, self.inst.q
        A, shift, cn = self.A, self._shift, self.c_nu
        F = q(t) * spow(u.values, lam)

        def f_tail(s):
            us = float(np.clip(u.tail(s), A * s + shift, (A + cn) * s + shift))
            return float(q(s) * spow(us, lam))

        w = g.tail_from(F) + improper_quad(f_tail, T, 0, self._env).value
        vals = self.x0 + A * (t - g.t0) + g.cumulative(w)
        slopes = A + w
        tail = LinearTail(A, float(vals[-1] - A * T))
        slope_tail = _fit_power(A, 1 + lam - q.envelope.p, T, slopes[-1])
        return GridFunction(g, vals, tail, slopes, slope_tail)

    def initial(self):
        t = self.grid.nodes
        vals = self.A * t + self._shift
        return GridFunction(self.grid, vals, LinearTail(self.A, self._shift), np.full_like(t, self.A),
                            ConstantTail(self.A))

    def solution(self, u):
        return u, u.derivative()

    def random_member(self, rng):
        g = self.grid
        t = g.nodes
        w = self.alpha + (self.beta - self.alpha) * _random_profile(rng, t)
        vals = self.x0 + self.A * (t - g.t0) + g.cumulative(w)
        slopes = self.A + w
        p = self.inst.q.envelope.p
        return GridFunction(g, vals, LinearTail(self.A, float(vals[-1] - self.A * g.t_max)), slopes,
                            _fit_power(self.A, 1 + self.inst.lam - p, g.t_max, slopes[-1]))


class WronskianWeighted(Scheme):
    """``T(v) = -(1/t) int_t0^t s f(s, a s + b - s int_s^inf v/tau) ds`` with
    the metric ``sup t^c |v1 - v2|``."""

    name = "wronskian"

    def __init__(self, inst, grid, a: float, b: float, c_exp: float, eps: float, kappa: float):
        super().__init__(inst, grid, kappa, Metric.weighted(c_exp), a=a, b=b, c_exp=c_exp, eps=eps, kappa=kappa)
        inst.require_ef("the Wronskian-weighted scheme")
        self.a, self.b, self.c_exp, self.eps = float(a), float(b), float(c_exp), float(eps)
        lam, q = inst.lam, inst.q
        t = grid.nodes
        c = self.c_exp
        self.alpha = self.a**lam * t ** (c - 1) * grid.cumulative(t ** (lam + 1) * q(t))
        self.beta = (self.a + self.eps) ** lam * grid.cumulative(t ** (lam + c) * q(t))
        self._tail_exp = -1.0 if q.converges(lam + 1) else -c

    @classmethod
    def from_instance(cls, inst, grid, check=None):
        check = check or criteria.check_theorem10_cor11(inst)
        k = check.constants
        return cls(inst, grid, k["a"], k["b"], k["c_exp"], k["eps"], check.kappa)

    def params(self):
        return {"a": self.a, "b": self.b, "c_exp": self.c_exp, "eps": self.eps}

    def _bounds(self, tight):
        t = self.grid.nodes
        lo = -(t ** -self.c_exp) * self.beta
        hi = -(t ** -self.c_exp) * self.alpha if tight else np.zeros_like(t)
        return lo, hi

    def check_member(self, v, tight=False):
        lo, hi = self._bounds(tight)
        self._check_between("v", v.values, lo, hi)

    def _inner(self, v):
        g = self.grid
        return g.tail_from(v.values / g.nodes) + v.tail.integral(-1, g.t_max)

    def reconstruct(self, v) -> np.ndarray:
        """``x(t) = a t + b - t int_t^inf v(tau)/tau dtau`` at the nodes."""
        t = self.grid.nodes
        return self.a * t + self.b - t * self._inner(v)

    def apply(self, v, check=True):
        if check:
            self.check_member(v)
        g = self.grid
        t = g.nodes
        lam, q = self.inst.lam, self.inst.q
        x = self.reconstruct(v)
        vals = -g.cumulative(t * q(t) * spow(x, lam)) / t
        tail = _fit_power(0.0, self._tail_exp, g.t_max, vals[-1])
        return GridFunction(g, vals, tail)

    def initial(self):
        return GridFunction(self.grid, np.zeros(len(self.grid)), ZeroTail())

    def solution(self, v):
        g = self.grid
        t = g.nodes
        inner = self._inner(v)
        x = self.a * t + self.b - t * inner
        xp = self.a - inner + v.values
        xf = GridFunction(g, x, LinearTail(self.a, float(x[-1] - self.a * g.t_max)), slopes=xp)
        xpf = GridFunction(g, xp, _fit_power(self.a, -1.0, g.t_max, xp[-1]), stitch_tol=None)
        return xf, xpf

    def random_member(self, rng):
        lo, hi = self._bounds(True)
        r = _random_profile(rng, self.grid.nodes)
        vals = lo + (hi - lo) * r
        return GridFunction(self.grid, vals, _fit_power(0.0, self._tail_exp, self.grid.t_max, vals[-1]))


class SandwichLinear(Scheme):
    """``T(u) = t (c + int_t^inf s^-2 int_t0^s tau q u^lam)`` on
    ``c t <= u <= (c + d) t`` with the metric ``sup |u1 - u2| / t``."""

    name = "sandwich"

    def __init__(self, inst, grid, c: float, d: float, kappa: float):
        super().__init__(inst, grid, kappa, Metric.weighted(-1.0), c=c, d=d, kappa=kappa)
        inst.require_ef("the sandwich scheme")
        self.c, self.d = float(c), float(d)
        q, lam = inst.q, inst.lam
        self._env = Envelope(q.envelope.C * (self.c + self.d) ** lam, q.envelope.p - lam)

    @classmethod
    def from_instance(cls, inst, grid, check=None):
        check = check or criteria.check_theorem12(inst)
        k = check.constants
        return cls(inst, grid, k["c"], k["d"], check.kappa)

    def params(self):
        return {"c": self.c, "d": self.d}

    def check_member(self, u, tight=False):
        t = self.grid.nodes
        self._check_between("u", u.values, self.c * t, (self.c + self.d) * t)

    def _parts(self, u):
        g = self.grid
        t, T = g.nodes, g.t_max
        lam, q = self.inst.lam, self.inst.q
        c, cd = self.c, self.c + self.d
        J = g.cumulative(t * q(t) * spow(u.values, lam))

        def f_tail(s):
            us = float(np.clip(u.tail(s), c * s, cd * s))
            return float(q(s) * spow(us, lam))

        # int_T^inf J(s)/s^2 ds = J(T)/T + int_T^inf q u^lam
        beyond = J[-1] / T + improper_quad(f_tail, T, 0, self._env).value
        K = g.tail_from(J / t**2) + beyond
        return J, K

    def apply(self, u, check=True):
        if check:
            self.check_member(u)
        g = self.grid
        t = g.nodes
        J, K = self._parts(u)
        vals = t * (self.c + K)
        slopes = self.c + K - J / t
        tail = LinearTail(self.c, float(vals[-1] - self.c * g.t_max))
        slope_tail = _fit_power(self.c, -1.0, g.t_max, slopes[-1])
        return GridFunction(g, vals, tail, slopes, slope_tail)

    def inner_integral(self, u) -> np.ndarray:
        """``int_t0^t tau q u^lam`` at the nodes (so that ``x' = x/t - J/t``)."""
        return self._parts(u)[0]

    def initial(self):
        t = self.grid.nodes
        return GridFunction(self.grid, self.c * t, LinearTail(self.c, 0.0), np.full_like(t, self.c),
                            ConstantTail(self.c))

    def solution(self, u):
        return u, u.derivative()

    def random_member(self, rng):
        t = self.grid.nodes
        r = _random_profile(rng, t)
        ratio = self.c + self.d * r
        return GridFunction(self.grid, t * ratio, LinearTail(float(ratio[-1]), 0.0))


SCHEME_CLASSES = {
    "bounded_limit": BoundedLimit,
    "dube_mingarelli": BoundedLimit,
    "derivative_space": DerivativeSpace,
    "linear_like": LinearLike,
    "wronskian": WronskianWeighted,
    "sandwich": SandwichLinear,
}


def make_scheme(inst: criteria.ProblemInstance, name: str, grid: Grid | None = None,
                force: bool = False) -> tuple[Scheme, criteria.CheckResult]:
    """Check the hypotheses of ``name`` and build its operator.

    Raises :class:`CriteriaFail` unless the check passes or ``force`` is set.
    """
    if name not in SCHEME_CLASSES:
        raise BadParam(f"unknown scheme {name!r}")
    check = criteria.check_scheme(inst, name)
    if not check.passed and not force:
        raise CriteriaFail(f"{name}: hypotheses not verified ({check.verdict})", check)
    grid = grid or default_grid(inst.t0)
    cls = SCHEME_CLASSES[name]
    if name == "bounded_limit":
        scheme = cls.from_instance(inst, grid, check, "atkinson")
    elif name == "dube_mingarelli":
        scheme = cls.from_instance(inst, grid, check, "dube_mingarelli")
    else:
        scheme = cls.from_instance(inst, grid, check)
    scheme.label = name
    return scheme, check


def apply_T_bounded(u: GridFunction, scheme: BoundedLimit) -> GridFunction:
    return scheme.apply(u)


def apply_T_derivative(v: GridFunction, scheme: DerivativeSpace) -> GridFunction:
    return scheme.apply(v)


def apply_T_linearlike(u: GridFunction, scheme: LinearLike) -> GridFunction:
    return scheme.apply(u)


def apply_T_wronskian(v: GridFunction, scheme: WronskianWeighted) -> GridFunction:
    return scheme.apply(v)


def apply_T_sandwich(u: GridFunction, scheme: SandwichLinear) -> GridFunction:
    return scheme.apply(u)


# ---------------------------------------------------------------------------


@dataclass
class ContractionCertificate:
    """Outcome of a Picard iteration.

    ``error_bound = kappa / (1 - kappa) * final_increment`` bounds the metric
    distance from the last iterate to the fixed point of the discrete
    operator; ``discretization_bound`` bounds, through one application of the
    operator on a twice-refined grid, the additional distance to the fixed
    point of the continuous operator.
    """

    kappa: float
    iterations: int
    final_increment: float
    error_bound: float
    observed_ratio_max: float
    increments: list = field(default_factory=list)
    certified: bool = True
    discretization_bound: float | None = None

    @property
    def total_bound(self) -> float:
        return self.error_bound + (self.discretization_bound or 0.0)

    def to_dict(self):
        return {
            "kappa": self.kappa,
            "iterations": self.iterations,
            "final_increment": self.final_increment,
            "error_bound": self.error_bound,
            "observed_ratio_max": self.observed_ratio_max,
            "discretization_bound": self.discretization_bound,
            "certified": self.certified,
            "increments": list(self.increments),
        }


def _ratios(incs) -> list[float]:
    if len(incs) < 2:
        return []
    floor = 1e-12 * max(1.0, max(incs))
    return [incs[i + 1] / incs[i] for i in range(len(incs) - 1) if incs[i] > floor]


def discretization_bound(scheme: Scheme, u: GridFunction, kappa: float | None = None) -> float:
    """``d(T_fine(u), u) / (1 - kappa)`` measured at the coarse nodes."""
    kappa = scheme.kappa if kappa is None else kappa
    if not kappa < 1:
        return math.inf
    fine = scheme.on_grid(scheme.grid.refine())
    w = fine.apply(scheme.transfer(u, fine.grid), check=False)
    slopes = None if w.slopes is None else w.slopes[::2]
    wc = GridFunction(scheme.grid, w.values[::2], w.tail, slopes, w.slope_tail, stitch_tol=None)
    return scheme.distance(wc, u) / (1 - kappa)


def iterate(scheme: Scheme, u0: GridFunction | None = None, tol: float = 1e-10, max_iter: int = 200,
            force: bool = False, refine_check: bool = True) -> tuple[GridFunction, ContractionCertificate]:
    """Picard iteration ``u_{n+1} = T(u_n)`` with an a-posteriori certificate.

    Stops once ``d(u_{n+1}, u_n) <= tol (1 - kappa) / kappa`` so that the
    certified distance to the fixed point is at most ``tol``.  With ``force``
    the ``kappa < 1`` and candidate-set gates are skipped, the observed ratio
    replaces ``kappa`` in the stopping rule and the certificate is marked
    uncertified.
    """
    kappa = scheme.kappa
    if not force and not (0 <= kappa < 1):
        raise CriteriaFail(f"contraction constant {kappa} is not below 1")
    if not tol > 0:
        raise BadParam("tol must be positive")
    u = scheme.initial() if u0 is None else u0
    if not force:
        scheme.check_member(u)
    incs: list[float] = []
    certified = not force

    def cert(n, k_used):
        ratios = _ratios(incs)
        inc = incs[-1] if incs else 0.0
        bound = k_used / (1 - k_used) * inc if k_used < 1 else math.inf
        return ContractionCertificate(kappa, n, inc, bound, max(ratios) if ratios else 0.0, list(incs), certified)

    for n in range(1, max_iter + 1):
        try:
            with np.errstate(over="raise", invalid="raise"):
                un = scheme.apply(u, check=not force)
                inc = scheme.distance(un, u)
        except (FloatingPointError, OverflowError) as exc:
            raise NoConvergence(f"iteration {n} overflowed: {exc}", cert(n - 1, kappa)) from None
        if not math.isfinite(inc) or not np.all(np.isfinite(un.values)):
            raise NoConvergence(f"iteration {n} produced non-finite values", cert(n - 1, kappa))
        incs.append(inc)
        u = un
        if force:
            ratios = _ratios(incs)
            k_eff = max(ratios[-3:]) if ratios else (kappa if kappa < 1 else math.inf)
            if inc == 0 or (k_eff < 1 and inc <= tol * (1 - k_eff) / max(k_eff, 1e-300)):
                c = cert(n, k_eff)
                break
            if len(incs) > 3 and inc > 1e8 * max(incs[0], 1e-300):
                raise NoConvergence("increments grow without bound", cert(n, kappa))
            continue
        if kappa == 0 or inc == 0 or inc <= tol * (1 - kappa) / kappa:
            c = cert(n, kappa)
            break
    else:
        c = cert(max_iter, kappa)
        raise NoConvergence(
            f"no convergence in {max_iter} iterations (observed ratio {c.observed_ratio_max:.3g})", c
        )
    if refine_check:
        c.discretization_bound = discretization_bound(scheme, u, kappa if not force else min(kappa, 0.999))
    return u, c


def solve(inst: criteria.ProblemInstance, name: str, grid: Grid | None = None, tol: float = 1e-10,
          max_iter: int = 200, force: bool = False):
    """Check, build and iterate; returns ``(scheme, fixed_point, certificate)``."""
    scheme, _ = make_scheme(inst, name, grid, force)
    u, cert = iterate(scheme, tol=tol, max_iter=max_iter, force=force)
    return scheme, u, cert
