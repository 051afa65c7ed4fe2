"""Radial sub- and supersolutions for ``Δu + f(x, u) + g(|x|) x·∇u = 0``
on an exterior domain ``|x| > A`` in dimension ``n >= 3``.

The substitution ``|x| = β(s) = (s/(n-2))^(1/(n-2))`` with ``u = h(s)/s``
turns the radial problem into two ODEs in ``s``:

* supersolution: ``h'' + q̃(s) h = 0`` with
  ``q̃(s) = β β' a(β) / ((n-2) s)``, solved by the sandwich scheme with
  ``λ = 1``, ``c = ρC`` and ``d = (1-ρ)C`` so that
  ``ρC <= h' < h/s <= C``;
* subsolution: ``h'' + k(s)(h' - h/s) = 0`` with ``k = β β' g(β)``, solved
  explicitly by ``h(s) = s (h0/s0 + int_s0^s H/τ²)``,
  ``H = -exp(-int_s0^τ k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import Coefficient, EmdenFowler, Envelope, TailValue
from .criteria import ProblemInstance, check_theorem12
from .errors import BadParam, CriteriaFail, GridMismatch, OrderingViolated
from .fixpoint import ContractionCertificate, SandwichLinear, default_grid, iterate
from .funcspace import Grid, GridFunction, LinearTail


def beta_map(n: int, s):
    """``(s/(n-2))^(1/(n-2))``; strictly increasing in ``s > 0``."""
    if int(n) != n or n < 3:
        raise BadParam(f"dimension must be an integer >= 3, got {n}")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise BadParam("beta_map needs s > 0")
    out = (s_arr / (n - 2)) ** (1.0 / (n - 2))
    return float(out) if out.ndim == 0 else out


def beta_prime(n: int, s):
    s = np.asarray(s, dtype=float)
    return beta_map(n, s) / ((n - 2) * s)


class RadialCoefficient(Coefficient):
    """``q̃(s) = β(s)² a(β(s)) / ((n-2)² s²)`` on ``[s0, inf)``.

    Weighted tails reduce to tails of ``a``:
    ``int_T^inf s^k q̃ ds = (n-2)^(k-2) int_β(T)^inf r^((n-2)(k-1)+1) a(r) dr``.
    """

    kind = "radial"

    def __init__(self, a: Coefficient, n: int, s_start: float):
        self.a = a
        self.n = int(n)
        m = self.n - 2
        C, p = a.envelope.C, a.envelope.p
        # a(r) <= C r^-p with r = (s/m)^(1/m)
        env = Envelope(C * m ** (-2 - (2 - p) / m), 2 + (p - 2) / m)
        super().__init__(s_start, env)

    def _eval(self, s):
        r = beta_map(self.n, s)
        m = self.n - 2
        return np.asarray(r, dtype=float) ** 2 * self.a._eval(np.asarray(r, dtype=float)) / (m**2 * s**2)

    def _shift(self, k):
        return (self.n - 2) * (k - 1) + 1

    def converges(self, k):
        return self.a.converges(self._shift(k))

    def _tail(self, k, T, rtol, atol):
        m = self.n - 2
        v, e = self.a.weighted_tail(self._shift(k), beta_map(self.n, T), rtol, atol)
        f = float(m) ** (k - 2)
        return TailValue(f * v, f * e)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "a": self.a.to_dict(), "t_start": self.t_start}


@dataclass
class RadialPDEInstance:
    """Data of the exterior problem and of the sub/supersolution construction."""

    n: int
    a: Coefficient
    g: Coefficient
    C: float
    rho: float
    h0: float
    s0: float = 1.0
    eps: float | None = None
    A: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise BadParam(f"n must be an integer >= 3, got {self.n}")
        self.n = int(self.n)
        if not self.s0 >= 1:
            raise BadParam(f"s0 must be >= 1, got {self.s0}")
        r0 = beta_map(self.n, self.s0)
        if self.A is None:
            self.A = 0.5 * r0
        if not 0 < self.A < r0:
            raise BadParam(f"need 0 < A < beta(s0) = {r0}, got A = {self.A}")
        if self.eps is None:
            self.eps = 2.0 * self.C
        if not 0 < self.C < self.eps:
            raise BadParam(f"need 0 < C < eps, got C = {self.C}, eps = {self.eps}")
        if not 0 < self.rho < 1:
            raise BadParam(f"rho must lie in (0, 1), got {self.rho}")
        for name, coef in (("a", self.a), ("g", self.g)):
            if coef.t_start > r0 * (1 + 1e-12):
                raise BadParam(f"coefficient {name} must be defined from beta(s0) = {r0}")
        if not self.a.converges(1):
            raise BadParam("the coefficient a must satisfy int r a(r) dr < inf")

    @property
    def r0(self) -> float:
        return beta_map(self.n, self.s0)

    @property
    def q(self) -> RadialCoefficient:
        return RadialCoefficient(self.a, self.n, self.s0)

    def k(self, s):
        """``β β' g(β)`` for the subsolution equation."""
        r = beta_map(self.n, s)
        return r * beta_prime(self.n, s) * self.g(r)

    def to_dict(self):
        return {
            "n": self.n,
            "a": self.a.to_dict(),
            "g": self.g.to_dict(),
            "C": self.C,
            "rho": self.rho,
            "h0": self.h0,
            "s0": self.s0,
            "eps": self.eps,
            "A": self.A,
        }


def transformed_q(inst: RadialPDEInstance, s) -> float:
    return inst.q(s)


def supersolution_instance(inst: RadialPDEInstance) -> ProblemInstance:
    """Linear sandwich problem with ``c = ρC`` and ``d = (1-ρ)C``."""
    return ProblemInstance(
        EmdenFowler(1.0, inst.q), inst.s0, {"c": inst.rho * inst.C, "d": (1 - inst.rho) * inst.C}
    )


def build_supersolution(inst: RadialPDEInstance, tol: float = 1e-10, grid: Grid | None = None,
                        force: bool = False):
    """Fixed point ``h2`` of the sandwich operator; returns ``(h2, certificate, check)``."""
    pinst = supersolution_instance(inst)
    check = check_theorem12(pinst)
    if not check.passed and not force:
        raise CriteriaFail(
            f"supersolution constant {check.constants['product']:.6g} is not below 1 ({check.verdict})", check
        )
    grid = grid or default_grid(inst.s0)
    scheme = SandwichLinear.from_instance(pinst, grid, check)
    h2, cert = iterate(scheme, tol=tol, force=force)
    return h2, cert, check


def supersolution_chain(h2: GridFunction, inst: RadialPDEInstance, tol: float = 1e-12) -> dict[str, bool]:
    """``ρC <= h' < h/s <= C`` at the nodes (strict part at interior nodes)."""
    s = h2.nodes
    hp = h2.derivative().values
    ratio = h2.values / s
    lo, hi = inst.rho * inst.C, inst.C
    return {
        "slope_lower": bool(np.all(hp >= lo - tol * hi)),
        "slope_below_ratio": bool(np.all(hp[1:] < ratio[1:])),
        "ratio_upper": bool(np.all(ratio <= hi + tol * hi)),
    }


@dataclass
class Subsolution:
    h1: GridFunction
    H: np.ndarray
    residual_max: float
    bounds_ok: bool


def build_subsolution(inst: RadialPDEInstance, grid: Grid | None = None, validate: bool = True) -> Subsolution:
    """Explicit subsolution ``h1(s) = s (h0/s0 + int_s0^s H/τ² dτ)``.

    With ``validate`` the strict range ``0 < h0 < s0 ρ C`` is enforced.
    """
    h0, s0 = inst.h0, inst.s0
    upper = s0 * inst.rho * inst.C
    if validate and not 0 < h0 < upper:
        raise BadParam(f"h0 = {h0} must lie strictly inside (0, s0*rho*C) = (0, {upper})")
    grid = grid or default_grid(s0)
    s = grid.nodes
    kv = inst.k(s)
    H = -np.exp(-grid.cumulative(kv))
    h1 = s * (h0 / s0 + grid.cumulative(H / s**2))
    # h1' - h1/s = H/s exactly
    slopes = h1 / s + H / s
    tail = LinearTail(float(slopes[-1]), float(h1[-1] - slopes[-1] * s[-1]))
    hf = GridFunction(grid, h1, tail, slopes)
    res = np.abs(grid.derivative(slopes) + kv * H / s)
    ratio = h1 / s
    tol = 1e-12
    bounds_ok = bool(np.all(ratio >= (h0 - 1) / s0 - tol) and np.all(ratio <= h0 / s0 + tol))
    return Subsolution(hf, H, float(np.max(res)), bounds_ok)


@dataclass
class RadialPDEProfile:
    h1: GridFunction
    h2: GridFunction
    r: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    lower: float
    upper: float
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "h1": self.h1.to_dict(),
            "h2": self.h2.to_dict(),
            "bounds": {"lower": self.lower, "upper": self.upper},
            "checks": dict(self.checks),
        }

    def to_csv(self) -> str:
        rows = ["r,u1,u2"] + [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in zip(self.r, self.u1, self.u2)]
        return "\n".join(rows) + "\n"


def assemble_sandwich(inst: RadialPDEInstance, h1: GridFunction, h2: GridFunction,
                      samples: int = 200) -> RadialPDEProfile:
    """Check ``h1 <= h2`` node-wise and emit ``u_i(r) = h_i(s)/s`` samples."""
    if not h1.grid.same_as(h2.grid):
        raise GridMismatch("sub- and supersolution must share a grid")
    s = h1.nodes
    scale = 1e-12 * np.maximum(1.0, np.abs(h2.values))
    bad = np.nonzero(h1.values > h2.values + scale)[0]
    if bad.size:
        i = int(bad[0])
        raise OrderingViolated(
            f"subsolution exceeds supersolution at s = {s[i]:.6g}: {h1.values[i]:.6g} > {h2.values[i]:.6g}",
            index=i, s=float(s[i]),
        )
    r = np.geomspace(beta_map(inst.n, s[0]), beta_map(inst.n, s[-1]), samples)
    ss = (inst.n - 2) * r ** (inst.n - 2)
    ss[0], ss[-1] = s[0], s[-1]
    u1 = np.asarray(h1(ss)) / ss
    u2 = np.asarray(h2(ss)) / ss
    lower = (inst.h0 - 1) / inst.s0
    upper = inst.C
    n1, n2 = h1.values / s, h2.values / s
    checks = {
        "ordering": True,
        "lower_bound": bool(np.all(n1 >= lower - 1e-12) and np.all(n2 >= lower - 1e-12)
                            and np.all(u1 >= lower - 1e-12) and np.all(u2 >= lower - 1e-12)),
        "upper_bound": bool(np.all(n1 <= upper + 1e-12) and np.all(n2 <= upper + 1e-12)
                            and np.all(u1 <= upper + 1e-12) and np.all(u2 <= upper + 1e-12)),
    }
    return RadialPDEProfile(h1, h2, r, u1, u2, lower, upper, checks)


@dataclass
class PipelineResult:
    profile: RadialPDEProfile
    certificate: ContractionCertificate
    chain: dict
    subsolution: Subsolution


def run_pipeline(inst: RadialPDEInstance, tol: float = 1e-10, grid: Grid | None = None,
                 force: bool = False) -> PipelineResult:
    """Supersolution, subsolution and sandwich on a common grid."""
    grid = grid or default_grid(inst.s0)
    h2, cert, _ = build_supersolution(inst, tol, grid, force)
    # ordering is checked first so that an inverted pair is reported as such
    sub = build_subsolution(inst, grid, validate=False)
    prof = assemble_sandwich(inst, sub.h1, h2)
    build_subsolution(inst, grid)
    chain = supersolution_chain(h2, inst)
    prof.checks.update({f"supersolution_{k}": v for k, v in chain.items()})
    prof.checks["subsolution_residual"] = sub.residual_max
    prof.checks["subsolution_bounds"] = sub.bounds_ok
    return PipelineResult(prof, cert, chain, sub)


def change_of_variables_gap(inst: RadialPDEInstance) -> float:
    """``|int s q̃ - (n-2)^-1 int r a(r)|`` by direct quadrature of ``s q̃``."""
    from .coefficients import improper_quad

    q = inst.q
    direct = improper_quad(q._eval_scalar, inst.s0, 1, q.envelope)
    ref = inst.a.weighted_tail(1, inst.r0).value / (inst.n - 2)
    return abs(direct.value - ref) if math.isfinite(direct.value) else math.inf
