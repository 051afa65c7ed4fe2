"""Hypothesis constants of the contraction schemes and their verdicts.

Every check returns a :class:`CheckResult` made of one or more strict (or
non-strict) inequalities.  An inequality ``value < threshold`` passes only
when it holds with margin ``1e-9 * |threshold|`` plus the quadrature error of
both sides; when the two sides are closer than that the verdict is
``"inconclusive"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .coefficients import Coefficient, EmdenFowler, PowerDecay, TailValue
from .errors import BadParam, DivergentTail, NotApplicable

REL_MARGIN = 1e-9
SCHEMES = ("bounded_limit", "dube_mingarelli", "derivative_space", "linear_like", "wronskian", "sandwich")


@dataclass
class Condition:
    """One inequality ``value < threshold`` (or ``<=`` when not strict)."""

    name: str
    value: float
    threshold: float
    error: float = 0.0
    strict: bool = True
    required: bool = True
    verdict: str = field(init=False)
    margin: float = field(init=False)

    def __post_init__(self):
        self.margin = REL_MARGIN * abs(self.threshold) + self.error
        if not math.isfinite(self.value):
            self.verdict = "fail"
        elif self.strict:
            if self.value < self.threshold - self.margin:
                self.verdict = "pass"
            elif self.value > self.threshold + self.margin:
                self.verdict = "fail"
            else:
                self.verdict = "inconclusive"
        else:
            if self.value + self.error <= self.threshold * (1 + REL_MARGIN):
                self.verdict = "pass"
            elif self.value - self.error > self.threshold * (1 + REL_MARGIN):
                self.verdict = "fail"
            else:
                self.verdict = "inconclusive"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self):
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "margin": self.margin,
            "verdict": self.verdict,
            "strict": self.strict,
            "required": self.required,
        }


@dataclass
class CheckResult:
    """Verdict of one theorem's hypotheses together with its constants."""

    name: str
    scheme: str | None
    conditions: list[Condition]
    constants: dict = field(default_factory=dict)
    note: str = ""
    oscillatory: bool = False

    @property
    def verdict(self) -> str:
        if self.oscillatory:
            return "oscillatory"
        req = [c for c in self.conditions if c.required]
        if any(c.verdict == "fail" for c in req):
            return "fail"
        if all(c.passed for c in req):
            return "pass"
        return "inconclusive"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def kappa(self) -> float | None:
        return self.constants.get("kappa")

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "name": self.name,
            "scheme": self.scheme,
            "verdict": self.verdict,
            "constants": dict(self.constants),
            "conditions": [c.to_dict() for c in self.conditions],
            "note": self.note,
        }


@dataclass
class CriteriaReport:
    checks: list[CheckResult]

    @property
    def applicable(self) -> list[str]:
        return [c.scheme for c in self.checks if c.passed and c.scheme]

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        flat = []
        for chk in self.checks:
            for c in chk.conditions:
                flat.append({"check": chk.name, **c.to_dict()})
        return {
            "checks": [c.to_dict() for c in self.checks],
            "conditions": flat,
            "applicable": self.applicable,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ProblemInstance:
    """A nonlinearity, a left endpoint and the profile parameters.

    ``params`` may hold any of ``c, M, A, x0, nu, a, b, c_exp, d, eps, zeta, p``.
    """

    nonlinearity: object
    t0: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.t0 > 0:
            raise BadParam(f"t0 must be positive, got {self.t0}")
        self.t0 = float(self.t0)

    @property
    def is_emden_fowler(self) -> bool:
        return isinstance(self.nonlinearity, EmdenFowler)

    @property
    def lam(self) -> float:
        return self.nonlinearity.lam

    @property
    def q(self) -> Coefficient:
        return self.nonlinearity.q

    def has(self, *names) -> bool:
        return all(self.params.get(n) is not None for n in names)

    def get(self, name: str, default=None) -> float:
        val = self.params.get(name, default)
        if val is None:
            raise BadParam(f"parameter {name!r} is required")
        return float(val)

    def with_params(self, **kw) -> "ProblemInstance":
        return ProblemInstance(self.nonlinearity, self.t0, {**self.params, **kw})

    def require_ef(self, what: str):
        if not self.is_emden_fowler:
            raise NotApplicable(f"{what} needs an Emden-Fowler nonlinearity")


def _tail(coef: Coefficient, k: float, T: float) -> TailValue:
    return coef.weighted_tail(k, T)


def _require_t0(inst: ProblemInstance):
    if inst.t0 < 1:
        raise BadParam(f"t0 must be >= 1 for this construction, got {inst.t0}")


# ---------------------------------------------------------------------------


def select_p(lam: float, integral: float) -> float:
    """Smallest admissible ``p`` with ``integral < 1/lam <= (p-1)/p < 1``.

    For ``lam = 1`` the chain is satisfied by ``p = 1/(1 - integral*(1+1e-6))``.
    """
    if not lam >= 1:
        raise BadParam(f"lambda must be >= 1, got {lam}")
    if not integral < 1.0 / lam:
        raise NotApplicable(f"integral {integral} is not below 1/lambda = {1.0 / lam}")
    if lam > 1:
        return lam / (lam - 1.0)
    target = integral * (1 + 1e-6)
    if target >= 1:
        raise NotApplicable("no admissible p for this integral")
    return 1.0 / (1.0 - target)


def check_atkinson(inst: ProblemInstance) -> CheckResult:
    """``eta = lam * int t q < 1``; also fixes ``p`` for the bounded sandwich."""
    inst.require_ef("the Atkinson check")
    lam = inst.lam
    try:
        tail = _tail(inst.q, 1, inst.t0)
    except DivergentTail:
        cond = Condition("eta", math.inf, 1.0)
        return CheckResult(
            "atkinson", "bounded_limit", [cond], {"eta": math.inf}, "int t q diverges", oscillatory=True
        )
    eta = lam * tail.value
    conds = [Condition("eta", eta, 1.0, lam * tail.error)]
    constants = {"eta": eta, "int_tq": tail.value, "kappa": eta}
    c = inst.params.get("c")
    if c is not None:
        conds.append(Condition("c_le_1", float(c), 1.0, strict=False))
        conds.append(Condition("c_pos", -float(c), 0.0))
    if conds[0].passed:
        constants["p"] = select_p(lam, tail.value)
    return CheckResult("atkinson", "bounded_limit", conds, constants)


def dube_mingarelli_modulus(inst: ProblemInstance, M: float) -> Coefficient:
    """Lipschitz modulus of ``u -> q u^lam`` on ``[0, M]``."""
    if inst.is_emden_fowler:
        return inst.q.scaled(inst.lam * M ** (inst.lam - 1))
    return inst.nonlinearity.k


def check_dube_mingarelli(inst: ProblemInstance, k: Coefficient | None = None, M: float | None = None) -> CheckResult:
    """``int (t-t0) k < 1`` and the worst-case bound ``int (t-t0) f(t, M) <= M``."""
    M = inst.get("M") if M is None else float(M)
    if not M > 0:
        raise BadParam(f"M must be positive, got {M}")
    k = dube_mingarelli_modulus(inst, M) if k is None else k
    eta = k.double_tail(inst.t0)
    conds = [Condition("eta", eta.value, 1.0, eta.error)]
    constants = {"eta": eta.value, "kappa": eta.value, "M": M}
    if inst.is_emden_fowler:
        # f(t, u) = q u^lam is largest on X_M at u = M
        side = inst.q.double_tail(inst.t0)
        val = M**inst.lam * side.value
        conds.append(Condition("hale_onuchic", val, M, M**inst.lam * side.error, strict=False))
        constants["hale_onuchic"] = val
    else:
        note = "bound on int (t-t0) f(t,u) is not checked for general nonlinearities"
        return CheckResult("dube_mingarelli", "dube_mingarelli", conds, constants, note)
    return CheckResult("dube_mingarelli", "dube_mingarelli", conds, constants)


def optimal_zeta(int_k1: float, moment_k2: float, eta: float) -> float:
    """Minimizer of ``zeta*int k1 + moment_k2/zeta``; with ``k2 = 0`` the
    rule ``zeta = min(1/2, (1 - eta)/(2 int k1))`` is used instead."""
    if int_k1 > 0 and moment_k2 > 0:
        return math.sqrt(moment_k2 / int_k1)
    if int_k1 > 0:
        return min(0.5, max(1 - eta, 1e-12) / (2 * int_k1))
    return 0.5


def check_theorem6(inst: ProblemInstance, k1: Coefficient, k2: Coefficient | None = None,
                   zeta: float | None = None) -> CheckResult:
    """``chi = zeta*int k1 + int (t-t0) k1 + int k2 + (1/zeta) int (t-t0) k2 < 1``."""
    t0 = inst.t0
    k2 = k2 if k2 is not None else PowerDecay(0.0, 0.0, k1.t_start)
    i1 = _tail(k1, 0, t0)
    m1 = k1.double_tail(t0)
    if k2.is_zero:
        i2 = m2 = TailValue(0.0, 0.0)
    else:
        i2 = _tail(k2, 0, t0)
        m2 = k2.double_tail(t0)
    auto = zeta is None
    if auto:
        zeta = optimal_zeta(i1.value, m2.value, m1.value)
    if not zeta > 0:
        raise BadParam(f"zeta must be positive, got {zeta}")
    chi = zeta * i1.value + m1.value + i2.value + m2.value / zeta
    err = zeta * i1.error + m1.error + i2.error + m2.error / zeta
    constants = {
        "chi": chi,
        "kappa": chi,
        "zeta": zeta,
        "zeta_auto": auto,
        "int_k1": i1.value,
        "moment_k1": m1.value,
        "int_k2": i2.value,
        "moment_k2": m2.value,
    }
    return CheckResult("derivative_space", "derivative_space", [Condition("chi", chi, 1.0, err)], constants)


def derivative_space_data(inst: ProblemInstance):
    """Moduli and bracket for the Emden-Fowler case with ``u`` in ``[0, M]``:
    ``k1 = lam M^(lam-1) q``, ``k2 = 0``, ``alpha = 0``, ``beta = M^lam int_t q``."""
    inst.require_ef("default derivative-space data")
    M = inst.get("M", inst.params.get("c"))
    k1 = inst.q.scaled(inst.lam * M ** (inst.lam - 1))
    return M, k1


def check_derivative_space(inst: ProblemInstance) -> CheckResult:
    """Derivative-space contraction constant plus the bracket budget ``int beta <= M``."""
    if inst.is_emden_fowler:
        M, k1 = derivative_space_data(inst)
        res = check_theorem6(inst, k1, None, inst.params.get("zeta"))
        budget = inst.q.double_tail(inst.t0)
        val = M**inst.lam * budget.value
        res.conditions.append(Condition("bracket_budget", val, M, M**inst.lam * budget.error, strict=False))
        res.constants["M"] = M
        res.constants["bracket_budget"] = val
        return res
    nl = inst.nonlinearity
    res = check_theorem6(inst, nl.k, nl.k2, inst.params.get("zeta"))
    res.note = "bracket consistency is verified by sampling at solve time"
    return res


def check_cor9(inst: ProblemInstance) -> CheckResult:
    """Linear-like profile ``x = A t + o(t^(1-nu))``."""
    inst.require_ef("the linear-like check")
    _require_t0(inst)
    lam, t0 = inst.lam, inst.t0
    A = inst.get("A")
    nu = inst.get("nu", 0.0)
    if not 0 <= nu < 1:
        raise BadParam(f"nu must lie in [0, 1), got {nu}")
    if not A > 0:
        raise BadParam(f"A must be positive, got {A}")
    cn = _tail(inst.q, lam + nu, t0)
    jl = _tail(inst.q, lam, t0)
    c_nu = cn.value
    g = (A + c_nu) ** (lam - 1)
    first = lam * c_nu * g
    first_err = lam * cn.error * (g + (lam - 1) * c_nu * (A + c_nu) ** max(lam - 2, 0))
    thr2 = c_nu / (A + c_nu) ** lam
    conds = [
        Condition("first", first, 1 - nu, first_err),
        Condition("second", jl.value, thr2, jl.error + cn.error),
    ]
    kappa = lam * g * jl.value / (1 - nu)
    constants = {"c_nu": c_nu, "int_t_lam_q": jl.value, "varpi": kappa, "kappa": kappa, "A": A, "nu": nu}
    # simpler sufficient conditions (informational)
    if (2 - 1 / lam) * nu < 1:
        try:
            cl = _tail(inst.q, lam + (2 - 1 / lam) * nu, t0)
            conds.append(Condition("claim_first", lam * cl.value, 1 - nu, lam * cl.error, required=False))
            constants["claim_integral"] = cl.value
        except DivergentTail:
            conds.append(Condition("claim_first", math.inf, 1 - nu, required=False))
        conds.append(Condition("claim_second", (A + 1) ** lam, t0**nu, required=False))
    return CheckResult("linear_like", "linear_like", conds, constants)


def check_theorem10_cor11(inst: ProblemInstance) -> CheckResult:
    """Wronskian-weighted profile ``x = a t + O(t^(1-c))``."""
    inst.require_ef("the Wronskian-weighted check")
    _require_t0(inst)
    lam, t0 = inst.lam, inst.t0
    a = inst.get("a")
    b = inst.get("b", 0.0)
    c = inst.get("c_exp", 1.0)
    eps = inst.get("eps")
    if not 0 < c <= 1:
        raise BadParam(f"c_exp must lie in (0, 1], got {c}")
    if not 0 < eps < 1:
        raise BadParam(f"eps must lie in (0, 1), got {eps}")
    if a < 0 or b < 0:
        raise BadParam("a and b must be nonnegative")
    ic = _tail(inst.q, lam + c, t0)
    jl = _tail(inst.q, lam, t0)
    g = (a + eps) ** (lam - 1)
    first = lam * g * ic.value
    second = b / t0 + (a + eps) ** lam * ic.value / (c * t0**c)
    conds = [
        Condition("first", first, c, lam * g * ic.error),
        Condition("second", second, eps, (a + eps) ** lam * ic.error / (c * t0**c)),
    ]
    sigma = lam * g * jl.value / c
    constants = {"I_c": ic.value, "varsigma": sigma, "kappa": sigma, "a": a, "b": b, "c_exp": c, "eps": eps}
    return CheckResult("wronskian", "wronskian", conds, constants)


def check_theorem12(inst: ProblemInstance) -> CheckResult:
    """Sandwich ``c - d <= x' < x/t <= c + d``."""
    inst.require_ef("the sandwich check")
    _require_t0(inst)
    lam, t0 = inst.lam, inst.t0
    c = inst.get("c")
    d = inst.get("d")
    if c < 0 or not d > 0:
        raise BadParam("need c >= 0 and d > 0")
    jl = _tail(inst.q, lam, t0)
    factor = max(lam * (c + d) ** (lam - 1), (c + d) ** lam / d)
    product = factor * jl.value
    theta = lam * (c + d) ** (lam - 1) * jl.value
    conds = [Condition("product", product, 1.0, factor * jl.error)]
    constants = {"J": jl.value, "max_factor": factor, "product": product, "vartheta": theta, "kappa": theta,
                 "c": c, "d": d}
    return CheckResult("sandwich", "sandwich", conds, constants)


CHECKS = {
    "bounded_limit": (check_atkinson, ()),
    "dube_mingarelli": (check_dube_mingarelli, ("M",)),
    "derivative_space": (check_derivative_space, ("M",)),
    "linear_like": (check_cor9, ("A",)),
    "wronskian": (check_theorem10_cor11, ("a", "eps")),
    "sandwich": (check_theorem12, ("c", "d")),
}


def check_scheme(inst: ProblemInstance, scheme: str) -> CheckResult:
    try:
        fn, _ = CHECKS[scheme]
    except KeyError:
        raise BadParam(f"unknown scheme {scheme!r}") from None
    return fn(inst)


def run_all(inst: ProblemInstance) -> CriteriaReport:
    """Run every check whose parameters are present in the instance."""
    checks = []
    for scheme, (fn, needed) in CHECKS.items():
        if not inst.is_emden_fowler and scheme not in ("dube_mingarelli", "derivative_space"):
            continue
        if scheme == "derivative_space" and not inst.has("M") and inst.has("c"):
            needed = ("c",)
        if not inst.has(*needed):
            continue
        try:
            checks.append(fn(inst))
        except DivergentTail as exc:
            checks.append(CheckResult(scheme, scheme, [Condition("tail", math.inf, 1.0)], {}, str(exc)))
        except (BadParam, NotApplicable) as exc:
            checks.append(CheckResult(scheme, scheme, [Condition("params", math.inf, 1.0)], {}, str(exc)))
    return CriteriaReport(checks)
