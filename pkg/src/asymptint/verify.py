"""Independent checks of computed solutions and the oscillation demonstration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import EmdenFowler
from .errors import BadParam
from .fixpoint import ContractionCertificate, Scheme
from .funcspace import GridFunction
from .rk import DormandPrince, integrate_second_order, locate_crossing, second_order_rhs

FLAT_HORIZON = 50.0
FLAT_TOL = 1e-6
DECADE_RATIO = 0.5


@dataclass
class SolutionProfile:
    """A solution ``x``, its derivative and the data needed to check it."""

    scheme: str
    x: GridFunction
    xprime: GridFunction
    params: dict
    nonlinearity: object
    certificate: ContractionCertificate | None = None
    source: Scheme | None = None
    verification: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.x.grid

    @classmethod
    def from_fixed_point(cls, scheme: Scheme, u: GridFunction, cert: ContractionCertificate | None = None):
        x, xp = scheme.solution(u)
        return cls(scheme.label, x, xp, scheme.params(), scheme.nl, cert, scheme)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "params": dict(self.params),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "solution": self.x.to_dict(),
            "derivative": self.xprime.to_dict(),
            "verification": self.verification,
        }


@dataclass
class ResidualStats:
    max: float
    rms: float
    argmax: float

    def to_dict(self):
        return {"max": self.max, "rms": self.rms, "argmax": self.argmax}


def residual(profile: SolutionProfile, sample_count: int | None = None) -> ResidualStats:
    """``|x'' + f(t, x)|`` at the nodes, with ``x''`` obtained by differentiating
    the operator's exact derivative ``x'`` (five-point rule in ``log t``).

    ``sample_count`` restricts the statistics to that many evenly spread nodes.
    """
    g = profile.grid
    xpp = g.derivative(profile.xprime.values)
    r = np.abs(xpp + profile.nonlinearity(g.nodes, profile.x.values))
    idx = np.arange(len(g))
    if sample_count is not None and sample_count < len(g):
        idx = np.unique(np.linspace(0, len(g) - 1, sample_count).round().astype(int))
    r = r[idx]
    i = int(np.argmax(r))
    return ResidualStats(float(r[i]), float(np.sqrt(np.mean(r**2))), float(g.nodes[idx[i]]))


def check_derivative_consistency(profile: SolutionProfile) -> float:
    """Largest gap between ``x'`` and the numerical derivative of ``x``."""
    g = profile.grid
    return float(np.max(np.abs(g.derivative(profile.x.values) - profile.xprime.values)))


def _decade_ratio(t: np.ndarray, y: np.ndarray) -> float:
    """``|y(T)| / |y(T/10)|`` on the last decade of the mesh (0 if both vanish)."""
    T = t[-1]
    if T / 10 < t[0]:
        return math.nan
    j = int(np.searchsorted(t, T / 10))
    a, b = abs(y[j]), abs(y[-1])
    if a == 0:
        return 0.0 if b == 0 else math.inf
    return b / a


def check_profiles(profile: SolutionProfile, tol: float = 1e-9) -> dict[str, bool]:
    """Finite-horizon checks of the scheme's sandwich and decay claims.

    Trend checks compare the last decade of the mesh and are necessary
    conditions only, not statements about limits.
    """
    t = profile.grid.nodes
    x = profile.x.values
    xp = profile.xprime.values
    p = profile.params
    s = profile.source
    out: dict[str, bool] = {}
    if profile.scheme in ("bounded_limit", "dube_mingarelli"):
        lo, hi = p["lower"], p["upper"]
        out["bounds"] = bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))
        out["derivative_nonnegative"] = bool(np.all(xp >= -tol))
        out["t_xprime_decays"] = bool(_decade_ratio(t, t * xp) < DECADE_RATIO)
        out["x_tends_to_limit"] = bool(_decade_ratio(t, x - p["c"]) < DECADE_RATIO)
    elif profile.scheme == "sandwich":
        c, d = p["c"], p["d"]
        ratio = x / t
        gap = ratio[1:] - xp[1:]
        out["lower"] = bool(np.all(xp >= c - d - tol))
        out["wronskian_strict"] = bool(np.all(gap > 0))
        out["upper"] = bool(np.all(ratio <= c + d + tol))
        out["ratio_at_least_c"] = bool(np.all(ratio >= c - tol))
    elif profile.scheme == "wronskian":
        a, b, cx = p["a"], p["b"], p["c_exp"]
        w = t**cx * ((x - b) / t - xp)
        scale = tol * np.maximum(1.0, np.abs(s.beta))
        out["alpha_bound"] = bool(np.all(w >= s.alpha - scale))
        out["beta_bound"] = bool(np.all(w <= s.beta + scale))
        out["x_at_least_b"] = bool(np.all(x >= b - tol))
        out["wronskian_strict"] = bool(np.all(xp[1:] < x[1:] / t[1:]))
    elif profile.scheme == "linear_like":
        A = p["A"]
        g = profile.grid
        omega = x - A * t
        lo = g.cumulative(s.alpha)
        hi = g.cumulative(s.beta)
        sc = tol * np.maximum(1.0, np.abs(hi))
        out["omega_lower"] = bool(np.all(omega >= lo - sc))
        out["omega_upper"] = bool(np.all(omega <= hi + sc))
        out["slope_tends_to_A"] = bool(_decade_ratio(t, t ** p["nu"] * (xp - A)) < DECADE_RATIO)
    elif profile.scheme == "derivative_space":
        out["alpha_bound"] = bool(np.all(xp >= s.alpha - tol))
        out["beta_bound"] = bool(np.all(xp <= s.beta + tol))
        out["x_tends_to_M"] = bool(_decade_ratio(t, x - p["M"]) < DECADE_RATIO)
    else:
        raise BadParam(f"unknown scheme {profile.scheme!r}")
    return out


@dataclass
class RKReport:
    max_deviation_flat: float
    max_deviation: float
    within_flat_tol: bool
    within_envelope: bool
    horizon: float

    def to_dict(self):
        return dict(self.__dict__)


def growth_envelope(profile: SolutionProfile, base: float = FLAT_TOL) -> np.ndarray:
    """Admissible deviation at the nodes beyond the flat horizon.

    Perturbations of ``x'' + f(t, x) = 0`` grow at most like
    ``(1 + t - t0) exp(int (s - t0) L(s) ds)`` with ``L = |df/dx|``.
    """
    g = profile.grid
    t = g.nodes
    nl = profile.nonlinearity
    if isinstance(nl, EmdenFowler):
        L = nl.lam * nl.q(t) * np.abs(profile.x.values) ** (nl.lam - 1)
    else:
        L = nl.k(t)
    growth = (1 + t - t[0]) * np.exp(g.cumulative((t - t[0]) * L))
    return base * growth


def rk_crosscheck(profile: SolutionProfile, rtol: float = 1e-10, horizon: float = FLAT_HORIZON,
                  t_end: float | None = None) -> RKReport:
    """Forward-integrate from ``(x(t0), x'(t0))`` and compare at the nodes.

    Deviations up to ``horizon`` must stay below ``1e-6``; beyond it they are
    compared with :func:`growth_envelope`, because forward integration of
    this boundary value problem amplifies initial-data errors.
    """
    g = profile.grid
    t = g.nodes
    t_end = g.t_max if t_end is None else min(t_end, g.t_max)
    mask = t <= t_end * (1 + 1e-14)
    traj = integrate_second_order(profile.nonlinearity, t[0], profile.x.values[0], profile.xprime.values[0],
                                  t[mask][-1], stops=t[mask][1:], rtol=rtol, atol=rtol * 1e-2)
    on_nodes = np.isin(traj.t, t[mask])
    x_rk = traj.y[on_nodes, 0]
    dev = np.abs(x_rk - profile.x.values[mask])
    flat = t[mask] <= horizon
    env = np.maximum(growth_envelope(profile)[mask], FLAT_TOL)
    return RKReport(
        float(np.max(dev[flat])) if flat.any() else 0.0,
        float(np.max(dev)),
        bool(np.all(dev[flat] <= FLAT_TOL)),
        bool(np.all(dev <= env)),
        float(horizon),
    )


@dataclass
class OscillationResult:
    crossings: list
    t: np.ndarray
    x: np.ndarray

    @property
    def count(self) -> int:
        return len(self.crossings)

    def to_csv(self) -> str:
        lines = ["t,x"] + [f"{a:.17g},{b:.17g}" for a, b in zip(self.t, self.x)]
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {"count": self.count, "crossings": list(self.crossings)}


def oscillation_demo(nonlinearity, t_end: float, x0: float, v0: float, t0: float = 1.0,
                     rtol: float = 1e-10, oscillatory_threshold: int = 5) -> OscillationResult:
    """Integrate from ``(x0, v0)`` and record the sign changes of ``x``.

    A demonstration of the oscillation dichotomy, not a proof.
    """
    if not isinstance(nonlinearity, EmdenFowler):
        raise BadParam("the oscillation demo needs an Emden-Fowler nonlinearity")
    solver = DormandPrince(second_order_rhs(nonlinearity), rtol, rtol * 1e-2)
    traj = solver.integrate(t0, [x0, v0], t_end)
    ys = traj.y
    crossings = []
    for i in range(len(traj.t) - 1):
        a, b = ys[i, 0], ys[i + 1, 0]
        if a != 0 and np.sign(a) != np.sign(b) and b != 0:
            crossings.append(locate_crossing(solver, traj.t[i], ys[i], traj.t[i + 1]))
        elif b == 0 and a != 0:
            crossings.append(float(traj.t[i + 1]))
    return OscillationResult(crossings, traj.t, ys[:, 0])


def classify(result: OscillationResult, threshold: int = 5) -> str:
    return "oscillatory" if result.count >= threshold else "nonoscillatory"


def verify_profile(profile: SolutionProfile, rk: bool = True) -> dict:
    """Run every check and store the results on the profile."""
    res = residual(profile)
    out = {
        "residual": res.to_dict(),
        "derivative_consistency": check_derivative_consistency(profile),
        "profiles": check_profiles(profile),
    }
    if rk:
        out["rk"] = rk_crosscheck(profile).to_dict()
    profile.verification = out
    return out
