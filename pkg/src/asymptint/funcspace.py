"""Discrete functions on [t0, inf): graded grids, tail models and metrics.

A :class:`GridFunction` stores node values on a geometric mesh over
``[t0, T_max]`` plus an analytic tail model for ``t > T_max``.  Values between
nodes come from a monotone piecewise-cubic (PCHIP) interpolant in ``log t``.

Integrals over nodes are computed with composite Lagrange rules in the
variable ``x = log t`` (six-point stencils, shifted at the ends), which are
sixth-order accurate on smooth integrands; a four-point rule run alongside
provides the error estimate.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .coefficients import TailValue
from .errors import BadGrid, BadParam, DivergentTail, DomainError, GridMismatch

STITCH_RTOL = 1e-9
DEFAULT_RATIO_CAP = 1.25
QUAD_ORDER = 6
_TAIL_SAMPLES = np.geomspace(1.0, 1e8, 49)[1:]


def _lagrange_interval_weights(x: np.ndarray, m: int):
    """Weights integrating the degree m-1 interpolant over each interval."""
    n = len(x) - 1
    m = min(m, n + 1)
    starts = np.clip(np.arange(n) - (m // 2 - 1), 0, n + 1 - m)
    idx = starts[:, None] + np.arange(m)
    h = np.diff(x)
    z = (x[idx] - x[:-1, None]) / h[:, None]
    powers = np.arange(m)
    vt = np.transpose(z[:, :, None] ** powers, (0, 2, 1))
    moments = np.broadcast_to(1.0 / (powers + 1.0), (n, m))[..., None]
    w = np.linalg.solve(vt, moments)[..., 0] * h[:, None]
    return idx, w


def _lagrange_derivative_weights(x: np.ndarray, m: int = 5):
    """Weights of the first derivative of the local interpolant at each node."""
    n = len(x) - 1
    m = min(m, n + 1)
    starts = np.clip(np.arange(n + 1) - m // 2, 0, n + 1 - m)
    idx = starts[:, None] + np.arange(m)
    scale = (x[-1] - x[0]) / max(n, 1)
    z = (x[idx] - x[:, None]) / scale
    powers = np.arange(m)
    vt = np.transpose(z[:, :, None] ** powers, (0, 2, 1))
    rhs = np.zeros((n + 1, m, 1))
    if m > 1:
        rhs[:, 1, 0] = 1.0
    w = np.linalg.solve(vt, rhs)[..., 0] / scale
    return idx, w


class Grid:
    """Strictly increasing positive nodes; immutable.

    Quadrature and differentiation weights are computed once per grid.
    """

    def __init__(self, nodes):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise BadGrid("a grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)) or nodes[0] <= 0:
            raise BadGrid("grid nodes must be finite and positive")
        if np.any(np.diff(nodes) <= 0):
            raise BadGrid("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        self.nodes = nodes
        self.x = np.log(nodes)
        self.x.setflags(write=False)

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.nodes[1:] / self.nodes[:-1]))

    def same_as(self, other: "Grid") -> bool:
        return other is self or (
            other.nodes.shape == self.nodes.shape and np.array_equal(other.nodes, self.nodes)
        )

    @cached_property
    def _weights_hi(self):
        return _lagrange_interval_weights(self.x, QUAD_ORDER)

    @cached_property
    def _weights_lo(self):
        return _lagrange_interval_weights(self.x, 4)

    @cached_property
    def _dweights(self):
        return _lagrange_derivative_weights(self.x, 5)

    def interval_integrals(self, g, order: str = "hi") -> np.ndarray:
        """``int_{t_i}^{t_{i+1}} g(t) dt`` for each interval (g sampled at nodes)."""
        idx, w = self._weights_hi if order == "hi" else self._weights_lo
        gx = np.asarray(g, dtype=float) * self.nodes
        return np.sum(w * gx[idx], axis=1)

    def cumulative(self, g, order: str = "hi") -> np.ndarray:
        """``int_{t0}^{t_i} g(t) dt`` at every node."""
        return np.concatenate(([0.0], np.cumsum(self.interval_integrals(g, order))))

    def tail_from(self, g, order: str = "hi") -> np.ndarray:
        """``int_{t_i}^{T_max} g(t) dt`` at every node."""
        pieces = self.interval_integrals(g, order)
        return np.concatenate((np.cumsum(pieces[::-1])[::-1], [0.0]))

    def derivative(self, y) -> np.ndarray:
        """``dy/dt`` at the nodes from five-point local interpolants in ``log t``."""
        idx, w = self._dweights
        y = np.asarray(y, dtype=float)
        return np.sum(w * y[idx], axis=1) / self.nodes

    def refine(self) -> "Grid":
        """Grid with a geometric midpoint inserted in every interval."""
        mids = np.sqrt(self.nodes[1:] * self.nodes[:-1])
        out = np.empty(2 * self.nodes.size - 1)
        out[0::2] = self.nodes
        out[1::2] = mids
        return Grid(out)

    def __repr__(self):
        return f"Grid(t0={self.t0:g}, t_max={self.t_max:g}, n={len(self)})"


def make_grid(t0: float, T_max: float, N: int, r_max: float | None = None) -> Grid:
    """Geometric mesh with ``N + 1`` nodes from ``t0`` to ``T_max``.

    >>> make_grid(1, 16, 4).nodes.tolist()
    [1.0, 2.0, 4.0, 8.0, 16.0]
    """
    if not t0 >= 1:
        raise BadGrid(f"t0 must be >= 1, got {t0}")
    if not T_max > t0:
        raise BadGrid(f"T_max must exceed t0, got T_max={T_max}, t0={t0}")
    if int(N) != N or N < 1:
        raise BadGrid(f"N must be a positive integer, got {N}")
    ratio = (T_max / t0) ** (1.0 / N)
    if r_max is not None and ratio > r_max * (1 + 1e-12):
        raise BadGrid(f"grading ratio {ratio:.4g} exceeds cap {r_max}")
    nodes = t0 * ratio ** np.arange(N + 1)
    nodes[-1] = T_max
    return Grid(nodes)


def graded_grid(t0: float, T_max: float, ratio: float = 1.02) -> Grid:
    """Geometric mesh whose grading ratio does not exceed ``ratio``."""
    if not 1 < ratio <= DEFAULT_RATIO_CAP:
        raise BadGrid(f"ratio must lie in (1, {DEFAULT_RATIO_CAP}], got {ratio}")
    n = max(16, math.ceil(math.log(T_max / t0) / math.log(ratio) - 1e-9))
    return make_grid(t0, T_max, n)


# --------------------------------------------------------------------------
# tail models


@dataclass(frozen=True)
class ZeroTail:
    kind = "zero"

    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def derivative(self):
        return self

    def integral(self, w: float, T: float) -> float:
        return 0.0

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ConstantTail:
    c: float
    kind = "constant"

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c)

    def derivative(self):
        return ZeroTail()

    def integral(self, w, T):
        if self.c == 0:
            return 0.0
        if w >= -1:
            raise DivergentTail(f"constant tail {self.c} is not integrable with weight t^{w}")
        return -self.c * T ** (w + 1) / (w + 1)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class PowerTail:
    """``c + coef * t**exponent`` (limit ``c`` plus a power correction)."""

    c: float
    coef: float
    exponent: float
    kind = "power_correction"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.c + self.coef * t**self.exponent

    def derivative(self):
        return PowerTail(0.0, self.coef * self.exponent, self.exponent - 1)

    def integral(self, w, T):
        total = ConstantTail(self.c).integral(w, T)
        if self.coef != 0:
            e = w + self.exponent
            if e >= -1:
                raise DivergentTail(f"power tail t^{self.exponent} not integrable with weight t^{w}")
            total += -self.coef * T ** (e + 1) / (e + 1)
        return total

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "coef": self.coef, "exponent": self.exponent}

    @classmethod
    def fit(cls, c: float, exponent: float, t_end: float, value: float) -> "PowerTail":
        """Tail with limit ``c`` and given exponent passing through ``(t_end, value)``."""
        return cls(c, (value - c) / t_end**exponent, exponent)


@dataclass(frozen=True)
class LinearTail:
    """``A * t + B``."""

    A: float
    B: float
    kind = "linear_affine"

    def __call__(self, t):
        return self.A * np.asarray(t, dtype=float) + self.B

    def derivative(self):
        return ConstantTail(self.A)

    def integral(self, w, T):
        return PowerTail(self.B, self.A, 1.0).integral(w, T)

    def to_dict(self):
        return {"kind": self.kind, "A": self.A, "B": self.B}


def tail_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "zero":
        return ZeroTail()
    if kind == "constant":
        return ConstantTail(float(d["c"]))
    if kind == "power_correction":
        return PowerTail(float(d["c"]), float(d["coef"]), float(d["exponent"]))
    if kind == "linear_affine":
        return LinearTail(float(d["A"]), float(d["B"]))
    raise BadParam(f"unknown tail kind {kind!r}")


# --------------------------------------------------------------------------


class GridFunction:
    """Node values on a grid, a tail model, and optionally exact node slopes.

    Parameters
    ----------
    grid : Grid
    values : array-like
        One value per node.
    tail : tail model
        Analytic continuation for ``t > T_max``; must match the last node value
        to ``stitch_tol`` (relative), or ``stitch_tol=None`` to skip the check.
    slopes : array-like, optional
        Derivative values at the nodes when known analytically (operators
        produce them); otherwise :meth:`derivative` differentiates numerically.
    """

    def __init__(self, grid: Grid, values, tail=None, slopes=None, slope_tail=None,
                 stitch_tol: float | None = STITCH_RTOL):
        values = np.array(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise GridMismatch(f"{values.size} values for {len(grid)} nodes")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.tail = tail if tail is not None else ConstantTail(float(values[-1]))
        if slopes is not None:
            slopes = np.array(slopes, dtype=float)
            if slopes.shape != values.shape:
                raise GridMismatch("slopes must match node count")
            slopes.setflags(write=False)
        self.slopes = slopes
        self.slope_tail = slope_tail
        if stitch_tol is not None:
            end = float(self.tail(grid.t_max))
            gap = abs(end - values[-1])
            if not gap <= stitch_tol * max(1.0, abs(values[-1])):
                raise BadParam(
                    f"tail model {self.tail} misses last node value {values[-1]:.17g} by {gap:.3g}"
                )

    @property
    def nodes(self):
        return self.grid.nodes

    @cached_property
    def _interp(self):
        if len(self.grid) == 2:
            return None
        return PchipInterpolator(self.grid.x, self.values, extrapolate=False)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.grid.t0 * (1 - 1e-12)):
            raise DomainError(f"evaluation below t0={self.grid.t0}")
        inside = t_arr <= self.grid.t_max
        out = np.empty_like(t_arr)
        xs = np.log(np.clip(t_arr[inside], self.grid.t0, self.grid.t_max))
        if self._interp is None:
            out[inside] = np.interp(xs, self.grid.x, self.values)
        else:
            out[inside] = self._interp(xs)
        if np.any(~inside):
            out[~inside] = self.tail(t_arr[~inside])
        return float(out) if out.ndim == 0 else out

    def derivative(self) -> "GridFunction":
        """Derivative as a grid function (stored slopes if available)."""
        if self.slopes is not None:
            slopes = self.slopes
        else:
            slopes = self.grid.derivative(self.values)
        tail = self.slope_tail if self.slope_tail is not None else self.tail.derivative()
        return GridFunction(self.grid, slopes, tail, stitch_tol=None)

    def map_values(self, values, tail=None, slopes=None, stitch_tol=STITCH_RTOL) -> "GridFunction":
        return GridFunction(self.grid, values, tail, slopes, stitch_tol=stitch_tol)

    def integrate_tail(self, weight_exponent: float, T: float) -> TailValue:
        return integrate_tail_of(self, weight_exponent, T)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "nodes": self.grid.nodes.tolist(),
            "values": self.values.tolist(),
            "tail": self.tail.to_dict(),
        }
        if self.slopes is not None:
            d["slopes"] = self.slopes.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, grid: Grid | None = None) -> "GridFunction":
        g = grid if grid is not None and np.array_equal(grid.nodes, d["nodes"]) else Grid(d["nodes"])
        return cls(g, d["values"], tail_from_dict(d["tail"]), d.get("slopes"), stitch_tol=None)

    def to_csv(self, column: str = "value") -> str:
        buf = io.StringIO()
        buf.write(f"t,{column}\n")
        for t, v in zip(self.grid.nodes, self.values):
            buf.write(f"{t:.17g},{v:.17g}\n")
        return buf.getvalue()

    def __repr__(self):
        return f"GridFunction({self.grid!r}, tail={self.tail})"


def _check_same_grid(f: GridFunction, g: GridFunction):
    if not f.grid.same_as(g.grid):
        raise GridMismatch("grid functions live on different node sets")


def integrate_tail_of(f: GridFunction, weight_exponent: float, T: float) -> TailValue:
    """``int_T^inf t**w f(t) dt``: nodes part by quadrature plus the tail model
    integral in closed form.  The error bound is the gap between the six- and
    four-point rules."""
    grid = f.grid
    w = float(weight_exponent)
    if T < grid.t0 * (1 - 1e-12):
        raise DomainError(f"T={T} below t0={grid.t0}")
    tail_part = f.tail.integral(w, max(T, grid.t_max))
    if T >= grid.t_max:
        return TailValue(tail_part, 0.0)
    g = grid.nodes**w * f.values
    hi = grid.tail_from(g, "hi")
    lo = grid.tail_from(g, "lo")
    i = int(np.searchsorted(grid.nodes, T, side="left"))
    if np.isclose(grid.nodes[i], T, rtol=1e-13, atol=0):
        return TailValue(hi[i] + tail_part, abs(hi[i] - lo[i]))
    # partial interval [T, t_i] through the interpolant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        part, perr = integrate.quad(lambda s: s**w * f(s), T, grid.nodes[i], epsabs=1e-15, epsrel=1e-12)
    return TailValue(part + hi[i] + tail_part, abs(hi[i] - lo[i]) + perr)


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Metric:
    """Distance on grid functions.

    kinds: ``sup``; ``weighted_sup`` with weight ``t**exponent``;
    ``l1_zeta_sup``: L1 norm (trapezoid over nodes plus tail) plus ``zeta`` times sup.
    """

    kind: str = "sup"
    exponent: float = 0.0
    zeta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sup", "weighted_sup", "l1_zeta_sup"):
            raise BadParam(f"unknown metric kind {self.kind!r}")
        if self.kind == "l1_zeta_sup" and not self.zeta > 0:
            raise BadParam("zeta must be positive")

    @classmethod
    def sup(cls):
        return cls("sup")

    @classmethod
    def weighted(cls, exponent: float):
        return cls("weighted_sup", exponent=float(exponent))

    @classmethod
    def l1_zeta(cls, zeta: float):
        return cls("l1_zeta_sup", zeta=float(zeta))

    def _weight(self, t):
        if self.kind == "weighted_sup":
            return np.asarray(t, dtype=float) ** self.exponent
        return np.ones_like(np.asarray(t, dtype=float))

    def distance(self, f: GridFunction, g: GridFunction) -> float:
        _check_same_grid(f, g)
        grid = f.grid
        diff = np.abs(f.values - g.values)
        ts = grid.t_max * _TAIL_SAMPLES
        tdiff = np.abs(f.tail(ts) - g.tail(ts))
        sup = max(
            float(np.max(self._weight(grid.nodes) * diff)),
            float(np.max(self._weight(ts) * tdiff)),
        )
        if self.kind != "l1_zeta_sup":
            return sup
        l1 = float(np.trapezoid(diff, grid.nodes)) + _tail_l1(f.tail, g.tail, grid.t_max)
        return l1 + self.zeta * sup

    def to_dict(self):
        return {"kind": self.kind, "exponent": self.exponent, "zeta": self.zeta}


def _tail_l1(a, b, T: float) -> float:
    if a == b:
        return 0.0
    if isinstance(a, PowerTail) and isinstance(b, PowerTail) and a.c == b.c and a.exponent == b.exponent:
        return abs(PowerTail(0.0, a.coef - b.coef, a.exponent).integral(0, T))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val = integrate.quad(lambda s: abs(float(a(s)) - float(b(s))), T, np.inf, limit=200)[0]
    return val


def distance(metric: Metric, f: GridFunction, g: GridFunction) -> float:
    return metric.distance(f, g)
