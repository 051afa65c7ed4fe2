"""Adaptive Dormand-Prince 5(4) integrator used as an independent oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepFailure

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass
class Trajectory:
    """Accepted steps of an integration."""

    t: np.ndarray
    y: np.ndarray
    n_steps: int
    n_rejected: int


class DormandPrince:
    """Embedded 5(4) pair with standard step-size control.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy/dt`` for a 1-D state array.
    rtol, atol : float
        Local error tolerances (mixed absolute/relative, max norm).
    """

    def __init__(self, rhs, rtol: float = 1e-10, atol: float = 1e-12, max_steps: int = 1_000_000,
                 h_min: float = 1e-14):
        self.rhs = rhs
        self.rtol = rtol
        self.atol = atol
        self.max_steps = max_steps
        self.h_min = h_min

    def step(self, t: float, y: np.ndarray, h: float):
        """One trial step; returns ``(y_new, scaled_error_norm)``."""
        k = np.empty((7, y.size))
        k[0] = self.rhs(t, y)
        for i in range(1, 7):
            yi = y + h * np.dot(_A[i], k[:i])
            k[i] = self.rhs(t + _C[i] * h, yi)
        y5 = y + h * np.dot(_B5, k)
        err = h * np.dot(_E, k)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y5))
        return y5, float(np.max(np.abs(err) / scale))

    def integrate(self, t0: float, y0, t_end: float, stops=None, h0: float | None = None) -> Trajectory:
        """Integrate from ``t0`` to ``t_end``; every point in ``stops`` is hit exactly."""
        y = np.array(y0, dtype=float)
        stops = np.unique(np.append(np.asarray([] if stops is None else stops, dtype=float), t_end))
        stops = stops[(stops > t0) & (stops <= t_end)]
        h = h0 or 1e-3 * max(1.0, abs(t0))
        t = float(t0)
        ts, ys = [t], [y.copy()]
        n_rej = 0
        idx = 0
        for _ in range(self.max_steps):
            if idx >= stops.size:
                break
            target = stops[idx]
            h_try = min(h, target - t)
            land = h_try >= target - t
            y_new, en = self.step(t, y, h_try)
            if not np.all(np.isfinite(y_new)):
                en = math.inf
            if en <= 1.0:
                t = float(target) if land else t + h_try
                y = y_new
                ts.append(t)
                ys.append(y.copy())
                if land:
                    idx += 1
                fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                # keep the controller's step when the last one was shortened to land
                h = max(h, h_try) * fac if land else h_try * fac
            else:
                n_rej += 1
                h = h_try * max(0.1, 0.9 * en ** -0.25) if math.isfinite(en) else h_try * 0.1
                if h < self.h_min * max(1.0, abs(t)):
                    raise StepFailure(f"step size underflow at t = {t:.6g}")
        else:
            raise StepFailure(f"step budget of {self.max_steps} exhausted at t = {t:.6g}")
        return Trajectory(np.array(ts), np.array(ys), len(ts) - 1, n_rej)


def second_order_rhs(f):
    """Right-hand side of ``x'' + f(t, x) = 0`` as a first-order system."""

    def rhs(t, y):
        return np.array([y[1], -float(f(t, y[0]))])

    return rhs


def integrate_second_order(f, t0: float, x0: float, v0: float, t_end: float, stops=None,
                           rtol: float = 1e-10, atol: float = 1e-12) -> Trajectory:
    return DormandPrince(second_order_rhs(f), rtol, atol).integrate(t0, [x0, v0], t_end, stops)


def locate_crossing(solver: DormandPrince, t: float, y: np.ndarray, t_next: float, tol: float = 1e-8) -> float:
    """Bisection for the zero of the first component on ``(t, t_next]``."""
    lo, hi = 0.0, t_next - t
    s0 = np.sign(y[0])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ym, _ = solver.step(t, y, mid)
        if np.sign(ym[0]) == s0:
            lo = mid
        else:
            hi = mid
    return t + 0.5 * (lo + hi)
