"""
Shared numerical kernels.

Adaptive Gauss-Legendre quadrature, bracketed root finding, explicit
Runge-Kutta integration, a few special functions (erfi through the Dawson
function, physicists' Hermite polynomials) and a small interpolation table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate, optimize, special

SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    max_depth: int = 40

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Adaptive subdivision exhausted before meeting the tolerance."""

    def __init__(self, message, estimate, error_bound):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


@lru_cache(maxsize=8)
def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _panel_rule(f, a, b, order):
    u, w = gauss_legendre(order)
    h = b - a
    pts = a[:, None] + h[:, None] * u[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return h * (vals @ w)


_MAX_PANELS = 100_000


def integrate_segments(f, edges, spec: QuadratureSpec = DEFAULT_QUADRATURE, order=10):
    """Integrate ``f`` over every consecutive pair of ``edges`` at once.

    Every panel is compared against the sum over its two halves; panels that
    miss the tolerance are bisected.  All live panels are evaluated in one
    vectorized call per pass, so ``f`` must accept 1-D arrays.

    Returns an array of ``len(edges) - 1`` segment integrals.
    """
    edges = np.asarray(edges, dtype=float)
    nseg = edges.size - 1
    if nseg < 1:
        return np.zeros(0)
    widths = np.diff(edges)
    result = np.zeros(nseg)
    errors = np.zeros(nseg)

    a = edges[:-1].copy()
    b = edges[1:].copy()
    seg = np.arange(nseg)
    live = widths != 0.0
    a, b, seg = a[live], b[live], seg[live]
    scale = np.where(widths != 0.0, np.abs(widths), 1.0)

    coarse = _panel_rule(f, a, b, order)
    for depth in range(spec.max_depth + 1):
        if a.size == 0:
            break
        mid = 0.5 * (a + b)
        left = _panel_rule(f, a, mid, order)
        right = _panel_rule(f, mid, b, order)
        fine = left + right
        err = np.abs(fine - coarse)
        frac = np.abs(b - a) / scale[seg]
        allowed = np.maximum(spec.abs_tol * frac, spec.rel_tol * np.abs(fine))
        ok = err <= allowed
        if not np.all(np.isfinite(fine)):
            raise QuadratureError("non-finite integrand", estimate=result, error_bound=errors)
        if depth == spec.max_depth or a.size > _MAX_PANELS:
            np.add.at(result, seg, fine)
            np.add.at(errors, seg, err)
            if not np.all(ok):
                raise QuadratureError(
                    f"adaptive quadrature did not converge after {depth} bisections",
                    estimate=result,
                    error_bound=errors,
                )
            break
        np.add.at(result, seg[ok], fine[ok])
        np.add.at(errors, seg[ok], err[ok])
        keep = ~ok
        a, mid, b, seg = a[keep], mid[keep], b[keep], seg[keep]
        left, right = left[keep], right[keep]
        a = np.concatenate([a, mid])
        b = np.concatenate([mid, b])
        seg = np.concatenate([seg, seg])
        coarse = np.concatenate([left, right])
    if not np.all(np.isfinite(result)):
        raise QuadratureError("non-finite integrand", estimate=result, error_bound=errors)
    return result


def integrate_adaptive(f, a: float, b: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Adaptive quadrature of a vectorized integrand over a finite interval."""
    if a == b:
        return 0.0
    if a > b:
        return -integrate_adaptive(f, b, a, spec)
    return float(integrate_segments(f, [a, b], spec)[0])


def cumulative_integral(f, xs, spec: QuadratureSpec = DEFAULT_QUADRATURE):
    """Running integral of ``f`` from ``xs[0]`` to each element of sorted ``xs``."""
    xs = np.asarray(xs, dtype=float)
    out = np.zeros_like(xs)
    if xs.size > 1:
        out[1:] = np.cumsum(integrate_segments(f, xs, spec))
    return out


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


def find_root(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
              max_iter: int = 200) -> float:
    """Root of ``f`` in the bracket [a, b] to absolute tolerance ``tol`` (Brent's method)."""
    a, b = float(a), float(b)
    if a > b:
        a, b = b, a
    fa, fb = float(f(a)), float(f(b))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a!r}, {b!r}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    try:
        return float(optimize.brentq(lambda x: float(f(x)), a, b, xtol=tol, maxiter=max_iter))
    except RuntimeError as exc:
        raise ArithmeticError(f"root refinement did not converge: {exc}") from None


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def erfi(x):
    """Imaginary error function, (2/sqrt(pi)) * integral_0^x exp(t^2) dt.

    Evaluated as ``2 exp(x^2) D(x) / sqrt(pi)`` with the Dawson function D.
    Overflows to +-inf past |x| ~ 26.6; use :func:`log_abs_erfi` or
    :func:`recip_erfi` there.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = 2.0 / SQRT_PI * np.exp(x * x) * special.dawsn(x)
    return out if out.ndim else float(out)


def log_abs_erfi(x):
    """log|erfi(x)|, finite for all nonzero x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = x * x + np.log(2.0 / SQRT_PI * np.abs(special.dawsn(x)))
    return out if out.ndim else float(out)


def recip_erfi(x):
    """1/erfi(x) without overflow; infinite at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", under="ignore"):
        out = SQRT_PI * np.exp(-x * x) / (2.0 * special.dawsn(x))
    return out if out.ndim else float(out)


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n by three-term recurrence."""
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


def hermite_roots(n: int) -> np.ndarray:
    """Sorted real roots of H_n, Newton-polished on the recurrence."""
    if n == 0:
        return np.zeros(0)
    coeffs = np.zeros(n + 1)
    coeffs[-1] = 1.0
    roots = np.sort(np.polynomial.hermite.hermroots(coeffs).real)
    for _ in range(3):
        roots = roots - hermite(n, roots) / (2.0 * n * hermite(n - 1, roots))
    if n % 2 == 1:
        roots[n // 2] = 0.0
    # exact antisymmetry of the root set
    return 0.5 * (roots - roots[::-1])


# ---------------------------------------------------------------------------
# Tabulated curves
# ---------------------------------------------------------------------------


@dataclass
class CurveTable:
    """A sampled real function on a strictly increasing grid.

    With derivative data the interpolant is piecewise Hermite (cubic when
    only first derivatives are known, quintic with second derivatives too);
    without it a not-a-knot cubic spline is used.
    """

    x: np.ndarray
    y: np.ndarray
    dy: Optional[np.ndarray] = None
    d2y: Optional[np.ndarray] = None
    _interp: object = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("abscissas and ordinates must be 1-D arrays of equal length")
        if self.x.size < 2 or np.any(np.diff(self.x) <= 0):
            raise ValueError("abscissas must be strictly increasing")
        if self.d2y is not None and self.dy is None:
            raise ValueError("second derivatives require first derivatives")
        if self.dy is None:
            self._interp = interpolate.CubicSpline(self.x, self.y)
            return
        self.dy = np.asarray(self.dy, dtype=float)
        cols = [self.y, self.dy]
        if self.d2y is not None:
            self.d2y = np.asarray(self.d2y, dtype=float)
            cols.append(self.d2y)
        self._interp = interpolate.BPoly.from_derivatives(self.x, np.column_stack(cols))

    @property
    def span(self):
        return float(self.x[0]), float(self.x[-1])

    @property
    def degree(self) -> int:
        return 5 if self.d2y is not None else 3

    def __call__(self, x, nu: int = 0):
        xa = np.asarray(x, dtype=float)
        lo, hi = self.span
        slack = 1e-12 * max(1.0, hi - lo)
        if np.any(xa < lo - slack) or np.any(xa > hi + slack):
            raise ValueError(f"evaluation outside tabulated range [{lo}, {hi}]")
        out = self._interp(np.clip(xa, lo, hi), nu)
        return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------


class StepSizeError(ArithmeticError):
    """Adaptive step size underflowed."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), dim)
    steps: int


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    y2 = [yi + 0.5 * h * ki for yi, ki in zip(y, k1)]
    k2 = rhs(t + 0.5 * h, y2)
    y3 = [yi + 0.5 * h * ki for yi, ki in zip(y, k2)]
    k3 = rhs(t + 0.5 * h, y3)
    y4 = [yi + h * ki for yi, ki in zip(y, k3)]
    k4 = rhs(t + h, y4)
    return [yi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]


# Dormand-Prince 5(4) tableau
def integrate_ode(rhs: Callable[[float, Sequence[float]], Sequence[float]], y0, t0: float,
                  t1: float, dt: float = 1e-3, method: str = "rk4", rtol: float = 1e-10,
                  atol: float = 1e-12, record_every: int = 1,
                  stop: Optional[Callable[[float, Sequence[float]], bool]] = None) -> OdeResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1``.

    ``rhs`` receives and returns plain float sequences; the small-system
    case (a phase-space point) is the intended use, so no array machinery
    sits in the inner loop.

    ``method="rk4"`` takes fixed steps of ``dt`` (the last one shortened to
    land on ``t1``); ``method="dopri5"`` hands the problem to scipy's
    adaptive Dormand-Prince 5(4) pair, starting from ``dt``.  ``stop(t, y)`` may end the run early;
    the stopping sample is recorded.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("integration runs forward in time only")
    y = [float(v) for v in np.atleast_1d(y0)]
    t = float(t0)
    ts = [t]
    ys = [list(y)]
    steps = 0
    if method == "rk4":
        nsteps = int(math.ceil((t1 - t0) / dt - 1e-9))
        for i in range(nsteps):
            h = min(dt, t1 - t)
            y = _rk4_step(rhs, t, y, h)
            t = t0 + (i + 1) * dt if i + 1 < nsteps else t1
            steps += 1
            halt = stop is not None and stop(t, y)
            if steps % record_every == 0 or i + 1 == nsteps or halt:
                ts.append(t)
                ys.append(y)
            if halt:
                break
    elif method == "dopri5":
        events = None
        if stop is not None:
            def halt_event(t, y):
                return -1.0 if stop(t, list(y)) else 1.0
            halt_event.terminal = True
            events = halt_event
        sol = integrate.solve_ivp(lambda t, y: rhs(t, list(y)), (t0, t1), y, method="RK45", first_step=dt,
                                  rtol=rtol, atol=atol, events=events)
        if sol.status == -1:
            raise StepSizeError(f"step size underflow at t={sol.t[-1]:.6g}: {sol.message}", float(sol.t[-1]))
        steps = sol.t.size - 1
        ts = sol.t
        ys = sol.y.T
        if sol.status == 1:
            ts = np.append(ts, sol.t_events[0][0])
            ys = np.vstack([ys, sol.y_events[0][0]])
        keep = np.zeros(ts.size, dtype=bool)
        keep[::record_every] = True
        keep[-1] = True
        return OdeResult(np.asarray(ts)[keep], np.asarray(ys, dtype=float)[keep], steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    return OdeResult(np.asarray(ts), np.asarray(ys, dtype=float), steps)
