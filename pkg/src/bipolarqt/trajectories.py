"""
Trajectories on the bipolar modified potential u(x), on the classical
potential V(x), and the stationary unipolar case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bipolar import BipolarDecomposition, decompose
from .eigenstates import Eigenstate
from .numerics import find_root, integrate_ode
from .potentials import Potential
from .unipolar import unipolar_of


class TrajectoryExitError(RuntimeError):
    """The trajectory left the decomposition window before the end time."""

    def __init__(self, message, exit_time, partial=None):
        super().__init__(message)
        self.exit_time = exit_time
        self.partial = partial


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    law: str
    energy: float
    h: np.ndarray = field(default=None)
    lm_dev: np.ndarray = field(default=None)
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        h = self.h if self.h is not None else np.full_like(self.t, np.nan)
        lm = self.lm_dev if self.lm_dev is not None else np.full_like(self.t, np.nan)
        return np.column_stack([self.t, self.x, self.p, h, lm])


class MomentumTable:
    """Quintic Hermite table of p(x) on uniform knots, evaluated with plain floats.

    The inner loop of a trajectory calls this a few hundred thousand times,
    so it avoids numpy scalars entirely.
    """

    def __init__(self, decomp: BipolarDecomposition, lo: float, hi: float, knots: int):
        xs = np.linspace(lo, hi, knots)
        p, dp, d2p = decomp.momentum_derivatives(xs)
        self.lo, self.hi = float(lo), float(hi)
        self.h = float(xs[1] - xs[0])
        self.n = knots
        self.p = np.asarray(p).tolist()
        self.dp = (np.asarray(dp) * self.h).tolist()
        self.d2p = (np.asarray(d2p) * self.h * self.h).tolist()
        m = decomp.state.mass
        # sqrt|d(p p')/dx| / m sets the time scale on which the force changes
        self.rate = float(np.sqrt(np.max(np.abs(np.asarray(p) * d2p + np.asarray(dp) ** 2))) / m)

    def __call__(self, x):
        """(p, p') at x."""
        u = (x - self.lo) / self.h
        j = int(u)
        if j < 0 or j >= self.n - 1:
            if j == self.n - 1 and x <= self.hi:
                j = self.n - 2
            else:
                raise ValueError("outside momentum table")
        t = u - j
        t2 = t * t
        t3 = t2 * t
        t4 = t3 * t
        t5 = t4 * t
        p0, p1 = self.p[j], self.p[j + 1]
        d0, d1 = self.dp[j], self.dp[j + 1]
        s0, s1 = self.d2p[j], self.d2p[j + 1]
        val = (p0 * (1 - 10 * t3 + 15 * t4 - 6 * t5) + d0 * (t - 6 * t3 + 8 * t4 - 3 * t5)
               + s0 * (0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5) + s1 * (0.5 * t3 - t4 + 0.5 * t5)
               + d1 * (-4 * t3 + 7 * t4 - 3 * t5) + p1 * (10 * t3 - 15 * t4 + 6 * t5))
        der = (p0 * (-30 * t2 + 60 * t3 - 30 * t4) + d0 * (1 - 18 * t2 + 32 * t3 - 15 * t4)
               + s0 * (t - 4.5 * t2 + 6 * t3 - 2.5 * t4) + s1 * (1.5 * t2 - 4 * t3 + 2.5 * t4)
               + d1 * (-12 * t2 + 28 * t3 - 15 * t4) + p1 * (30 * t2 - 60 * t3 + 30 * t4))
        return val, der / self.h


# RK4 keeps LM adherence near 1e-10 while rate * step stays below this
_RATE_STEP = 1e-2


def _substeps(tab, dt):
    return max(1, math.ceil(dt * tab.rate / _RATE_STEP))


def _table_source(decomp):
    """Decomposition whose momentum is smooth at the level RK4 needs.

    The closed form switches to quadrature where it loses digits, and that seam
    shows up as an energy kick of ~1e-9; far in the pile-up region, where p is
    tiny, such a kick becomes a visible LM deviation.  The quadrature twin with
    the same F, x0 and branch offset has no seam.
    """
    if decomp.method == "quadrature":
        return decomp
    return decompose(decomp.state, flux=decomp.flux, x0=decomp.x0, method="quadrature",
                     branch_offset=decomp.branch_offset, trunc_tol=decomp.trunc_tol)


def _table_for(decomp, knots=None):
    lo, hi = decomp.window
    if knots is None:
        # ~ 40 knots per local wavelength at the well bottom is ample for quintic pieces
        st = decomp.state
        p_top = math.sqrt(2.0 * st.mass * max(st.energy - st.potential.minimum()[1], 1e-12))
        knots = int(min(200001, max(4001, 40 * (hi - lo) * p_top / st.hbar * (st.n + 1))))
    return MomentumTable(_table_source(decomp), lo, hi, knots)


def _finish(decomp, res, law, exit_time=None):
    t, x, p = res.t, res.y[:, 0], res.y[:, 1]
    m = decomp.state.mass
    p_lm = np.asarray(decomp.momentum(x))
    u = np.asarray(decomp.modified_potential(x))
    h = p * p / (2.0 * m) + u
    e = decomp.state.energy
    lm_dev = np.abs(p - p_lm)
    diag = {"max_lm_dev": float(lm_dev.max()), "energy_drift": float(np.max(np.abs(h - e)) / abs(e)),
            "monotonic": bool(np.all(np.diff(x) > 0)), "steps": res.steps}
    if exit_time is not None:
        diag["exit_time"] = exit_time
    return Trajectory(t, x, p, law, e, h=h, lm_dev=lm_dev, diagnostics=diag)


def propagate_bipolar(decomp: BipolarDecomposition, x_start: float, t_end: float, dt: float = 1e-3,
                      record_every: int = 10, table=None) -> Trajectory:
    """Integrate xdot = p/m, pdot = -u'(x) = p p'/m on the positive sheet."""
    lo, hi = decomp.window
    if not lo < x_start < hi:
        raise ValueError(f"start {x_start} outside the decomposition window {decomp.window}")
    tab = table if table is not None else _table_for(decomp)
    m = decomp.state.mass

    def rhs(t, y):
        # an RK stage may overshoot the window; ``stop`` then ends the run after this step
        p, dp = tab(min(max(y[0], tab.lo), tab.hi))
        return (y[1] / m, p * dp / m)

    def stop(t, y):
        return not (lo < y[0] < hi)

    p0 = float(decomp.momentum(x_start))
    sub = _substeps(tab, dt)
    res = integrate_ode(rhs, [x_start, p0], 0.0, t_end, dt=dt / sub, method="rk4",
                        record_every=record_every * sub, stop=stop)
    if res.t[-1] < t_end:
        partial = _finish(decomp, res, "bipolar-quantum", exit_time=float(res.t[-1]))
        raise TrajectoryExitError(f"trajectory left the window at t={res.t[-1]:.6g}", float(res.t[-1]), partial)
    traj = _finish(decomp, res, "bipolar-quantum")
    traj.diagnostics["substeps"] = sub
    return traj


def propagate_flow(decomp: BipolarDecomposition, x_start: float, t_end: float, dt: float = 1e-3,
                   record_every: int = 10, table=None):
    """Integrate the first-order flow xdot = p(x)/m directly."""
    tab = table if table is not None else _table_for(decomp)
    m = decomp.state.mass
    sub = _substeps(tab, dt)

    def rhs(t, y):
        return (tab(min(max(y[0], tab.lo), tab.hi))[0] / m,)

    res = integrate_ode(rhs, [x_start], 0.0, t_end, dt=dt / sub, method="rk4", record_every=record_every * sub)
    return res.t, res.y[:, 0]


def flow_equivalence(decomp: BipolarDecomposition, x_start: float, t_end: float, dt: float = 1e-3) -> float:
    """max |x_force(t) - x_flow(t)| between the Newtonian and first-order laws."""
    tab = _table_for(decomp)
    traj = propagate_bipolar(decomp, x_start, t_end, dt=dt, record_every=10, table=tab)
    _, xf = propagate_flow(decomp, x_start, t_end, dt=dt, record_every=10, table=tab)
    return float(np.max(np.abs(traj.x - xf)))


def propagate_semiclassical(potential: Potential, energy: float, x_start: float, sheet: int,
                            t_end: float, dt: float = 1e-3, record_every: int = 10) -> Trajectory:
    """Classical motion on H(x, p) = E starting on the given momentum sheet (+1 or -1)."""
    m = potential.mass
    gap = energy - float(potential(x_start))
    if gap < -1e-12 * max(1.0, abs(energy)):
        raise ValueError(f"start {x_start} is outside the classically allowed region")
    p0 = math.copysign(math.sqrt(2.0 * m * max(gap, 0.0)), sheet)

    def rhs(t, y):
        return (y[1] / m, -float(potential.derivative(y[0])))

    res = integrate_ode(rhs, [x_start, p0], 0.0, t_end, dt=dt, method="rk4", record_every=record_every)
    x, p = res.y[:, 0], res.y[:, 1]
    h = p * p / (2.0 * m) + np.asarray(potential(x))
    drift = float(np.max(np.abs(h - energy)) / abs(energy))
    return Trajectory(res.t, x, p, "semiclassical", energy, h=h, lm_dev=np.abs(h - energy),
                      diagnostics={"energy_drift": drift, "steps": res.steps})


def measured_period(traj: Trajectory) -> float:
    """Mean spacing of upward zero crossings of p(t) (linear interpolation)."""
    t, p = traj.t, traj.p
    idx = np.nonzero((p[:-1] < 0) & (p[1:] >= 0))[0]
    if idx.size < 2:
        raise ValueError("fewer than two full periods recorded")
    tc = t[idx] - p[idx] * (t[idx + 1] - t[idx]) / (p[idx + 1] - p[idx])
    return float(np.mean(np.diff(tc)))


def unipolar_stationarity_check(state: Eigenstate, grid=None, x_start: float = 0.5,
                                t_end: float = 100.0, dt: float = 1e-2) -> dict:
    """U = V + Q must equal E, so a particle released at rest never moves."""
    uni = unipolar_of(state)
    if grid is None:
        lo, hi = _state_span(state)
        grid = np.linspace(lo, hi, 2001)
    grid = np.asarray(grid, dtype=float)
    dev = float(np.max(np.abs(uni.modified_potential(grid) - state.energy)))
    m = state.mass

    def rhs(t, y):
        return (y[1] / m, float(uni.modified_force(y[0])))

    res = integrate_ode(rhs, [x_start, 0.0], 0.0, t_end, dt=dt, method="rk4", record_every=100)
    disp = float(np.max(np.abs(res.y[:, 0] - x_start)))
    return {"max_U_minus_E": dev, "max_displacement": disp, "node_types": uni.node_types,
            "stationary": disp < 1e-6}


def _state_span(state):
    from .semiclassical import turning_points

    a, b = turning_points(state.potential, state.energy)
    pad = 0.5 * (b - a)
    lo, hi = state.support
    return max(a - pad, lo), min(b + pad, hi)


def ensemble_starts(decomp: BipolarDecomposition, count: int, fraction: float = 0.9):
    """Start points equally spaced in the action s over the central ``fraction`` of its range."""
    if count < 1:
        raise ValueError("count must be positive")
    lo, hi = decomp.window
    s_lo, s_hi = (float(v) for v in decomp.action(np.array([lo, hi])))
    mid = 0.5 * (s_lo + s_hi)
    half = 0.5 * fraction * (s_hi - s_lo)
    targets = np.linspace(mid - half, mid + half, count)
    return np.array([find_root(lambda x: float(decomp.action(x)) - s, lo, hi, tol=1e-12) for s in targets])
