"""
Stationary eigenstates of one-dimensional Hamiltonians.

Analytic harmonic-oscillator and Morse states, a generic two-sided shooting
solver, node location and the inverse map from a wavefunction back to the
potential that has it as an eigenstate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from . import potentials as pots
from .numerics import (
    QuadratureSpec,
    find_root,
    hermite_roots,
    integrate_adaptive,
    integrate_segments,
)
from .potentials import Potential


class EigenstateError(RuntimeError):
    """The requested eigenstate could not be constructed."""


class SingularPotentialError(ValueError):
    """The inverse potential is singular at type-two nodes."""

    def __init__(self, message, nodes):
        super().__init__(message)
        self.nodes = list(nodes)


@dataclass
class Eigenstate:
    """Base class for real stationary states.

    Subclasses provide :meth:`psi` and :meth:`dpsi`; the second derivative
    defaults to the Schroedinger identity psi'' = (2m/hbar^2)(V - E) psi.
    """

    n: int
    energy: float
    potential: Potential
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    normalized: bool = True
    support: tuple = (-math.inf, math.inf)

    @property
    def mass(self):
        return self.potential.mass

    @property
    def hbar(self):
        return self.potential.hbar

    @property
    def k2(self):
        """2m / hbar^2."""
        return 2.0 * self.mass / self.hbar ** 2

    def psi(self, x):
        raise NotImplementedError

    def dpsi(self, x):
        raise NotImplementedError

    def d2psi(self, x):
        return self.k2 * (self.potential(x) - self.energy) * self.psi(x)

    def __call__(self, x):
        return self.psi(x)

    def residual(self, x, h=None):
        """|(-hbar^2/2m) psi'' + (V - E) psi| with psi'' from differencing psi'."""
        x = np.asarray(x, dtype=float)
        if h is None:
            h = 1e-3 * self.potential.length_scale()
        d2 = (-self.dpsi(x + 2 * h) + 8 * self.dpsi(x + h) - 8 * self.dpsi(x - h)
              + self.dpsi(x - 2 * h)) / (12 * h)
        return np.abs(-d2 / self.k2 + (self.potential(x) - self.energy) * self.psi(x))

    def node_derivatives(self, z):
        """psi' ... psi'''' at a node z from the Schroedinger identity."""
        a = float(self.dpsi(z))
        v, dv = self.potential.evaluate(z)
        d3 = self.k2 * (v - self.energy) * a
        d4 = self.k2 * 2.0 * dv * a
        return a, d3, d4

    def describe(self) -> dict:
        return {"n": self.n, "E": self.energy, "nodes": [float(z) for z in self.nodes],
                "potential": self.potential.metadata()}


# ---------------------------------------------------------------------------
# Harmonic oscillator
# ---------------------------------------------------------------------------


def _hermite_functions(nmax, xi):
    """Normalized Hermite functions phi_0..phi_nmax at xi (stable recurrence)."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty((nmax + 1,) + xi.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * xi * xi)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for j in range(1, nmax):
        out[j + 1] = math.sqrt(2.0 / (j + 1)) * xi * out[j] - math.sqrt(j / (j + 1)) * out[j - 1]
    return out


def _ladder_derivative(coeffs):
    """d/dxi of sum c_j phi_j, using phi_j' = sqrt(j/2) phi_{j-1} - sqrt((j+1)/2) phi_{j+1}."""
    out = {}
    for j, c in coeffs.items():
        if j > 0:
            out[j - 1] = out.get(j - 1, 0.0) + c * math.sqrt(j / 2.0)
        out[j + 1] = out.get(j + 1, 0.0) - c * math.sqrt((j + 1) / 2.0)
    return out


@dataclass
class HarmonicEigenstate(Eigenstate):
    """Normalized Hermite-Gaussian eigenstate; all derivatives analytic."""

    def __post_init__(self):
        p = self.potential
        self._alpha = math.sqrt(p.mass * p.omega / p.hbar)

    def derivative(self, x, order=0):
        xi = self._alpha * np.asarray(x, dtype=float)
        coeffs = {self.n: 1.0}
        for _ in range(order):
            coeffs = _ladder_derivative(coeffs)
        phis = _hermite_functions(max(coeffs), xi)
        val = sum(c * phis[j] for j, c in coeffs.items())
        val = math.sqrt(self._alpha) * self._alpha ** order * val
        return val if np.ndim(val) else float(val)

    def psi(self, x):
        return self.derivative(x, 0)

    def dpsi(self, x):
        return self.derivative(x, 1)

    def d2psi(self, x):
        return self.derivative(x, 2)


def ho_eigenstate(n: int, mass: float = 1.0, omega: float = 1.0, hbar: float = 1.0,
                  potential: Potential | None = None) -> HarmonicEigenstate:
    """n-th harmonic-oscillator eigenstate, normalized to unit probability."""
    if n < 0:
        raise ValueError("quantum number must be non-negative")
    if potential is None:
        potential = pots.harmonic(k=mass * omega ** 2, mass=mass, hbar=hbar)
    elif potential.kind != "harmonic":
        raise ValueError("ho_eigenstate needs a harmonic potential")
    w = potential.omega
    alpha = math.sqrt(potential.mass * w / potential.hbar)
    nodes = hermite_roots(n) / alpha
    return HarmonicEigenstate(n=n, energy=potential.hbar * w * (n + 0.5), potential=potential,
                              nodes=nodes)


# ---------------------------------------------------------------------------
# Morse oscillator (analytic)
# ---------------------------------------------------------------------------


@dataclass
class MorseEigenstate(Eigenstate):
    """Closed-form Morse state in terms of generalized Laguerre polynomials."""

    def __post_init__(self):
        p = self.potential
        self._lam = pots.morse_lambda(p)
        self._s = self._lam - self.n - 0.5
        self._lognorm = 0.5 * (math.log(p.alpha) + math.lgamma(self.n + 1)
                               + math.log(2.0 * self._s) - math.lgamma(2.0 * self._lam - self.n))

    def _parts(self, x):
        p = self.potential
        x = np.asarray(x, dtype=float)
        logz = math.log(2.0 * self._lam) - p.alpha * (x - p.x_eq)
        z = np.exp(logz)
        a = 2.0 * self._s
        lag = special.eval_genlaguerre(self.n, a, z)
        dlag = -special.eval_genlaguerre(self.n - 1, a + 1, z) if self.n > 0 else np.zeros_like(z)
        with np.errstate(under="ignore"):
            env = np.exp(self._lognorm + self._s * logz - 0.5 * z)
        return z, env, lag, dlag

    def psi(self, x):
        _, env, lag, _ = self._parts(x)
        out = env * lag
        return out if np.ndim(out) else float(out)

    def dpsi(self, x):
        z, env, lag, dlag = self._parts(x)
        # d/dx = -alpha z d/dz
        dz = env * ((self._s / z - 0.5) * lag + dlag)
        out = -self.potential.alpha * z * dz
        return out if np.ndim(out) else float(out)


def morse_eigenstate(n: int, potential: Potential) -> MorseEigenstate:
    if potential.kind != "morse":
        raise ValueError("morse_eigenstate needs a Morse potential")
    energy = pots.morse_energy(potential, n)
    state = MorseEigenstate(n=n, energy=energy, potential=potential)
    lo, hi = _tail_domain(potential, energy, action=40.0)
    state.nodes = locate_nodes(state.psi, lo, hi, num=max(2000, 400 * (n + 1)), dpsi=state.dpsi)
    return state


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


def locate_nodes(psi, lo: float, hi: float, num: int = 4001, tol: float = 1e-12, dpsi=None) -> np.ndarray:
    """All simple sign changes of ``psi`` on [lo, hi], refined by root finding.

    With ``dpsi`` given, each root gets a few Newton steps to bring it to the
    rounding level of psi.
    """
    xs = np.linspace(lo, hi, num)
    vals = np.asarray(psi(xs), dtype=float)
    # values at the underflow level carry no sign information
    vals = np.where(np.abs(vals) <= 1e-250, 0.0, vals)
    roots = []
    for i in range(num - 1):
        fa, fb = vals[i], vals[i + 1]
        if fa * fb < 0:
            z = find_root(lambda t: float(psi(t)), xs[i], xs[i + 1], tol=tol)
            if dpsi is not None:
                z = _newton_polish(psi, dpsi, z, xs[i], xs[i + 1])
            roots.append(z)
        elif fa == 0.0 and 0 < i and vals[i - 1] * fb < 0:
            roots.append(xs[i])
    return np.asarray(roots, dtype=float)


def _newton_polish(psi, dpsi, z, a, b, steps=4):
    best, fbest = z, abs(float(psi(z)))
    for _ in range(steps):
        z = z - float(psi(z)) / float(dpsi(z))
        if not a <= z <= b:
            break
        fz = abs(float(psi(z)))
        if fz >= fbest:
            break
        best, fbest = z, fz
    return best


# ---------------------------------------------------------------------------
# Generic solver
# ---------------------------------------------------------------------------


def _tail_domain(potential: Potential, energy: float, action: float = 40.0):
    """Interval outside of which the bound state has decayed by exp(-action)."""
    from .semiclassical import turning_points

    x_min, x_max = turning_points(potential, energy)
    lo_bound, hi_bound = potential.search_interval()
    hbar, m = potential.hbar, potential.mass
    width = max(x_max - x_min, potential.length_scale())

    def extend(x0, direction, bound):
        acc = 0.0
        x = x0
        step = 0.02 * width
        while acc < action:
            x_new = x + direction * step
            if (direction < 0 and x_new < bound) or (direction > 0 and x_new > bound):
                return bound
            v_mid = potential(0.5 * (x + x_new))
            if v_mid <= energy and acc > 0:
                raise EigenstateError("potential drops below the energy again outside the well")
            acc += step * math.sqrt(max(2.0 * m * (v_mid - energy), 0.0)) / hbar
            x = x_new
            step *= 1.05
        return x

    return extend(x_min, -1.0, lo_bound), extend(x_max, 1.0, hi_bound)


def _numerov_node_count(potential, energy, xs):
    """Sign changes of the Dirichlet solution launched from xs[0] (Numerov)."""
    h = xs[1] - xs[0]
    c = h * h / 12.0 * 2.0 * potential.mass / potential.hbar ** 2
    g = (c * (np.asarray(potential(xs)) - energy)).tolist()
    y_prev, y = 0.0, 1e-30
    count = 0
    for i in range(1, len(xs) - 1):
        y_next = ((2.0 + 10.0 * g[i]) * y - (1.0 - g[i - 1]) * y_prev) / (1.0 - g[i + 1])
        if y_next == 0.0 or (y_next < 0.0) != (y < 0.0):
            count += 1
        y_prev, y = y, y_next
        if abs(y) > 1e200:
            y_prev *= 1e-200
            y *= 1e-200
    return count


@dataclass
class NumericalEigenstate(Eigenstate):
    """Eigenstate stored as two dense ODE solutions joined at a matching point."""

    _left: object = None
    _right: object = None
    _x_match: float = 0.0
    _scale_left: float = 1.0
    _scale_right: float = 1.0

    def _eval(self, x, comp):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(f"evaluation outside eigenstate support [{lo}, {hi}]")
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        left = flat <= self._x_match
        if np.any(left):
            out[left] = self._scale_left * self._left(flat[left])[comp]
        if np.any(~left):
            out[~left] = self._scale_right * self._right(flat[~left])[comp]
        out = out.reshape(np.shape(x))
        return out if out.ndim else float(out)

    def psi(self, x):
        return self._eval(x, 0)

    def dpsi(self, x):
        return self._eval(x, 1)


def _shoot(potential, energy, x_from, x_to, dense=False):
    k2 = 2.0 * potential.mass / potential.hbar ** 2

    def rhs(x, y):
        return (y[1], k2 * (potential(x) - energy) * y[0])

    direction = 1.0 if x_to > x_from else -1.0
    sol = solve_ivp(rhs, (x_from, x_to), [0.0, direction * 1e-20], method="DOP853",
                    rtol=1e-13, atol=1e-300, dense_output=dense,
                    first_step=1e-4 * potential.length_scale())
    if sol.status != 0:
        raise EigenstateError(f"shooting integration failed: {sol.message}")
    return sol


def _mismatch(potential, energy, xa, xb, xm):
    left = _shoot(potential, energy, xa, xm).y[:, -1]
    right = _shoot(potential, energy, xb, xm).y[:, -1]
    kloc = math.sqrt(2.0 * potential.mass * max(abs(energy - potential(xm)), 1e-12)) / potential.hbar
    nl = math.hypot(left[0], left[1] / kloc)
    nr = math.hypot(right[0], right[1] / kloc)
    return (left[0] * right[1] - left[1] * right[0]) / (nl * nr * kloc)


def solve_generic(potential: Potential, n: int | None = None, energy_window=None,
                  rel_tol: float = 1e-12) -> NumericalEigenstate:
    """Bound eigenstate of an arbitrary single-well potential.

    The level is isolated by bisection on the Numerov node count, then the
    energy is polished by two-sided shooting (matching the Wronskian at the
    classical midpoint) with a high-order integrator whose dense output also
    serves as the wavefunction representation.  Give either the quantum
    number ``n`` or an ``energy_window`` (lowest level inside it is used).
    """
    if (n is None) == (energy_window is None):
        raise ValueError("give exactly one of n or energy_window")
    if potential.kind == "morse" and n is not None and n >= pots.morse_bound_count(potential):
        raise EigenstateError(f"Morse potential supports only {pots.morse_bound_count(potential)} "
                              f"bound states; n={n} requested")
    x_bottom, v_bottom = potential.minimum()
    ceiling = potential.depth if potential.kind == "morse" else math.inf
    if potential.kind == "tabulated":
        lo_b, hi_b = potential.table.span
        ceiling = min(potential(lo_b), potential(hi_b))

    scale = potential.length_scale()
    if energy_window is not None:
        e_lo, e_hi = map(float, energy_window)
        if not e_lo < e_hi:
            raise ValueError("energy window must be increasing")
        e_hi = min(e_hi, ceiling - 1e-9 * abs(ceiling)) if math.isfinite(ceiling) else e_hi
    else:
        e_lo = v_bottom
        step = potential.hbar ** 2 / (potential.mass * scale ** 2)
        e_hi = v_bottom + step * (n + 1)

    def grid_for(e_top):
        xa, xb = _tail_domain(potential, e_top, action=40.0)
        kmax = math.sqrt(2.0 * potential.mass * (e_top - v_bottom)) / potential.hbar
        h = min(0.02 / kmax, (xb - xa) / 2000.0)
        npts = int(math.ceil((xb - xa) / h)) + 1
        return np.linspace(xa, xb, npts)

    # grow the upper energy until it clears the requested level
    while True:
        xs = grid_for(e_hi)
        c_hi = _numerov_node_count(potential, e_hi, xs)
        if energy_window is not None or c_hi >= n + 1:
            break
        new = v_bottom + 2.0 * (e_hi - v_bottom)
        if new >= ceiling:
            new = ceiling - 1e-9 * abs(ceiling)
            if e_hi >= new:
                raise EigenstateError(f"no bound state n={n} below the dissociation limit")
        e_hi = new
    c_lo = _numerov_node_count(potential, e_lo, xs) if e_lo > v_bottom else 0
    if energy_window is not None:
        if c_hi == c_lo:
            raise EigenstateError(f"energy window [{e_lo}, {e_hi}] contains no eigenvalue")
        n = c_lo
    target = n + 1

    lo, hi = e_lo, e_hi
    width_tol = 1e-7 * max(1.0, abs(e_hi - v_bottom))
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        if _numerov_node_count(potential, mid, xs) >= target:
            hi = mid
        else:
            lo = mid

    e_guess = 0.5 * (lo + hi)
    xa, xb = _tail_domain(potential, e_guess + 10 * width_tol, action=45.0)
    t_lo, t_hi = turning_points_safe(potential, e_guess)
    xm = 0.5 * (t_lo + t_hi)
    pad = 50.0 * width_tol
    a_e, b_e = lo - pad, hi + pad
    f = lambda e: _mismatch(potential, e, xa, xb, xm)
    fa, fb = f(a_e), f(b_e)
    if np.sign(fa) == np.sign(fb):
        raise EigenstateError("could not bracket the eigenvalue for refinement")
    energy = find_root(f, a_e, b_e, tol=rel_tol * max(1.0, abs(e_guess)))

    left = _shoot(potential, energy, xa, xm, dense=True)
    right = _shoot(potential, energy, xb, xm, dense=True)
    yl, yr = left.y[:, -1], right.y[:, -1]
    # join on whichever of value / slope is better conditioned
    if abs(yr[0]) * 1e-3 > abs(yr[1]) * scale * 1e-6 and abs(yr[0]) > 0:
        ratio = yl[0] / yr[0]
    else:
        ratio = yl[1] / yr[1]
    state = NumericalEigenstate(n=n, energy=energy, potential=potential, support=(xa, xb),
                                _left=left.sol, _right=right.sol, _x_match=xm,
                                _scale_left=1.0, _scale_right=ratio)
    spec = QuadratureSpec(abs_tol=1e-30, rel_tol=1e-13)
    edges = np.linspace(xa, xb, 401)
    norm = float(np.sum(integrate_segments(lambda x: state.psi(x) ** 2, edges, spec)))
    sign = 1.0 if state.psi(xb - 1e-3 * (xb - xa)) > 0 else -1.0
    scale_n = sign / math.sqrt(norm)
    state._scale_left *= scale_n
    state._scale_right *= scale_n

    npts = max(4000, 400 * (n + 1))
    state.nodes = locate_nodes(state.psi, t_lo - 0.5 * (t_hi - t_lo), t_hi + 0.5 * (t_hi - t_lo), num=npts)
    if len(state.nodes) != n:
        raise EigenstateError(f"node count mismatch: found {len(state.nodes)}, expected {n}")
    return state


def turning_points_safe(potential, energy):
    from .semiclassical import turning_points

    return turning_points(potential, energy)


# ---------------------------------------------------------------------------
# Inverse map
# ---------------------------------------------------------------------------


def regularized_ratio(num, den, x, nodes, width):
    """num(x)/den(x) with values near the zeros of ``den`` continued smoothly.

    Within ``width`` of a node the ratio is replaced by the cubic through
    its values at node +- width, node +- 2 width.
    """
    x = np.asarray(x, dtype=float)
    out = np.asarray(num(x) / np.where(den(x) == 0.0, np.nan, den(x)), dtype=float)
    out = np.atleast_1d(out).copy()
    xf = np.atleast_1d(x)
    for z in nodes:
        near = np.abs(xf - z) < width
        if not np.any(near):
            continue
        knots = z + width * np.array([-2.0, -1.0, 1.0, 2.0])
        vals = num(knots) / den(knots)
        coef = np.polyfit(knots - z, vals, 3)
        out[near] = np.polyval(coef, xf[near] - z)
    out = out.reshape(np.shape(x))
    return out if out.ndim else float(out)


def classify_node(psi, node: float, d2psi=None, dpsi=None, h: float = 1e-3, rtol: float = 1e-6) -> str:
    """'type-one' if psi'' vanishes with psi at ``node`` (finite quantum potential), else 'type-two'."""
    if d2psi is None:
        d2 = (-psi(node + 2 * h) + 16 * psi(node + h) - 30 * psi(node) + 16 * psi(node - h)
              - psi(node - 2 * h)) / (12 * h * h)
    else:
        d2 = d2psi(node)
    if dpsi is None:
        d1 = (psi(node - 2 * h) - 8 * psi(node - h) + 8 * psi(node + h) - psi(node + 2 * h)) / (12 * h)
    else:
        d1 = dpsi(node)
    # psi'' measured against psi'/h, the size it would have for a generic zero
    return "type-one" if abs(d2) <= rtol * max(abs(d1) / h, 1.0) else "type-two"


def inverse_potential(psi, energy: float, grid, mass: float = 1.0, hbar: float = 1.0,
                      d2psi=None, node_search=None, label: str = "inverse") -> Potential:
    """Potential V0 having ``psi`` as an eigenstate of energy ``energy``.

    V0(x) = E0 + (hbar^2 / 2m) psi''/psi, tabulated on ``grid``.  Type-one
    nodes are bridged by continuation; type-two nodes make V0 singular and
    raise :class:`SingularPotentialError`.
    """
    grid = np.asarray(grid, dtype=float)
    h = 1e-3 * (grid[-1] - grid[0]) / 10.0
    if d2psi is None:
        def d2psi(x):
            return (-psi(x + 2 * h) + 16 * psi(x + h) - 30 * psi(x) + 16 * psi(x - h)
                    - psi(x - 2 * h)) / (12 * h * h)
    lo, hi = node_search if node_search is not None else (grid[0], grid[-1])
    nodes = locate_nodes(psi, lo, hi, num=max(4001, 4 * grid.size))
    bad = [z for z in nodes if classify_node(psi, z, d2psi=d2psi, h=h) == "type-two"]
    if bad:
        raise SingularPotentialError(
            f"type-two nodes at {', '.join(f'{z:.6g}' for z in bad)}: inverse potential is singular",
            bad)
    width = 1e-3 * max(1.0, (hi - lo) / 100.0)
    ratio = regularized_ratio(d2psi, psi, grid, nodes, width)
    v0 = energy + hbar ** 2 / (2.0 * mass) * ratio
    return pots.tabulated(grid, v0, mass=mass, hbar=hbar, label=label)
