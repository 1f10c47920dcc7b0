"""
Classical and WKB quantities of a bound orbit: turning points, action,
frequency, flux and the median-action point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import CurveTable, QuadratureSpec, find_root, integrate_adaptive
from .potentials import Potential

_SPEC = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13)
# E - V loses digits to cancellation next to the turning points
_PERIOD_SPEC = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-11)


class TurningPointError(ValueError):
    """No single-well pair of turning points exists at this energy."""


def _outward_root(potential, energy, x_start, direction, bound):
    step = potential.length_scale() * 0.25
    x = x_start
    for _ in range(400):
        x_new = x + direction * step
        if math.isfinite(bound) and (x_new - bound) * direction > 0:
            x_new = bound
        if potential(x_new) > energy:
            return find_root(lambda t: potential(t) - energy, min(x, x_new), max(x, x_new), tol=1e-14)
        if x_new == bound:
            break
        x = x_new
        step *= 1.5
    side = "right" if direction > 0 else "left"
    raise TurningPointError(f"no {side} turning point at E={energy} (state is not bound)")


def turning_points(potential: Potential, energy: float):
    """Classical turning points (x_min, x_max) of the well containing the minimum."""
    x_bottom, v_bottom = potential.minimum()
    if energy <= v_bottom:
        raise TurningPointError(f"energy {energy} is not above the potential minimum {v_bottom}")
    if potential.kind == "harmonic":
        a = math.sqrt(2.0 * energy / potential.k)
        return -a, a
    lo, hi = potential.search_interval()
    x_lo = _outward_root(potential, energy, x_bottom, -1.0, lo)
    x_hi = _outward_root(potential, energy, x_bottom, 1.0, hi)
    # a second well inside the interval would show as V > E between the roots
    xs = np.linspace(x_lo, x_hi, 2001)[1:-1]
    if np.any(np.asarray(potential(xs)) > energy):
        raise TurningPointError("potential is not a single well at this energy")
    return x_lo, x_hi


@dataclass(frozen=True)
class _Orbit:
    potential: Potential
    energy: float
    x_min: float
    x_max: float

    @property
    def width(self):
        return self.x_max - self.x_min

    def gap(self, x):
        """E - V(x), with linearized values right next to the turning points."""
        x = np.asarray(x, dtype=float)
        g = self.energy - np.asarray(self.potential(x), dtype=float)
        tiny = 1e-6 * self.width
        for t in (self.x_min, self.x_max):
            near = np.abs(x - t) < tiny
            if np.any(near):
                d = x[near] - t
                g[near] = -self.potential.derivative(t) * d - 0.5 * self.potential.curvature(t) * d * d
        return np.maximum(g, 0.0)

    def x_of(self, theta):
        return self.x_min + self.width * np.sin(theta) ** 2

    def jac(self, theta):
        return self.width * np.sin(2.0 * theta)

    def p(self, x):
        return np.sqrt(2.0 * self.potential.mass * self.gap(x))

    def action_to(self, theta_end):
        """int_{x_min}^{x(theta_end)} p dx."""
        return integrate_adaptive(lambda th: self.p(self.x_of(th)) * self.jac(th), 0.0, theta_end, _SPEC)

    def period(self):
        m = self.potential.mass

        def f(th):
            x = np.atleast_1d(self.x_of(th))
            lo, hi = x - self.x_min, self.x_max - x
            # q = (E - V) * width / ((x - x_min)(x_max - x)) stays finite at both ends
            with np.errstate(divide="ignore", invalid="ignore"):
                q = self.gap(x) * self.width / (lo * hi)
            tiny = 1e-6 * self.width
            pot = self.potential
            near = lo < tiny
            if np.any(near):
                d = lo[near]
                q[near] = (-pot.derivative(self.x_min) - 0.5 * pot.curvature(self.x_min) * d) * self.width / hi[near]
            near = hi < tiny
            if np.any(near):
                d = -hi[near]
                q[near] = (pot.derivative(self.x_max) + 0.5 * pot.curvature(self.x_max) * d) * self.width / lo[near]
            return 2.0 * m * np.sqrt(self.width) / np.sqrt(2.0 * m * q)

        return 2.0 * integrate_adaptive(f, 0.0, 0.5 * math.pi, _PERIOD_SPEC)


def _orbit(potential, energy):
    x_min, x_max = turning_points(potential, energy)
    return _Orbit(potential, float(energy), x_min, x_max)


def enclosed_action(potential: Potential, energy: float) -> float:
    """J = 2 int p_sc dx over the classically allowed interval."""
    return 2.0 * _orbit(potential, energy).action_to(0.5 * math.pi)


def classical_period(potential: Potential, energy: float) -> float:
    return _orbit(potential, energy).period()


def classical_frequency(potential: Potential, energy: float) -> float:
    """Angular frequency 2 pi / T of the classical orbit at this energy."""
    return 2.0 * math.pi / classical_period(potential, energy)


def median_action_point(potential: Potential, energy: float) -> float:
    """Point splitting the half-orbit action int p dx into equal halves."""
    orb = _orbit(potential, energy)
    half = 0.5 * orb.action_to(0.5 * math.pi)
    theta = find_root(lambda th: orb.action_to(th) - half, 0.0, 0.5 * math.pi, tol=1e-14)
    return float(orb.x_of(theta))


@dataclass(frozen=True)
class SemiclassicalData:
    """Orbit quantities at energy E: turning points, J, omega, flux and x0."""

    potential: Potential
    energy: float
    x_min: float
    x_max: float
    action: float
    omega: float
    x0: float

    @property
    def flux(self) -> float:
        return self.omega / (2.0 * math.pi)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def p_sc(self, x):
        """Positive WKB momentum sheet; zero outside the allowed interval."""
        x = np.asarray(x, dtype=float)
        g = self.energy - np.asarray(self.potential(x), dtype=float)
        inside = (x >= self.x_min) & (x <= self.x_max)
        out = np.where(inside, np.sqrt(2.0 * self.potential.mass * np.maximum(g, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def as_dict(self) -> dict:
        return {"E": self.energy, "x_min": self.x_min, "x_max": self.x_max, "J": self.action,
                "omega": self.omega, "F": self.flux, "x0": self.x0}


def semiclassical_data(potential: Potential, energy: float) -> SemiclassicalData:
    orb = _orbit(potential, energy)
    action = 2.0 * orb.action_to(0.5 * math.pi)
    omega = 2.0 * math.pi / orb.period()
    x0 = median_action_point(potential, energy)
    return SemiclassicalData(potential, float(energy), orb.x_min, orb.x_max, action, omega, x0)


@dataclass(frozen=True)
class LMSample:
    """Both momentum sheets of the semiclassical manifold on a grid."""

    x: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    def table(self, sheet: int = 1) -> CurveTable:
        return CurveTable(self.x, self.upper if sheet > 0 else self.lower)

    def area(self) -> float:
        """Phase-space area enclosed by the two sheets (trapezoid rule)."""
        return float(np.trapezoid(self.upper - self.lower, self.x))


def sample_lm(data: SemiclassicalData, grid) -> LMSample:
    grid = np.asarray(grid, dtype=float)
    p = np.asarray(data.p_sc(grid), dtype=float)
    return LMSample(grid, p, -p)
