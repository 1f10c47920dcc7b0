"""Potential models: harmonic, Morse and tabulated, with analytic derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import CurveTable


@dataclass(frozen=True)
class Potential:
    """A one-dimensional potential together with the particle mass and hbar.

    ``kind`` selects the parameter set:

    * ``harmonic``: ``k`` (force constant); V = k x^2 / 2
    * ``morse``: ``depth`` D, ``alpha`` and ``x_eq``; V = D (1 - exp(-alpha (x - x_eq)))^2
    * ``tabulated``: ``table``, a :class:`CurveTable` of V on a grid
    """

    kind: str
    mass: float = 1.0
    hbar: float = 1.0
    k: float = 1.0
    depth: float = 0.0
    alpha: float = 1.0
    x_eq: float = 0.0
    table: Optional[CurveTable] = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.mass <= 0 or self.hbar <= 0:
            raise ValueError("mass and hbar must be positive")
        if self.kind == "harmonic":
            if self.k <= 0:
                raise ValueError("harmonic force constant must be positive")
        elif self.kind == "morse":
            if self.depth <= 0 or self.alpha <= 0:
                raise ValueError("Morse depth and range parameter must be positive")
        elif self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated potential needs a table")
            if not np.all(np.isfinite(self.table.y)):
                raise ValueError("tabulated potential has non-finite values")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def omega(self) -> float:
        """Harmonic angular frequency; for Morse, that of the well bottom."""
        if self.kind == "harmonic":
            return math.sqrt(self.k / self.mass)
        if self.kind == "morse":
            return self.alpha * math.sqrt(2.0 * self.depth / self.mass)
        raise ValueError("no characteristic frequency for a tabulated potential")

    def evaluate(self, x):
        """Return ``(V(x), V'(x))``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "harmonic":
            v, dv = 0.5 * self.k * x * x, self.k * x
        elif self.kind == "morse":
            e = np.exp(-self.alpha * (x - self.x_eq))
            v = self.depth * (1.0 - e) ** 2
            dv = 2.0 * self.depth * self.alpha * e * (1.0 - e)
        else:
            v, dv = self.table(x), self.table(x, 1)
        return _scalar(v), _scalar(dv)

    def __call__(self, x):
        return self.evaluate(x)[0]

    def derivative(self, x):
        return self.evaluate(x)[1]

    def curvature(self, x):
        """V''(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "harmonic":
            out = np.full_like(x, self.k)
        elif self.kind == "morse":
            e = np.exp(-self.alpha * (x - self.x_eq))
            out = 2.0 * self.depth * self.alpha ** 2 * e * (2.0 * e - 1.0)
        else:
            out = self.table(x, 2)
        return _scalar(out)

    def taylor(self, x0: float, order: int) -> np.ndarray:
        """Taylor coefficients V^(j)(x0) / j!, j = 0..order."""
        out = np.zeros(order + 1)
        if self.kind == "harmonic":
            for j, c in enumerate((0.5 * self.k * x0 * x0, self.k * x0, 0.5 * self.k)):
                if j <= order:
                    out[j] = c
        elif self.kind == "morse":
            e0 = math.exp(-self.alpha * (x0 - self.x_eq))
            out[0] = self.depth
            for j in range(order + 1):
                f = math.factorial(j)
                out[j] += self.depth * (-2.0 * e0 * (-self.alpha) ** j + e0 * e0 * (-2.0 * self.alpha) ** j) / f
        else:
            # the spline only carries a few derivatives
            for j in range(min(order, self.table.degree) + 1):
                out[j] = float(self.table(x0, j)) / math.factorial(j)
        return out

    def minimum(self):
        """Location and value of the well bottom."""
        if self.kind == "harmonic":
            return 0.0, 0.0
        if self.kind == "morse":
            return self.x_eq, 0.0
        i = int(np.argmin(self.table.y))
        return float(self.table.x[i]), float(self.table.y[i])

    def length_scale(self) -> float:
        """A rough width of the low-lying states, used to seed searches."""
        if self.kind == "tabulated":
            lo, hi = self.table.span
            return 0.05 * (hi - lo)
        return math.sqrt(self.hbar / (self.mass * self.omega))

    def search_interval(self):
        """Interval within which the potential may be evaluated safely."""
        if self.kind == "tabulated":
            return self.table.span
        if self.kind == "harmonic":
            return -math.inf, math.inf
        # exp(2 alpha |x|) overflows far to the left of the wall
        return self.x_eq - 300.0 / self.alpha, math.inf

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "mass": self.mass, "hbar": self.hbar}
        if self.kind == "harmonic":
            meta["k"] = self.k
        elif self.kind == "morse":
            meta.update(depth=self.depth, alpha=self.alpha, x_eq=self.x_eq,
                        bound_states=morse_bound_count(self))
        else:
            meta["table_span"] = list(self.table.span)
        if self.label:
            meta["label"] = self.label
        return meta


def _scalar(a):
    a = np.asarray(a)
    return a if a.ndim else float(a)


def harmonic(k: float = 1.0, mass: float = 1.0, hbar: float = 1.0) -> Potential:
    return Potential("harmonic", mass=mass, hbar=hbar, k=k)


def morse(depth: float = 200.0, alpha: float = 1.0, x_eq: float = 0.0, mass: float = 1.0,
          hbar: float = 1.0) -> Potential:
    # D=200, alpha=1 holds exactly twenty bound states (lambda = 20)
    return Potential("morse", mass=mass, hbar=hbar, depth=depth, alpha=alpha, x_eq=x_eq)


def tabulated(x, v, mass: float = 1.0, hbar: float = 1.0, label: str = "") -> Potential:
    return Potential("tabulated", mass=mass, hbar=hbar, table=CurveTable(x, v), label=label)


def morse_lambda(potential: Potential) -> float:
    if potential.kind != "morse":
        raise ValueError("morse_lambda needs a Morse potential")
    return math.sqrt(2.0 * potential.mass * potential.depth) / (potential.alpha * potential.hbar)


def morse_bound_count(potential: Potential) -> int:
    """Number of bound Morse levels, floor(lambda - 1/2) + 1 (zero if lambda < 1/2)."""
    lam = morse_lambda(potential)
    return max(0, math.floor(lam - 0.5) + 1)


def morse_energy(potential: Potential, n: int) -> float:
    """Exact Morse level E_n = hbar w0 (n + 1/2) - (hbar w0 (n + 1/2))^2 / 4D."""
    if not 0 <= n < morse_bound_count(potential):
        raise ValueError(f"Morse potential has no bound level n={n}")
    hw = potential.hbar * potential.omega * (n + 0.5)
    return hw - hw * hw / (4.0 * potential.depth)
