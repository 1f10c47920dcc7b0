"""
Invariant suite shared by the library, the CLI report and meta.json.

Each check returns a :class:`CheckResult` with the measured residual and the
tolerance it was held to.  Checks that do not apply to a given state (for
instance the symmetry test on an asymmetric potential) are left out rather
than reported as passing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import semiclassical as sc
from .bipolar import BipolarDecomposition, floyd_consistency_check
from .unipolar import unipolar_of

__all__ = ["CheckResult", "run_checks", "meta_flags", "tolerances", "all_passed"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def tolerances(decomp: BipolarDecomposition) -> dict:
    """Tolerances for the closed-form path and the quadrature path."""
    analytic = decomp.method == "analytic"
    return {
        "flux": 1e-8 if analytic else 1e-6,
        "quantization": 1e-6 if analytic else 1e-5,
        "reconstruct": 1e-10 if analytic else 1e-6,
        "qshje": 1e-5,
        "symmetry": 1e-10,
        "cauchy": 1e-8,
        "residual": 1e-6,
        "unipolar": 1e-8 if decomp.state.potential.kind == "harmonic" else 1e-5,
        "floyd": 1e-9,
    }


def _check(name, value, tol, detail="", strict=False):
    value = float(value)
    ok = value < tol if strict else value <= tol
    return CheckResult(name, bool(math.isfinite(value) and ok), value, tol, detail)


def _allowed_grid(decomp, num):
    st = decomp.state
    x_lo, x_hi = sc.turning_points(st.potential, st.energy)
    return sc.semiclassical_data(st.potential, st.energy), np.linspace(x_lo, x_hi, num)


def run_checks(decomp: BipolarDecomposition, grid=None, grid_points: int = 2001) -> list:
    """Evaluate every applicable invariant of a decomposition."""
    st = decomp.state
    tol = tolerances(decomp)
    if grid is None:
        grid = decomp.grid(grid_points)
    grid = np.asarray(grid, dtype=float)
    out = []

    # flux and quantization
    j = decomp.flux_profile(grid).y
    out.append(_check("flux", np.max(np.abs(j / decomp.flux - 1.0)), tol["flux"]))
    delta_s, _ = decomp.total_action()
    target = 2.0 * math.pi * st.hbar * (st.n + 1)
    out.append(_check("quantization", abs(2.0 * delta_s - target), tol["quantization"],
                      f"2 delta_s = {2.0 * delta_s!r}, expected {target!r}"))

    # sign conditions; the value is the worst point, negated where the condition is a lower bound
    q = np.asarray(decomp.quantum_potential(grid))
    out.append(_check("q_negative", q.max(), 0.0, strict=True))
    data, inner = _allowed_grid(decomp, max(grid_points, 201))
    gap = np.asarray(decomp.momentum(inner)) - np.asarray(data.p_sc(inner))
    out.append(_check("enclosure", -gap.min(), 0.0))
    p = np.asarray(decomp.momentum(grid))
    r = np.asarray(decomp.amplitude(grid))
    s = np.asarray(decomp.action(grid))
    out.append(_check("momentum_positive", -p.min(), 0.0, strict=True))
    out.append(_check("amplitude_positive", -r.min(), 0.0, strict=True))
    out.append(_check("action_increasing", -np.diff(s).min(), 0.0, strict=True))

    # consistency with the input state
    # measured against the local size 2r of the components, which grows without bound in the tails
    rec = np.asarray(decomp.reconstruct(grid)) - np.asarray(st.psi(grid))
    out.append(_check("reconstruct", np.max(np.abs(rec) / np.maximum(1.0, 2.0 * r)), tol["reconstruct"]))
    # the difference formula needs a margin to stay inside the window
    lo, hi = decomp.window
    margin = 0.01 * (hi - lo)
    inside = grid[(grid > lo + margin) & (grid < hi - margin)]
    dq = np.asarray(decomp.quantum_potential_from_p(inside)) - np.asarray(decomp.quantum_potential(inside))
    out.append(_check("qshje", np.max(np.abs(dq)), tol["qshje"]))
    out.append(_check("eigenstate_residual", np.max(np.abs(st.residual(inside))), tol["residual"]))

    if decomp.odd:
        c = decomp.cauchy_residual()
        out.append(_check("cauchy", max(abs(c["residual"]), abs(c["residual_half"])), tol["cauchy"],
                          f"node {c['node']!r}, eps {c['eps']!r}"))
    if st.potential.kind == "harmonic" and abs(decomp.x0) < 1e-12:
        g = inside[inside > 0]
        s_plus, s_minus = np.asarray(decomp.action(g)), np.asarray(decomp.action(-g))
        r_plus, r_minus = np.asarray(decomp.amplitude(g)), np.asarray(decomp.amplitude(-g))
        dev = max(np.max(np.abs(s_plus + s_minus)), np.max(np.abs(r_plus - r_minus)))
        out.append(_check("symmetry", dev, tol["symmetry"]))

    uni = unipolar_of(st)
    x_lo, x_hi = data.x_min, data.x_max
    pad = 0.5 * (x_hi - x_lo)
    ugrid = np.linspace(max(x_lo - pad, lo), min(x_hi + pad, hi), 2001)
    out.append(_check("unipolar_identity", np.max(np.abs(uni.modified_potential(ugrid) - st.energy)),
                      tol["unipolar"], "node types: " + ",".join(uni.node_types)))

    if st.potential.kind == "harmonic" and st.n == 0:
        _, dev = floyd_consistency_check(decomp, grid)
        out.append(_check("floyd", dev, tol["floyd"]))
    return out


def meta_flags(results) -> dict:
    """The four headline flags stored in meta.json."""
    by_name = {c.name: c.passed for c in results}
    return {
        "flux_ok": by_name["flux"],
        "quantization_ok": by_name["quantization"],
        "q_negative_ok": by_name["q_negative"],
        "enclosure_ok": by_name["enclosure"],
    }


def all_passed(results) -> bool:
    return all(c.passed for c in results)
