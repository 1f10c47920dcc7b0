"""
Bipolar decomposition of a real stationary state into two counter-propagating
components, psi = psi_+ + psi_-, each with constant probability flux.

The construction works with a second real solution psi2 = psi * T, where
T(x) = (4 m F / hbar) * int dx / psi^2 (finite part across nodes).  Then

    s   = hbar * theta,  tan(theta) = T        (n even)
                        -cot(theta) = T        (n odd)
    r   = sqrt(psi^2 + psi2^2) / 2
    p   = 4 m F / (psi^2 + psi2^2)

psi2 is smooth through the nodes of psi, which is what fixes the branch
constants of T on each inter-node interval.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import semiclassical as sc
from .eigenstates import Eigenstate, HarmonicEigenstate
from .numerics import CurveTable, QuadratureSpec, erfi, integrate_segments

# ---------------------------------------------------------------------------
# Harmonic-oscillator closed forms
# ---------------------------------------------------------------------------

# Ascending-power coefficients of f_n (numerator) and g_n (denominator) in
#     T_n(x) = exp(x^2) f_n(x) / (sqrt(pi) g_n(x)) + erfi(x),
# with dT_n/dx = (2/pi) / phi_n(x)^2 for the normalized Hermite function phi_n.
HO_F_COEFFS = {
    0: [0],
    1: [1],
    2: [0, 2],
    3: [2, 0, -2],
    4: [0, 10, 0, -4],
    5: [8, 0, -18, 0, 4],
    6: [0, 66, 0, -56, 0, 8],
    7: [48, 0, -174, 0, 80, 0, -8],
    8: [0, 558, 0, -740, 0, 216, 0, -16],
    9: [384, 0, -1950, 0, 1380, 0, -280, 0, 16],
    10: [0, 5790, 0, -10560, 0, 4704, 0, -704, 0, 32],
}
HO_G_COEFFS = {
    0: [1],
    1: [0, -1],
    2: [1, 0, -2],
    3: [0, -3, 0, 2],
    4: [3, 0, -12, 0, 4],
    5: [0, -15, 0, 20, 0, -4],
    6: [15, 0, -90, 0, 60, 0, -8],
    7: [0, -105, 0, 210, 0, -84, 0, 8],
    8: [105, 0, -840, 0, 840, 0, -224, 0, 16],
    9: [0, -945, 0, 2520, 0, -1512, 0, 288, 0, -16],
    10: [945, 0, -9450, 0, 12600, 0, -5040, 0, 720, 0, -32],
}
HO_TABLE_MAX = 10


@dataclass(frozen=True)
class HoActionTables:
    """Polynomial coefficients (ascending powers) of f_n and g_n, n = 1..10."""

    f: dict = field(default_factory=lambda: {n: HO_F_COEFFS[n] for n in range(1, 11)})
    g: dict = field(default_factory=lambda: {n: HO_G_COEFFS[n] for n in range(1, 11)})

    def f_poly(self, n):
        return np.polynomial.Polynomial(self.f[n])

    def g_poly(self, n):
        return np.polynomial.Polynomial(self.g[n])


def ho_tangent_natural(n: int, x):
    """T_n(x) = exp(x^2) f_n / (sqrt(pi) g_n) + erfi(x) in natural units."""
    if not 0 <= n <= HO_TABLE_MAX:
        raise ValueError(f"closed form available for 0 <= n <= {HO_TABLE_MAX}")
    x = np.asarray(x, dtype=float)
    f = np.polynomial.polynomial.polyval(x, HO_F_COEFFS[n])
    g = np.polynomial.polynomial.polyval(x, HO_G_COEFFS[n])
    with np.errstate(divide="ignore"):
        out = np.exp(x * x) * f / (math.sqrt(math.pi) * g) + erfi(x)
    return out if out.ndim else float(out)


class DecompositionError(ValueError):
    """Invalid input for a bipolar decomposition."""


class TruncationError(RuntimeError):
    """The action did not reach its asymptote inside the available domain."""


# ---------------------------------------------------------------------------
# Field providers: psi, psi', psi2, psi2' at arbitrary points
# ---------------------------------------------------------------------------


_SERIES_ORDER = 20
# largest tolerated rounding error of T = psi2/psi in the closed form
_CLOSED_TOL = 1e-13


def _ode_series(c0, c1, w, k2, order=_SERIES_ORDER):
    """Taylor coefficients of a solution of y'' = k2 (V - E) y about a point.

    ``w`` holds the Taylor coefficients of V - E there; missing ones are zero.
    """
    c = [c0, c1]
    for k in range(order - 1):
        acc = 0.0
        for j in range(min(k, len(w) - 1) + 1):
            acc += w[j] * c[k - j]
        c.append(k2 * acc / ((k + 1) * (k + 2)))
    return np.asarray(c)


def _series_eval(c, h):
    """Value and derivative of sum c_j h^j."""
    val = np.zeros_like(h)
    dval = np.zeros_like(h)
    for j in range(len(c) - 1, -1, -1):
        val = val * h + c[j]
    for j in range(len(c) - 1, 0, -1):
        dval = dval * h + j * c[j]
    return val, dval


def _inverse_square_regular(c):
    """Regular part of 1/psi^2 at a simple zero, psi = sum_{j>=1} c_j h^j.

    Returns coefficients of 1/psi^2 - 1/(c_1 h)^2 - b_1/h; b_1 vanishes when
    psi'' = 0 at the zero, as it does for an eigenstate.
    """
    pq = np.asarray(c[1:], dtype=float)
    m = pq.size
    rec = np.zeros(m)
    rec[0] = 1.0 / pq[0]
    for j in range(1, m):
        rec[j] = -np.dot(pq[1:j + 1], rec[j - 1::-1][:j]) / pq[0]
    sq = np.convolve(rec, rec)[:m]
    return sq[2:]


class _HarmonicFields:
    """Closed-form psi2 for harmonic-oscillator states with n <= 10.

    The two terms of the closed form cancel to about xi^(-2n) away from the
    origin.  Outside the interval where the estimated rounding error of
    T = psi2/psi stays below ``_CLOSED_TOL``, values come from the quadrature
    construction with the same kappa, anchor and branch offset.
    """

    method = "analytic"

    def __init__(self, state: HarmonicEigenstate, kappa, anchor, parity_odd, offset, anchor_node):
        pot = state.potential
        self.state = state
        self.n = state.n
        self.alpha = math.sqrt(pot.mass * pot.omega / pot.hbar)
        self.lam = kappa * math.pi / (2.0 * self.alpha ** 2)
        self.kappa = kappa
        self.offset = offset
        norm = math.pi ** -0.25 / math.sqrt(2.0 ** self.n * math.factorial(self.n))
        gamma = HO_G_COEFFS[self.n][-1] / 2.0 ** self.n
        self.pref = norm / (gamma * math.sqrt(math.pi))
        self.f = np.asarray(HO_F_COEFFS[self.n], dtype=float)
        self.df = np.polynomial.polynomial.polyder(self.f) if self.f.size > 1 else np.zeros(1)
        self.shift = 0.0 if parity_odd else float(ho_tangent_natural(self.n, self.alpha * anchor))
        self.edges = self._conditioning_edges()
        self.fallback = None
        if any(math.isfinite(e) for e in self.edges):
            self.fallback = _QuadratureFields(state, kappa, anchor, parity_odd, offset, anchor_node)

    def _closed(self, x):
        """(psi, dpsi, psi2, dpsi2, error estimate of T)."""
        x = np.asarray(x, dtype=float)
        xi = self.alpha * x
        psi = np.asarray(self.state.psi(x), dtype=float)
        dpsi = np.asarray(self.state.dpsi(x), dtype=float)
        sa = math.sqrt(self.alpha)
        e_half = np.exp(0.5 * xi * xi)
        f = np.polynomial.polynomial.polyval(xi, self.f)
        df = np.polynomial.polynomial.polyval(xi, self.df)
        phi = psi / sa
        dphi = dpsi / (sa * self.alpha)
        shifted = erfi(xi) - self.shift
        t1 = self.pref * e_half * f
        t2 = phi * shifted
        dcore = self.pref * e_half * (xi * f + df) + dphi * shifted + 2.0 / math.sqrt(math.pi) * phi * np.exp(xi * xi)
        psi2 = self.lam * sa * (t1 + t2) + self.kappa * self.offset * psi
        dpsi2 = self.lam * sa * self.alpha * dcore + self.kappa * self.offset * dpsi
        with np.errstate(divide="ignore", invalid="ignore"):
            tan = np.abs(psi2 / psi)
            err = 1e-15 * self.lam * sa * np.maximum(np.abs(t1), np.abs(t2)) / np.abs(psi) / np.maximum(1.0, tan)
        return psi, dpsi, psi2, dpsi2, err

    def _conditioning_edges(self):
        """Outermost points on either side of the origin where the closed form is trusted."""
        reach = (math.sqrt(2.0 * self.n + 1.0) + 10.0) / self.alpha
        out = []
        for sign in (-1.0, 1.0):
            xs = sign * np.linspace(0.0, reach, 8001)
            err = self._closed(xs)[4]
            # nodes give 0/0 in the estimate; they are handled by the neighbours
            bad = np.nonzero(np.isfinite(err) & (err > _CLOSED_TOL))[0]
            out.append(float(xs[max(bad[0] - 1, 0)]) if bad.size else sign * math.inf)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        psi, dpsi, psi2, dpsi2, _ = self._closed(x)
        lo, hi = self.edges
        outside = (x < lo) | (x > hi)
        if np.any(outside):
            shape = np.shape(x)
            psi2 = np.array(psi2, dtype=float, ndmin=1)
            dpsi2 = np.array(dpsi2, dtype=float, ndmin=1)
            sel = np.atleast_1d(outside)
            _, _, q2, dq2 = self.fallback(np.atleast_1d(x)[sel])
            psi2[sel] = q2
            dpsi2[sel] = dq2
            psi2, dpsi2 = psi2.reshape(shape), dpsi2.reshape(shape)
        return psi, dpsi, psi2, dpsi2

    def diagnostics(self):
        return {"closed_form_range": list(self.edges)}


class _QuadratureFields:
    """psi2 = psi * T with T from regularized adaptive quadrature of 1/psi^2.

    On every inter-node interval the double poles of 1/psi^2 at its end nodes
    are subtracted analytically; the smooth remainder is integrated from an
    interior anchor.  Branch constants follow from requiring equal finite
    parts on both sides of each node, which makes psi2 smooth there.
    """

    method = "quadrature"
    spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12, max_depth=40)

    def __init__(self, state: Eigenstate, kappa, anchor, parity_odd, offset, anchor_node):
        self.state = state
        self.kappa = kappa
        pot = state.potential
        self.k2 = state.k2
        z = np.asarray(state.nodes, dtype=float)
        self.z = z
        n = z.size
        e = state.energy
        self.a = np.array([float(state.dpsi(zk)) for zk in z])
        self.w = []
        self.psi_series = []
        self.g_series = []
        self.delta = np.zeros(n)
        for k, zk in enumerate(z):
            w = pot.taylor(zk, _SERIES_ORDER)
            w[0] -= e
            self.w.append(w)
            c = _ode_series(0.0, self.a[k], w, self.k2)
            self.psi_series.append(c)
            self.g_series.append(_inverse_square_regular(c))
            ell = 1.0 / math.sqrt(max(self.k2 * abs(w[0]), 1e-300))
            gaps = np.abs(np.delete(z, k) - zk)
            spacing = gaps.min() if gaps.size else math.inf
            # series patch: wide enough to keep roundoff in 1/psi^2 - 1/(a h)^2
            # small, narrow enough for the truncated series to be exact
            d = min(0.1 * ell, 0.3 * spacing)
            while abs(c[-1]) * d ** (c.size - 2) > 1e-17 * abs(self.a[k]):
                d *= 0.8
            self.delta[k] = d

        # interior anchors: largest |psi| on each interval
        lo, hi = self._sample_span()
        xs = np.linspace(lo, hi, 4001)
        vals = np.abs(np.asarray(state.psi(xs)))
        idx = np.searchsorted(z, xs, side="right")
        self.anchors = np.empty(n + 1)
        for i in range(n + 1):
            sel = idx == i
            self.anchors[i] = xs[sel][np.argmax(vals[sel])]
        if not parity_odd:
            self.anchors[int(np.searchsorted(z, anchor, side="right"))] = anchor

        # finite parts at both ends of every interval
        fp_left = np.full(n + 1, np.nan)
        fp_right = np.full(n + 1, np.nan)
        for i in range(n + 1):
            if i > 0:
                fp_left[i] = self._finite_part(i, i - 1)
            if i < n:
                fp_right[i] = self._finite_part(i, i)
        self.fp_left, self.fp_right = fp_left, fp_right

        const = np.zeros(n + 1)
        if parity_odd:
            k = anchor_node
            const[k + 1] = offset - fp_left[k + 1]
            const[k] = offset - fp_right[k]
            start_hi, start_lo = k + 1, k
        else:
            i0 = int(np.searchsorted(z, anchor, side="right"))
            const[i0] = 0.0
            start_hi = start_lo = i0
        for i in range(start_hi + 1, n + 1):
            const[i] = fp_right[i - 1] + const[i - 1] - fp_left[i]
        for i in range(start_lo - 1, -1, -1):
            const[i] = fp_left[i + 1] + const[i + 1] - fp_right[i]
        self.const = const
        # psi2 series at each node share the common finite part C_k
        self.node_const = np.array([fp_right[k] + const[k] for k in range(n)])
        self.psi2_series = [
            _ode_series(-kappa / self.a[k], kappa * self.a[k] * self.node_const[k], self.w[k], self.k2)
            for k in range(n)
        ]

    def _sample_span(self):
        st = self.state
        x_lo, x_hi = sc.turning_points(st.potential, st.energy)
        pad = 0.25 * (x_hi - x_lo)
        lo, hi = x_lo - pad, x_hi + pad
        if self.z.size:
            lo, hi = min(lo, self.z[0] - pad), max(hi, self.z[-1] + pad)
        s_lo, s_hi = st.support
        return max(lo, s_lo), min(hi, s_hi)

    def _ends(self, i):
        n = self.z.size
        return [k for k in (i - 1, i) if 0 <= k < n]

    def _g(self, i, t):
        """1/psi^2 with the double poles at the ends of interval i removed."""
        t = np.asarray(t, dtype=float)
        ends = self._ends(i)
        out = np.empty_like(t)
        near = np.zeros(t.shape, dtype=bool)
        for k in ends:
            h = t - self.z[k]
            m = np.abs(h) < self.delta[k]
            if np.any(m):
                hk = h[m]
                val, _ = _series_eval(self.g_series[k], hk)
                for j in ends:
                    if j != k:
                        val = val - 1.0 / (self.a[j] ** 2 * (t[m] - self.z[j]) ** 2)
                out[m] = val
                near |= m
        far = ~near
        if np.any(far):
            tf = t[far]
            val = 1.0 / np.asarray(self.state.psi(tf), dtype=float) ** 2
            for j in ends:
                val = val - 1.0 / (self.a[j] ** 2 * (tf - self.z[j]) ** 2)
            out[far] = val
        return out

    def _end_terms(self, i, x):
        xi = self.anchors[i]
        tot = 0.0
        for k in self._ends(i):
            tot = tot - 1.0 / (self.a[k] ** 2 * (x - self.z[k])) + 1.0 / (self.a[k] ** 2 * (xi - self.z[k]))
        return tot

    def _finite_part(self, i, k):
        """Finite part of G_i at its end node k."""
        xi = self.anchors[i]
        integral = float(integrate_segments(lambda t: self._g(i, t), [xi, self.z[k]], self.spec)[0])
        tot = integral + 1.0 / (self.a[k] ** 2 * (xi - self.z[k]))
        for j in self._ends(i):
            if j != k:
                tot += -1.0 / (self.a[j] ** 2 * (self.z[k] - self.z[j])) + 1.0 / (self.a[j] ** 2 * (xi - self.z[j]))
        return tot

    def G(self, i, x):
        """int_{x_i}^x dx'/psi^2 on interval i, regularized at its end nodes."""
        x = np.asarray(x, dtype=float)
        xi = self.anchors[i]
        pts, inv = np.unique(np.concatenate([x.ravel(), [xi]]), return_inverse=True)
        seg = integrate_segments(lambda t: self._g(i, t), pts, self.spec) if pts.size > 1 else np.zeros(0)
        # accumulate outward from the anchor; the tails are exponentially large
        j = inv[-1]
        cum = np.zeros(pts.size)
        cum[j + 1:] = np.cumsum(seg[j:])
        cum[:j] = -np.cumsum(seg[:j][::-1])[::-1]
        out = cum[inv[:-1]].reshape(x.shape)
        return out + self._end_terms(i, x)

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = self.z
        psi = np.empty_like(x)
        dpsi = np.empty_like(x)
        psi2 = np.empty_like(x)
        dpsi2 = np.empty_like(x)
        near = np.zeros(x.shape, dtype=bool)
        for k in range(z.size):
            h = x - z[k]
            m = np.abs(h) < self.delta[k]
            if np.any(m):
                psi[m], dpsi[m] = _series_eval(self.psi_series[k], h[m])
                psi2[m], dpsi2[m] = _series_eval(self.psi2_series[k], h[m])
                near |= m
        far = ~near
        if np.any(far):
            xf = x[far]
            idx = np.searchsorted(z, xf, side="right")
            pf = np.asarray(self.state.psi(xf), dtype=float)
            dpf = np.asarray(self.state.dpsi(xf), dtype=float)
            t = np.empty_like(xf)
            for i in np.unique(idx):
                sel = idx == i
                t[sel] = self.kappa * (self.G(int(i), xf[sel]) + self.const[i])
            psi[far], dpsi[far] = pf, dpf
            psi2[far] = pf * t
            dpsi2[far] = dpf * t + self.kappa / pf
        return psi, dpsi, psi2, dpsi2

    def diagnostics(self):
        return {"anchors": self.anchors.tolist(), "branch_constants": self.const.tolist(),
                "node_finite_parts": self.node_const.tolist()}


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


def _scalar(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return float(a)
    return a


class BipolarDecomposition:
    """Bipolar decomposition of an eigenstate for given flux F and median x0.

    The overall sign ``sigma`` of the input state is kept separately, so
    psi = sigma * 2 r cos(s/hbar - delta).
    """

    def __init__(self, state: Eigenstate, flux: float, x0: float, fields, anchor: float,
                 branch_offset: float = 0.0, trunc_tol: float = 1e-10):
        self.state = state
        self.flux = float(flux)
        self.x0 = float(x0)
        self.anchor = float(anchor)
        self.n = state.n
        self.odd = bool(state.n % 2)
        self.delta = 0.5 * math.pi if self.odd else 0.0
        self.branch_offset = float(branch_offset)
        self.kappa = 4.0 * state.mass * self.flux / state.hbar
        self._fields = fields
        self.method = fields.method
        self.nodes = np.asarray(state.nodes, dtype=float)
        if self.odd:
            self._i_ref = int(np.searchsorted(self.nodes, self.anchor, side="right"))
            self.sigma = 1.0 if state.dpsi(self.anchor) > 0 else -1.0
        else:
            self._i_ref = int(np.searchsorted(self.nodes, self.anchor, side="right"))
            self.sigma = 1.0 if state.psi(self.anchor) > 0 else -1.0
        self._near = getattr(fields, "delta", None)
        if self._near is None:
            self._near = np.full(self.nodes.size, 1e-9 * state.potential.length_scale())
        self.trunc_tol = trunc_tol
        self.window = self._find_window()

    # -- raw fields ---------------------------------------------------------

    def fields(self, x):
        """psi, psi', psi2, psi2' at x."""
        return self._fields(x)

    def _theta(self, x, psi, psi2):
        x = np.atleast_1d(x)
        idx = np.searchsorted(self.nodes, x, side="right")
        base = (idx - self._i_ref) * math.pi + (0.5 * math.pi if self.odd else 0.0)
        small = np.abs(psi2) <= np.abs(psi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tan_v = np.where(small, psi2 / psi, 0.0)
            cot_v = np.where(small, 0.0, psi / psi2)
        end = np.sign(psi2 * psi)
        # right next to a node the side decides which end of the interval we are at
        for k, zk in enumerate(self.nodes):
            m = np.abs(x - zk) < self._near[k]
            end = np.where(m & (idx == k + 1), -1.0, np.where(m & (idx == k), 1.0, end))
        end = np.where(end == 0, np.where(psi == 0, -1.0, 1.0), end)
        return np.where(small, base + np.arctan(tan_v), base + end * 0.5 * math.pi - np.arctan(cot_v))

    def tail_remainder(self, x):
        """arctan(psi/psi2): distance of s/hbar from its asymptote at x."""
        psi, _, psi2, _ = self.fields(x)
        return _scalar(np.arctan(psi / psi2).reshape(np.shape(x)))

    def _find_window(self):
        st = self.state
        x_lo, x_hi = sc.turning_points(st.potential, st.energy)
        lo = min(x_lo, self.nodes[0]) if self.nodes.size else x_lo
        hi = max(x_hi, self.nodes[-1]) if self.nodes.size else x_hi
        s_lo, s_hi = st.support
        step0 = 0.05 * (x_hi - x_lo)

        def walk(x, direction, bound):
            step = step0
            for _ in range(200):
                x_new = x + direction * step
                if (x_new - bound) * direction >= 0:
                    raise TruncationError(
                        f"action has not reached its asymptote within {self.trunc_tol} before the "
                        f"edge of the eigenstate domain at x={bound:.6g}")
                with np.errstate(over="ignore", invalid="ignore"):
                    psi, _, psi2, _ = self.fields(x_new)
                psi, psi2 = float(np.ravel(psi)[0]), float(np.ravel(psi2)[0])
                if psi == 0.0 or not (math.isfinite(psi) and math.isfinite(psi2)):
                    raise TruncationError(
                        f"the fields under- or overflow at x={x_new:.6g} before the action is within "
                        f"{self.trunc_tol} of its asymptote")
                if abs(math.atan(psi / psi2)) < self.trunc_tol:
                    return x_new
                x = x_new
                step *= 1.15
            raise TruncationError("truncation radius search did not converge")

        return walk(lo, -1.0, s_lo), walk(hi, 1.0, s_hi)

    @property
    def truncation_radius(self) -> float:
        return max(abs(self.window[0] - self.x0), abs(self.window[1] - self.x0))

    # -- observables --------------------------------------------------------

    def phase(self, x):
        """s(x)/hbar."""
        psi, _, psi2, _ = self.fields(x)
        return _scalar(self._theta(x, psi, psi2).reshape(np.shape(x)))

    def action(self, x):
        """Bipolar action s(x)."""
        return _scalar(self.state.hbar * np.asarray(self.phase(x)))

    def tangent(self, x):
        """T(x) = psi2/psi; tan(s/hbar) for even n, -cot(s/hbar) for odd n."""
        psi, _, psi2, _ = self.fields(x)
        with np.errstate(divide="ignore"):
            return _scalar((psi2 / psi).reshape(np.shape(x)))

    def _density(self, x):
        psi, dpsi, psi2, dpsi2 = self.fields(x)
        d = psi * psi + psi2 * psi2
        d1 = 2.0 * (psi * dpsi + psi2 * dpsi2)
        w = np.asarray(self.state.potential(np.atleast_1d(x)), dtype=float) - self.state.energy
        d2 = 2.0 * (dpsi * dpsi + dpsi2 * dpsi2 + self.state.k2 * w * d)
        return d, d1, d2

    def momentum(self, x):
        """p(x) = s'(x) = 4 m F / (psi^2 + psi2^2)."""
        d, _, _ = self._density(x)
        return _scalar((4.0 * self.state.mass * self.flux / d).reshape(np.shape(x)))

    def momentum_derivatives(self, x):
        """(p, p', p'') at x, from exact derivatives of psi and psi2."""
        d, d1, d2 = self._density(x)
        c = 4.0 * self.state.mass * self.flux
        p = c / d
        dp = -c * d1 / d ** 2
        d2p = c * (2.0 * d1 * d1 / d ** 3 - d2 / d ** 2)
        shape = np.shape(x)
        return _scalar(p.reshape(shape)), _scalar(dp.reshape(shape)), _scalar(d2p.reshape(shape))

    def amplitude(self, x):
        """r(x) = sqrt(m F / p(x))."""
        d, _, _ = self._density(x)
        return _scalar((0.5 * np.sqrt(d)).reshape(np.shape(x)))

    def quantum_potential(self, x):
        """q = E - V - p^2 / 2m."""
        p = np.asarray(self.momentum(x))
        v = np.asarray(self.state.potential(x))
        return _scalar(self.state.energy - v - p * p / (2.0 * self.state.mass))

    def modified_potential(self, x):
        """u = V + q = E - p^2 / 2m."""
        p = np.asarray(self.momentum(x))
        return _scalar(self.state.energy - p * p / (2.0 * self.state.mass))

    def modified_force(self, x):
        """-u'(x) = p p' / m."""
        p, dp, _ = self.momentum_derivatives(x)
        return _scalar(np.asarray(p) * np.asarray(dp) / self.state.mass)

    def quantum_potential_from_p(self, x, h=None):
        """q from (hbar^2/2m)[p''/(2p) - (3/4)(p'/p)^2], p' and p'' by 7-point central differences."""
        x = np.asarray(x, dtype=float)
        if h is None:
            h = 2e-3 * self.state.potential.length_scale()
        f = [np.asarray(self.momentum(x + k * h)) for k in range(-3, 4)]
        dp = (-f[0] + 9 * f[1] - 45 * f[2] + 45 * f[4] - 9 * f[5] + f[6]) / (60 * h)
        d2p = (2 * f[0] - 27 * f[1] + 270 * f[2] - 490 * f[3] + 270 * f[4] - 27 * f[5] + 2 * f[6]) / (180 * h * h)
        p0 = f[3]
        return _scalar(self.state.hbar ** 2 / (2.0 * self.state.mass) * (0.5 * d2p / p0 - 0.75 * (dp / p0) ** 2))

    def reconstruct(self, x):
        """sigma * 2 r cos(s/hbar - delta), which reproduces psi."""
        psi, _, psi2, _ = self.fields(x)
        theta = self._theta(x, psi, psi2)
        r = 0.5 * np.sqrt(psi * psi + psi2 * psi2)
        return _scalar((self.sigma * 2.0 * r * np.cos(theta - self.delta)).reshape(np.shape(x)))

    def components(self, x):
        """Complex psi_+ and psi_- with psi_+ + psi_- = psi."""
        psi, _, psi2, _ = self.fields(x)
        theta = self._theta(x, psi, psi2) - self.delta
        r = 0.5 * np.sqrt(psi * psi + psi2 * psi2)
        plus = self.sigma * r * np.exp(1j * theta)
        shape = np.shape(x)
        return plus.reshape(shape), np.conj(plus).reshape(shape)

    def flux_profile(self, grid) -> CurveTable:
        """j_+(x) = p r^2 / m on the grid (j_- = -j_+)."""
        grid = np.asarray(grid, dtype=float)
        p = np.asarray(self.momentum(grid))
        r = np.asarray(self.amplitude(grid))
        return CurveTable(grid, p * r * r / self.state.mass)

    # -- global quantities --------------------------------------------------

    def total_action(self):
        """(delta_s, J): s(+inf) - s(-inf) from the window ends plus tail remainders."""
        lo, hi = self.window
        rem_lo = self.tail_remainder(lo)
        rem_hi = self.tail_remainder(hi)
        if max(abs(rem_lo), abs(rem_hi)) > self.trunc_tol:
            raise TruncationError("truncation radius too small for the asymptote tolerance")
        th = np.asarray(self.phase(np.array([lo, hi])))
        delta_s = self.state.hbar * ((th[1] + rem_hi) - (th[0] + rem_lo))
        return float(delta_s), float(2.0 * delta_s)

    def cauchy_residual(self, eps=None):
        """s(z - eps) + s(z + eps) at the anchor node for eps and eps/2 (odd n only)."""
        if not self.odd:
            raise DecompositionError("the Cauchy residual applies to odd states")
        z = self.anchor
        gaps = np.abs(self.nodes - z)
        gaps = gaps[gaps > 0]
        spacing = gaps.min() if gaps.size else self.state.potential.length_scale()
        if eps is None:
            eps = 1e-4 * spacing
        out = {"node": z, "eps": eps}
        for name, e in (("residual", eps), ("residual_half", 0.5 * eps)):
            s = np.asarray(self.action(np.array([z - e, z + e])))
            out[name] = float(s[0] + s[1])
        return out

    def grid(self, num: int = 2001) -> np.ndarray:
        """Window grid with extra points clustered around nodes and turning points."""
        lo, hi = self.window
        base = np.linspace(lo, hi, num)
        st = self.state
        x_lo, x_hi = sc.turning_points(st.potential, st.energy)
        scale = (hi - lo) / max(num - 1, 1)
        offsets = scale * np.geomspace(1e-4, 1.0, 12)
        extra = [base]
        for c in list(self.nodes) + [x_lo, x_hi]:
            extra.append(c + offsets)
            extra.append(c - offsets)
        g = np.unique(np.concatenate(extra))
        return g[(g >= lo) & (g <= hi)]

    def metadata(self) -> dict:
        meta = {
            "n": self.n,
            "E": self.state.energy,
            "F": self.flux,
            "x0": self.x0,
            "anchor": self.anchor,
            "delta": self.delta,
            "sigma": self.sigma,
            "method": self.method,
            "window": list(self.window),
            "truncation_radius": self.truncation_radius,
            "potential": self.state.potential.metadata(),
        }
        if self.odd:
            meta["branch_offset"] = self.branch_offset
        meta.update(self._fields.diagnostics())
        return meta


def semiclassical_parameters(state: Eigenstate):
    """(F, x0) from the classical orbit at the exact eigenvalue."""
    data = sc.semiclassical_data(state.potential, state.energy)
    return data.flux, data.x0


def decompose(state: Eigenstate, flux: float | None = None, x0: float | None = None,
              method: str = "auto", branch_offset: float = 0.0,
              trunc_tol: float = 1e-10) -> BipolarDecomposition:
    """Bipolar decomposition of ``state`` with flux F and median x0.

    Missing F or x0 take their semiclassical values.  For odd states the
    action is anchored at the node nearest to x0, where s vanishes and the
    finite part of int dx/psi^2 equals ``branch_offset`` (zero gives the
    Cauchy-symmetric choice).  ``method`` is ``analytic`` (harmonic states
    with n <= 10), ``quadrature`` or ``auto``.
    """
    if not getattr(state, "normalized", False):
        raise DecompositionError("the eigenstate must be normalized")
    if flux is None or x0 is None:
        f_sc, x_sc = semiclassical_parameters(state)
        flux = f_sc if flux is None else flux
        x0 = x_sc if x0 is None else x0
    if not (flux > 0 and math.isfinite(flux)):
        raise DecompositionError(f"flux must be positive, got {flux}")
    nodes = np.asarray(state.nodes, dtype=float)
    odd = bool(state.n % 2)
    lo, hi = state.support
    if not lo < x0 < hi:
        raise DecompositionError(f"x0={x0} lies outside the eigenstate domain")
    if odd:
        k = int(np.argmin(np.abs(nodes - x0)))
        anchor = float(nodes[k])
    else:
        k = -1
        anchor = float(x0)
        if nodes.size and np.min(np.abs(nodes - x0)) < 1e-8 * max(1.0, abs(x0)):
            raise DecompositionError(f"x0={x0} sits on a node of an even state")
    kappa = 4.0 * state.mass * flux / state.hbar
    analytic_ok = (isinstance(state, HarmonicEigenstate) and state.n <= HO_TABLE_MAX
                   and (not odd or abs(anchor) < 1e-12))
    if method == "auto":
        method = "analytic" if analytic_ok else "quadrature"
    if method == "analytic":
        if not analytic_ok:
            raise DecompositionError("closed form needs a harmonic state with n <= 10 "
                                     "(odd states anchored at the origin)")
        fields = _HarmonicFields(state, kappa, anchor, odd, branch_offset, k)
    elif method == "quadrature":
        fields = _QuadratureFields(state, kappa, anchor, odd, branch_offset, k)
    else:
        raise DecompositionError(f"unknown method {method!r}")
    return BipolarDecomposition(state, flux, x0, fields, anchor, branch_offset, trunc_tol)


def ho_action_analytic(n: int, x):
    """s_n(x) for the harmonic oscillator in natural units, F = 1/2pi, x0 = 0."""
    from .eigenstates import ho_eigenstate

    if not 1 <= n <= HO_TABLE_MAX:
        raise ValueError(f"n must lie in 1..{HO_TABLE_MAX}")
    return decompose(ho_eigenstate(n), flux=1.0 / (2.0 * math.pi), x0=0.0, method="analytic").action(x)


def microstate_scan(state: Eigenstate, fluxes, x0s, method: str = "auto"):
    """One decomposition per (F, x0) pair of the two lists."""
    out = []
    for f, x0 in itertools.product(fluxes, x0s):
        out.append(decompose(state, flux=f, x0=x0, method=method))
    return out


def floyd_parameters(decomp: BipolarDecomposition):
    """a = b = 1/(2 F sqrt(2m)), c = 0."""
    a = 1.0 / (2.0 * decomp.flux * math.sqrt(2.0 * decomp.state.mass))
    return a, a, 0.0


def floyd_consistency_check(decomp: BipolarDecomposition, grid=None, a=None, b=None, c=None,
                            tol: float = 1e-9):
    """Compare E - 1/(a psi1^2 + b psi2^2 + c psi1 psi2)^2 with u = V + q.

    psi1 = 2 r cos(s/hbar), psi2 = 2 r sin(s/hbar).  Returns (ok, max deviation).
    """
    a0, b0, c0 = floyd_parameters(decomp)
    a = a0 if a is None else a
    b = b0 if b is None else b
    c = c0 if c is None else c
    if grid is None:
        grid = np.linspace(*decomp.window, 801)
    grid = np.asarray(grid, dtype=float)
    theta = np.asarray(decomp.phase(grid))
    r = np.asarray(decomp.amplitude(grid))
    p1 = 2.0 * r * np.cos(theta)
    p2 = 2.0 * r * np.sin(theta)
    floyd = decomp.state.energy - 1.0 / (a * p1 * p1 + b * p2 * p2 + c * p1 * p2) ** 2
    u = np.asarray(decomp.modified_potential(grid))
    dev = float(np.max(np.abs(floyd - u)))
    return dev <= tol, dev
