import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bipolarqt import bipolar as bp
from bipolarqt import eigenstates as eig
from bipolarqt import potentials as pots

F_SC = 1.0 / (2.0 * math.pi)


def _erfi(x):
    return np.array([float(mpmath.erfi(v)) for v in np.atleast_1d(x)])


def _ground_oracle(x, flux=F_SC, x0=0.0):
    """s, r, p of the ground state from T = 2 pi F (erfi x - erfi x0)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = 2.0 * math.pi * flux * (_erfi(x) - _erfi(x0)[0])
    rho = np.exp(-x * x) / math.sqrt(math.pi)
    d = rho * (1.0 + t * t)
    return np.arctan(t), 0.5 * np.sqrt(d), 4.0 * flux / d


def test_ground_state_action_is_arctan_erfi(ho_decomps):
    d = ho_decomps[0]
    xs = np.linspace(-4, 4, 161)
    s, r, p = _ground_oracle(xs)
    np.testing.assert_allclose(d.action(xs), s, atol=1e-13)
    np.testing.assert_allclose(d.amplitude(xs), r, rtol=1e-12)
    np.testing.assert_allclose(d.momentum(xs), p, rtol=1e-12)


def test_ground_state_reference_values(ho_decomps):
    d = ho_decomps[0]
    assert d.method == "analytic" and d.x0 == pytest.approx(0.0, abs=1e-14)
    assert d.flux == pytest.approx(F_SC, rel=1e-9)
    assert d.amplitude(0.0) == pytest.approx(0.375563, abs=5e-7)
    assert d.momentum(0.0) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-9)
    assert d.momentum(1.0) == pytest.approx(0.8234, abs=5e-4)
    assert d.quantum_potential(0.0) == pytest.approx(0.5 - 2 / math.pi, abs=1e-9)
    assert d.quantum_potential(0.0) == pytest.approx(-0.137, abs=5e-4)


@pytest.mark.parametrize("flux,x0", [(0.05, 0.0), (0.3, -0.4), (F_SC, 0.8)])
def test_ground_state_generic_parameters(flux, x0):
    d = bp.decompose(eig.ho_eigenstate(0), flux=flux, x0=x0)
    xs = np.linspace(-3, 3, 61)
    s, r, p = _ground_oracle(xs, flux, x0)
    np.testing.assert_allclose(d.action(xs), s, atol=1e-12)
    np.testing.assert_allclose(d.momentum(xs), p, rtol=1e-11)
    assert d.action(x0) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10])
def test_quantization(ho_decomps, n):
    delta_s, j = ho_decomps[n].total_action()
    assert delta_s == pytest.approx(math.pi * (n + 1), abs=1e-8)
    assert j == pytest.approx(2 * math.pi * (n + 1), abs=1e-8)


@pytest.mark.parametrize("n", range(1, 11))
def test_closed_form_tables_solve_wronskian_identity(n):
    x = sp.symbols("x")
    f = sum(sp.Integer(c) * x ** k for k, c in enumerate(bp.HO_F_COEFFS[n]))
    g = sum(sp.Integer(c) * x ** k for k, c in enumerate(bp.HO_G_COEFFS[n]))
    tan_n = sp.exp(x ** 2) * f / (sp.sqrt(sp.pi) * g) + sp.erfi(x)
    hn = sp.hermite(n, x)
    target = 2 * 2 ** n * sp.factorial(n) * sp.exp(x ** 2) / (sp.sqrt(sp.pi) * hn ** 2)
    residual = (sp.diff(tan_n, x) - target) * sp.sqrt(sp.pi) * sp.exp(-x ** 2) * g ** 2 * hn ** 2
    assert sp.expand(sp.simplify(residual)) == 0
    # the tangent must also be odd in x, which fixes the constant of integration
    assert sp.simplify(f.subs(x, -x) / g.subs(x, -x) + f / g) == 0


def test_tables_tenth_state():
    tab = bp.HoActionTables()
    assert tab.f[10] == [0, 5790, 0, -10560, 0, 4704, 0, -704, 0, 32]
    assert tab.g[10] == [945, 0, -9450, 0, 12600, 0, -5040, 0, 720, 0, -32]
    assert tab.g_poly(10).degree() == 10 and sorted(tab.f) == list(range(1, 11))


@pytest.mark.parametrize("n,a,b", [(2, 0.1, 0.6), (2, 0.9, 3.0), (3, 1.5, 2.2), (7, 2.8, 3.6)])
def test_closed_form_against_mpmath(n, a, b):
    # node-free intervals, so dT/dx = (2/pi)/phi_n^2 integrates without a principal value
    mpmath.mp.dps = 40
    try:
        norm2 = 2 ** n * mpmath.factorial(n) * mpmath.sqrt(mpmath.pi)
        integrand = lambda t: norm2 / (mpmath.hermite(n, t) ** 2 * mpmath.exp(-t * t))
        ref = float(2 / mpmath.pi * mpmath.quad(integrand, [a, b]))
    finally:
        mpmath.mp.dps = 15
    got = bp.ho_tangent_natural(n, b) - bp.ho_tangent_natural(n, a)
    assert got == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n", range(1, 11))
def test_analytic_action_matches_quadrature(n):
    xs = np.linspace(-5, 5, 201)
    quad = bp.decompose(eig.ho_eigenstate(n), flux=F_SC, x0=0.0, method="quadrature")
    assert np.max(np.abs(bp.ho_action_analytic(n, xs) - quad.action(xs))) <= 1e-8


@pytest.mark.parametrize("n", [0, 2, 4])
def test_even_states_paths_agree(ho_decomps, n):
    xs = np.linspace(-4, 4, 161)
    quad = bp.decompose(eig.ho_eigenstate(n), method="quadrature")
    np.testing.assert_allclose(quad.action(xs), ho_decomps[n].action(xs), atol=1e-8)
    np.testing.assert_allclose(quad.momentum(xs), ho_decomps[n].momentum(xs), rtol=1e-7)


def test_affine_structure_in_flux_and_median():
    state = eig.ho_eigenstate(2)
    base = bp.decompose(state, flux=0.2, x0=0.0)
    other = bp.decompose(state, flux=0.35, x0=0.3)
    xs = np.array([-2.0, -0.2, 0.5, 1.7])
    expected = 0.35 / 0.2 * (np.asarray(base.tangent(xs)) - base.tangent(0.3))
    np.testing.assert_allclose(other.tangent(xs), expected, rtol=1e-9)


def test_small_flux_tends_to_unipolar():
    state = eig.ho_eigenstate(2)
    d = bp.decompose(state, flux=1e-6, x0=0.0, trunc_tol=1e-3)
    xs = np.linspace(-3, 3, 121)
    assert np.max(np.abs(2 * np.asarray(d.amplitude(xs)) - np.abs(state.psi(xs)))) <= 1e-3


@pytest.mark.parametrize("n", [0, 3, 6, 9])
def test_symmetry_about_origin(ho_decomps, n):
    d = ho_decomps[n]
    xs = np.linspace(0.01, 4.5, 100)
    np.testing.assert_allclose(d.action(-xs), -np.asarray(d.action(xs)), atol=1e-10)
    np.testing.assert_allclose(d.amplitude(-xs), d.amplitude(xs), rtol=1e-10)


@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_phase_at_nodes_is_multiple_of_half_pi(ho_decomps, n):
    d = ho_decomps[n]
    k = np.asarray(d.phase(d.nodes)) / (0.5 * math.pi)
    np.testing.assert_allclose(k, np.round(k), atol=1e-9)
    # psi = 2 r cos(theta - delta) vanishes exactly there
    assert np.all(np.abs(np.cos(np.asarray(d.phase(d.nodes)) - d.delta)) < 1e-9)


def test_phase_monotone_and_bounded(ho_decomps):
    d = ho_decomps[10]
    g = d.grid(3001)
    s = np.asarray(d.action(g))
    assert np.all(np.diff(s) > 0)
    assert s[-1] - s[0] < 11 * math.pi


def test_floyd_identity_and_sensitivity(ho_decomps):
    d = ho_decomps[0]
    ok, dev = bp.floyd_consistency_check(d)
    assert ok and dev <= 1e-9
    a, b, c = bp.floyd_parameters(d)
    assert a == b == pytest.approx(math.pi / math.sqrt(2)) and c == 0
    _, dev_bad = bp.floyd_consistency_check(d, a=1.01 * a)
    assert dev_bad > 1e-3


@pytest.mark.parametrize("n", [1, 3, 5])
def test_odd_states_cauchy_symmetric(ho_decomps, n):
    c = ho_decomps[n].cauchy_residual()
    assert abs(c["residual"]) <= 1e-8 and abs(c["residual_half"]) <= 1e-8
    q = bp.decompose(eig.ho_eigenstate(n), method="quadrature")
    assert abs(q.cauchy_residual()["residual"]) <= 1e-8
    with pytest.raises(bp.DecompositionError):
        ho_decomps[0].cauchy_residual()


def test_branch_offset_changes_odd_decomposition():
    state = eig.ho_eigenstate(1)
    a = bp.decompose(state, method="quadrature")
    b = bp.decompose(state, method="quadrature", branch_offset=0.3)
    assert abs(a.momentum(0.5) - b.momentum(0.5)) > 1e-3
    xs = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(b.reconstruct(xs), state.psi(xs), atol=1e-8)
    assert b.total_action()[1] == pytest.approx(4 * math.pi, abs=1e-5)


def test_momentum_derivatives_and_qshje(ho_decomps, morse4_decomp):
    for d in (ho_decomps[3], morse4_decomp):
        x = float(d.x0) + 0.21
        p, dp, d2p = d.momentum_derivatives(x)
        h = 1e-4
        fd1 = (d.momentum(x + h) - d.momentum(x - h)) / (2 * h)
        fd2 = (d.momentum(x + h) - 2 * p + d.momentum(x - h)) / h ** 2
        assert dp == pytest.approx(fd1, rel=1e-6, abs=1e-8)
        assert d2p == pytest.approx(fd2, rel=1e-4, abs=1e-5)
        assert d.modified_force(x) == pytest.approx(p * dp, rel=1e-12)
        assert d.quantum_potential_from_p(x) == pytest.approx(d.quantum_potential(x), abs=1e-6)


def test_flux_and_components(ho_decomps):
    d = ho_decomps[4]
    g = d.grid(801)
    np.testing.assert_allclose(d.flux_profile(g).y, d.flux, rtol=1e-10)
    plus, minus = d.components(g)
    np.testing.assert_allclose((plus + minus).real, d.state.psi(g), atol=1e-10 * max(1, np.max(d.amplitude(g))))
    np.testing.assert_allclose(np.abs(plus), d.amplitude(g), rtol=1e-14)


def test_morse_decomposition(morse4_decomp, morse4):
    d = morse4_decomp
    assert d.method == "quadrature" and d.n == 4
    assert d.total_action()[1] == pytest.approx(10 * math.pi, abs=1e-5)
    g = d.grid(1201)
    r = np.asarray(d.amplitude(g))
    assert np.max(np.abs(d.reconstruct(g) - morse4.psi(g)) / np.maximum(1, 2 * r)) <= 1e-6
    assert np.max(np.abs(d.flux_profile(g).y / d.flux - 1)) <= 1e-6


def test_parameter_errors():
    with pytest.raises(bp.DecompositionError):
        bp.decompose(eig.ho_eigenstate(2), x0=1 / math.sqrt(2))
    with pytest.raises(bp.DecompositionError):
        bp.decompose(eig.ho_eigenstate(0), flux=0.0)
    with pytest.raises(bp.DecompositionError):
        bp.decompose(eig.ho_eigenstate(0), flux=-1.0)
    with pytest.raises(bp.DecompositionError):
        bp.decompose(eig.ho_eigenstate(0), method="spline")
    with pytest.raises(bp.DecompositionError):
        bp.decompose(eig.ho_eigenstate(3), x0=1.2, method="analytic")
    with pytest.raises(ValueError):
        bp.ho_action_analytic(11, 0.0)


def test_microstate_scan_ground_state():
    state = eig.ho_eigenstate(0)
    fluxes = [0.5 * F_SC, F_SC, 2 * F_SC]
    for d in bp.microstate_scan(state, fluxes, [0.0]):
        assert d.total_action()[1] == pytest.approx(2 * math.pi, abs=1e-8)
    xs = np.linspace(-4, 4, 161)
    for d in bp.microstate_scan(state, [F_SC], [-0.5, 0.0, 0.5]):
        assert np.max(np.abs(d.reconstruct(xs) - state.psi(xs))) <= 1e-8


def test_metadata_contents(ho_decomps):
    meta = ho_decomps[10].metadata()
    for key in ("n", "E", "F", "x0", "anchor", "window", "truncation_radius", "method", "closed_form_range"):
        assert key in meta
    assert "branch_offset" in ho_decomps[1].metadata()


@given(st.floats(0.02, 1.0), st.floats(-1.0, 1.0))
@settings(max_examples=15, deadline=None)
def test_ground_state_random_parameters(flux, x0):
    d = bp.decompose(eig.ho_eigenstate(0), flux=flux, x0=x0)
    xs = np.linspace(-2.5, 2.5, 41)
    s, _, p = _ground_oracle(xs, flux, x0)
    np.testing.assert_allclose(d.action(xs), s, atol=1e-11)
    np.testing.assert_allclose(d.flux_profile(xs).y, flux, rtol=1e-10)
    assert d.total_action()[1] == pytest.approx(2 * math.pi, abs=1e-8)
