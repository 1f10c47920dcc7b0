import math

import numpy as np
import pytest
import sympy as sp

from bipolarqt import eigenstates as eig
from bipolarqt import potentials as pots
from bipolarqt.numerics import hermite_roots, integrate_adaptive, QuadratureSpec

SPEC = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12)


def _norm(state, lo, hi):
    return integrate_adaptive(lambda x: np.asarray(state.psi(x)) ** 2, lo, hi, SPEC)


def test_ground_state_value():
    assert eig.ho_eigenstate(0).psi(0.0) == pytest.approx(math.pi ** -0.25, rel=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10])
def test_ho_normalization_residual_nodes(n):
    st = eig.ho_eigenstate(n)
    assert st.energy == n + 0.5
    assert _norm(st, -12, 12) == pytest.approx(1.0, abs=1e-8)
    xs = np.linspace(-6, 6, 601)
    assert np.max(st.residual(xs)) <= 1e-8 * np.max(np.abs(st.psi(xs)))
    assert st.nodes.size == n
    np.testing.assert_allclose(st.nodes, hermite_roots(n), atol=1e-14)


def test_ho_small_node_sets():
    assert eig.ho_eigenstate(0).nodes.size == 0
    np.testing.assert_allclose(eig.ho_eigenstate(1).nodes, [0.0], atol=0)
    np.testing.assert_allclose(eig.ho_eigenstate(2).nodes, [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)


def test_ho_nonnatural_units_scale():
    st = eig.ho_eigenstate(3, mass=2.0, omega=0.5, hbar=1.5)
    assert st.energy == pytest.approx(1.5 * 0.5 * 3.5)
    alpha = math.sqrt(2.0 * 0.5 / 1.5)
    np.testing.assert_allclose(st.nodes, hermite_roots(3) / alpha, atol=1e-14)
    assert _norm(st, -15, 15) == pytest.approx(1.0, abs=1e-8)


def test_ho_derivatives_against_sympy():
    x = sp.symbols("x")
    n = 5
    psi = sp.hermite(n, x) * sp.exp(-x ** 2 / 2) / sp.sqrt(2 ** n * sp.factorial(n) * sp.sqrt(sp.pi))
    st = eig.ho_eigenstate(n)
    for k, method in enumerate((st.psi, st.dpsi, st.d2psi)):
        f = sp.lambdify(x, sp.diff(psi, x, k), "numpy")
        xs = np.linspace(-4, 4, 17)
        np.testing.assert_allclose(method(xs), f(xs), atol=1e-13)


def test_locate_nodes_matches_hermite_roots():
    st = eig.ho_eigenstate(10)
    nodes = eig.locate_nodes(st.psi, -6, 6, dpsi=st.dpsi)
    assert nodes.size == 10
    np.testing.assert_allclose(nodes, hermite_roots(10), atol=1e-12)
    np.testing.assert_allclose(nodes, -nodes[::-1], atol=1e-12)
    assert eig.locate_nodes(eig.ho_eigenstate(0).psi, -6, 6).size == 0


def test_morse_closed_form(morse4, morse_pot):
    assert morse4.energy == pytest.approx(79.875, abs=1e-12)
    assert morse4.nodes.size == 4
    lo, hi = -1.5, 3.0
    assert _norm(morse4, lo, hi) == pytest.approx(1.0, abs=1e-8)
    xs = np.linspace(-0.6, 1.5, 401)
    assert np.max(morse4.residual(xs)) <= 1e-8 * np.max(np.abs(morse4.psi(xs)))


def test_generic_solver_harmonic():
    st = eig.solve_generic(pots.harmonic(), n=3)
    assert st.energy == pytest.approx(3.5, abs=1e-8)
    assert st.nodes.size == 3
    ref = eig.ho_eigenstate(3)
    xs = np.linspace(-4, 4, 81)
    np.testing.assert_allclose(st.psi(xs), ref.psi(xs) * np.sign(st.psi(5.0) * ref.psi(5.0)), atol=1e-8)


def test_generic_solver_morse(morse4_numeric, morse4):
    assert morse4_numeric.energy == pytest.approx(79.875, rel=1e-10)
    assert morse4_numeric.nodes.size == 4
    xs = np.linspace(-0.6, 1.5, 201)
    sign = np.sign(morse4.psi(1.5) * morse4_numeric.psi(1.5))
    np.testing.assert_allclose(morse4_numeric.psi(xs), sign * morse4.psi(xs), atol=1e-8)


def test_generic_solver_energy_window():
    st = eig.solve_generic(pots.harmonic(), energy_window=(2.0, 3.0))
    assert st.n == 2 and st.energy == pytest.approx(2.5, abs=1e-8)


def test_generic_solver_errors(morse_pot):
    with pytest.raises(eig.EigenstateError):
        eig.solve_generic(morse_pot, n=25)
    with pytest.raises(ValueError):
        eig.solve_generic(morse_pot)
    with pytest.raises(Exception):
        eig.solve_generic(pots.harmonic(), energy_window=(0.6, 1.4))


def _sympy_inverse(expr):
    x = sp.symbols("x")
    return sp.lambdify(x, sp.simplify(sp.diff(expr, x, 2) / expr / 2), "numpy")


def test_inverse_potential_ground_state():
    x = sp.symbols("x")
    oracle = _sympy_inverse(sp.exp(-x ** 2 / 2))
    st = eig.ho_eigenstate(0)
    grid = np.linspace(-3, 3, 121)
    v0 = eig.inverse_potential(st.psi, 0.5, grid, d2psi=st.d2psi)
    np.testing.assert_allclose(v0(grid), 0.5 + oracle(grid), atol=1e-12)
    np.testing.assert_allclose(v0(grid), grid ** 2 / 2, atol=1e-12)


def test_inverse_potential_type_one_node():
    x = sp.symbols("x")
    oracle = _sympy_inverse(x * sp.exp(-x ** 2 / 2))
    st = eig.ho_eigenstate(1)
    grid = np.linspace(-3, 3, 121)
    v0 = eig.inverse_potential(st.psi, 1.5, grid)
    away = np.abs(grid) > 0.1
    np.testing.assert_allclose(v0(grid[away]), 1.5 + oracle(grid[away]), atol=1e-6)
    assert v0(0.0) == pytest.approx(0.0, abs=1e-6)


def test_inverse_potential_quartic_gaussian():
    x = sp.symbols("x")
    expr = sp.exp(-x ** 4)
    oracle = _sympy_inverse(expr)
    assert sp.simplify(sp.diff(expr, x, 2) / expr / 2 - (8 * x ** 6 - 6 * x ** 2)) == 0
    f = sp.lambdify(x, expr, "numpy")
    grid = np.linspace(-1.5, 1.5, 61)
    v0 = eig.inverse_potential(f, 0.0, grid)
    np.testing.assert_allclose(v0(grid), oracle(grid), atol=1e-6)


def test_inverse_potential_type_two_node():
    f = lambda x: np.asarray(x) * (1 + np.asarray(x)) * np.exp(-np.asarray(x) ** 2)
    with pytest.raises(eig.SingularPotentialError) as info:
        eig.inverse_potential(f, 0.0, np.linspace(-3, 3, 121))
    assert info.value.nodes[0] == pytest.approx(-1.0, abs=1e-10)


def test_inverse_of_generic_solution_recovers_potential(morse_pot):
    st = eig.solve_generic(morse_pot, n=2)
    grid = np.linspace(-0.4, 1.0, 141)
    v0 = eig.inverse_potential(st.psi, st.energy, grid, d2psi=st.d2psi)
    away = np.min(np.abs(grid[:, None] - st.nodes[None, :]), axis=1) > 0.02
    dev = v0(grid[away]) - morse_pot(grid[away])
    assert np.max(np.abs(dev - np.mean(dev))) <= 1e-6


def test_classify_node_examples():
    assert eig.classify_node(lambda x: x * np.exp(-x ** 2), 0.0) == "type-one"
    assert eig.classify_node(lambda x: x * (1 + x) * np.exp(-x ** 2), -1.0) == "type-two"
    st = eig.ho_eigenstate(4)
    assert all(eig.classify_node(st.psi, z, d2psi=st.d2psi, dpsi=st.dpsi) == "type-one" for z in st.nodes)


def test_describe():
    d = eig.ho_eigenstate(2).describe()
    assert d["n"] == 2 and len(d["nodes"]) == 2
