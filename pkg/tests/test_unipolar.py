import numpy as np
import pytest

from bipolarqt import eigenstates as eig
from bipolarqt import potentials as pots
from bipolarqt.trajectories import unipolar_stationarity_check
from bipolarqt.unipolar import cusp_slopes, unipolar_of


@pytest.mark.parametrize("n,q0", [(0, 0.5), (1, 1.5)])
def test_quantum_potential_at_origin(n, q0):
    uni = unipolar_of(eig.ho_eigenstate(n))
    assert float(uni.quantum_potential(0.0)) == pytest.approx(q0, abs=1e-8)


@pytest.mark.parametrize("n", [0, 1, 4, 10])
def test_modified_potential_is_energy(n):
    st = eig.ho_eigenstate(n)
    uni = unipolar_of(st)
    xs = np.linspace(-7, 7, 2801)
    assert np.max(np.abs(uni.modified_potential(xs) - st.energy)) <= 1e-8
    assert np.all(uni.phase(xs) == 0)
    np.testing.assert_array_equal(uni.amplitude(xs), st.psi(xs))


def test_morse_modified_potential(morse4):
    uni = unipolar_of(morse4)
    xs = np.linspace(-0.6, 1.6, 1001)
    assert np.max(np.abs(uni.modified_potential(xs) - morse4.energy)) <= 1e-5
    assert uni.node_types == ["type-one"] * 4


def test_node_types_and_cusps():
    st = eig.ho_eigenstate(3)
    assert unipolar_of(st).node_types == ["type-one"] * 3
    for z in st.nodes:
        left, right = cusp_slopes(st.psi, z)
        assert left * right < 0
        assert abs(abs(left) - abs(right)) <= 1e-4 * abs(right)


def test_stationary_particle():
    rep = unipolar_stationarity_check(eig.ho_eigenstate(1), x_start=0.7, t_end=50.0)
    assert rep["stationary"] and rep["max_U_minus_E"] <= 1e-8


def test_non_harmonic_uses_difference_formula(morse_pot):
    st = eig.solve_generic(morse_pot, n=1)
    uni = unipolar_of(st)
    x = 0.6
    assert float(uni.modified_force(x)) == pytest.approx(0.0, abs=1e-3)
