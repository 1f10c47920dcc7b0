"""
Unipolar reference decomposition psi = R exp(i S / hbar) of a real
stationary state: R = psi, S = 0, and the quantum potential Q = -(hbar^2/2m) R''/R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigenstates import Eigenstate, HarmonicEigenstate, classify_node, regularized_ratio

__all__ = ["UnipolarDecomposition", "unipolar_of", "classify_node", "cusp_slopes"]


def _second_derivative(state: Eigenstate):
    """psi'' independent of the Schroedinger identity where possible."""
    if isinstance(state, HarmonicEigenstate):
        return state.d2psi
    h = 1e-4 * state.potential.length_scale()

    def d2(x):
        x = np.asarray(x, dtype=float)
        return (-state.dpsi(x + 2 * h) + 8 * state.dpsi(x + h) - 8 * state.dpsi(x - h)
                + state.dpsi(x - 2 * h)) / (12 * h)

    return d2


@dataclass
class UnipolarDecomposition:
    """R = psi (signed convention), S = 0, Q and U = V + Q with node limits."""

    state: Eigenstate
    node_types: list

    def __post_init__(self):
        self._d2 = _second_derivative(self.state)
        self._width = 1e-3 * self.state.potential.length_scale()

    def amplitude(self, x):
        return self.state.psi(x)

    def phase(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def quantum_potential(self, x):
        st = self.state
        ratio = regularized_ratio(self._d2, st.psi, x, st.nodes, self._width)
        return -st.hbar ** 2 / (2.0 * st.mass) * np.asarray(ratio)

    def modified_potential(self, x):
        return np.asarray(self.state.potential(x)) + self.quantum_potential(x)

    def modified_force(self, x, h=None):
        """-U'(x) by central differences; zero for an exact eigenstate."""
        if h is None:
            h = self._width
        x = np.asarray(x, dtype=float)
        return -(self.modified_potential(x + h) - self.modified_potential(x - h)) / (2.0 * h)


def unipolar_of(state: Eigenstate) -> UnipolarDecomposition:
    d2 = _second_derivative(state)
    h = 1e-3 * state.potential.length_scale()
    types = [classify_node(state.psi, z, d2psi=d2, dpsi=state.dpsi, h=h) for z in state.nodes]
    return UnipolarDecomposition(state, types)


def cusp_slopes(psi, node: float, h: float = 1e-6):
    """One-sided slopes of |psi| at a node: (left, right)."""
    left = (abs(float(psi(node))) - abs(float(psi(node - h)))) / h
    right = (abs(float(psi(node + h))) - abs(float(psi(node)))) / h
    return left, right
