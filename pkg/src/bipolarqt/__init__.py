"""Exact bipolar decompositions of one-dimensional stationary states.

A real eigenstate psi is written as the sum of two counter-propagating
waves r exp(+-i s / hbar) with constant flux F.  The package builds that
decomposition (closed form for low harmonic-oscillator states, regularized
quadrature otherwise), its quantum potential and modified potential, the
trajectories that move on it, and the semiclassical objects it approaches.
"""

from .bipolar import (
    BipolarDecomposition,
    DecompositionError,
    TruncationError,
    decompose,
    floyd_consistency_check,
    ho_action_analytic,
    microstate_scan,
    semiclassical_parameters,
)
from .checks import CheckResult, run_checks
from .eigenstates import (
    Eigenstate,
    EigenstateError,
    SingularPotentialError,
    ho_eigenstate,
    inverse_potential,
    morse_eigenstate,
    solve_generic,
)
from .potentials import Potential, harmonic, morse, morse_energy, tabulated
from .semiclassical import SemiclassicalData, semiclassical_data, turning_points
from .trajectories import (
    Trajectory,
    TrajectoryExitError,
    flow_equivalence,
    propagate_bipolar,
    propagate_semiclassical,
    unipolar_stationarity_check,
)
from .unipolar import UnipolarDecomposition, unipolar_of

__version__ = "0.1.0"

__all__ = [
    "BipolarDecomposition", "CheckResult", "DecompositionError", "Eigenstate", "EigenstateError",
    "Potential", "SemiclassicalData", "SingularPotentialError", "Trajectory", "TrajectoryExitError",
    "TruncationError", "UnipolarDecomposition", "decompose", "floyd_consistency_check",
    "flow_equivalence", "harmonic", "ho_action_analytic", "ho_eigenstate", "inverse_potential",
    "microstate_scan", "morse", "morse_eigenstate", "morse_energy", "propagate_bipolar",
    "propagate_semiclassical", "run_checks", "semiclassical_data", "semiclassical_parameters",
    "solve_generic", "tabulated", "turning_points", "unipolar_of", "unipolar_stationarity_check",
]
