"""Time-adaptive symmetric Zassenhaus splittings for the semiclassical
Schrödinger equation ``dpsi/dt = i eps psi'' - i V psi / eps`` in 1-d."""

from .controller import (
    ControllerConfig,
    IntegrationSummary,
    MaxRejections,
    StepRecord,
    integrate,
    local_error_estimate,
    propagate_fixed,
    propose_step,
)
from .estimator import ZassenhausPropagator
from .exponentials import ExpCounter, LanczosConfig, NonConvergence, lanczos_expv
from .grid import PeriodicGrid, l2_norm, make_grid, spectral_derivative
from .operators import PotentialTable, SemiclassicalProblem, apply_symmetrized, potential_from_samples
from .problems import (
    PRESETS,
    ReferenceOracle,
    WavePacketParams,
    build_problem,
    lattice_potential,
    morse_potential,
    reference_solve,
    wave_packet,
)
from .stepper import ZASS4, ZASS6, SchemeSpec, classical_defect, step, step_derivative, symmetrized_defect

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig",
    "ExpCounter",
    "IntegrationSummary",
    "LanczosConfig",
    "MaxRejections",
    "NonConvergence",
    "PRESETS",
    "PeriodicGrid",
    "PotentialTable",
    "ReferenceOracle",
    "SchemeSpec",
    "SemiclassicalProblem",
    "StepRecord",
    "WavePacketParams",
    "ZASS4",
    "ZASS6",
    "ZassenhausPropagator",
    "apply_symmetrized",
    "build_problem",
    "classical_defect",
    "integrate",
    "l2_norm",
    "lanczos_expv",
    "lattice_potential",
    "local_error_estimate",
    "make_grid",
    "morse_potential",
    "potential_from_samples",
    "propagate_fixed",
    "propose_step",
    "reference_solve",
    "spectral_derivative",
    "step",
    "step_derivative",
    "symmetrized_defect",
    "wave_packet",
]
