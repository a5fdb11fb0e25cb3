"""Matrix-free Hamiltonian and Zassenhaus generators.

Every generator here is ``1j`` times a real symmetric discretization and
does not depend on the step size.  With ``dv1..dv4`` the potential
derivatives:

    R0 =  1/2 i eps d2
    R1 = -1/2 i V / eps
    R2 =  i/12 dv1**2 / eps - i eps/48 dv4 + i eps/12 <dv2>_2
    R3 = -7i/120 dv2 dv1**2 / eps + i eps/30 <dv2**2 - 2 dv3 dv1>_2
         - i eps**3/120 <dv4>_4

where ``<f>_k = (f d^k + d^k f) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np

from .grid import PeriodicGrid, spectral_derivative

__all__ = [
    "PotentialTable",
    "SemiclassicalProblem",
    "apply_symmetrized",
    "potential_from_samples",
    "zero_potential",
]

Generator = Callable[[np.ndarray], np.ndarray]


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Samples of ``V`` and its first four derivatives on a grid."""

    v: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray
    dv3: np.ndarray
    dv4: np.ndarray
    source: Literal["analytic", "spectral"] = "analytic"

    def __post_init__(self):
        shapes = {np.shape(getattr(self, n)) for n in ("v", "dv1", "dv2", "dv3", "dv4")}
        if len(shapes) != 1 or len(next(iter(shapes))) != 1:
            raise ValueError(f"potential arrays must share one 1-d shape, got {shapes}")
        for name in ("v", "dv1", "dv2", "dv3", "dv4"):
            arr = _frozen(getattr(self, name))
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"potential array {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.source not in ("analytic", "spectral"):
            raise ValueError(f"unknown potential source {self.source!r}")

    def __len__(self):
        return len(self.v)

    # h-independent products used by R2 and R3
    @cached_property
    def dv1_sq(self) -> np.ndarray:
        return _frozen(self.dv1**2)

    @cached_property
    def dv2_dv1_sq(self) -> np.ndarray:
        return _frozen(self.dv2 * self.dv1**2)

    @cached_property
    def r3_sym2_coeff(self) -> np.ndarray:
        return _frozen(self.dv2**2 - 2.0 * self.dv3 * self.dv1)

    @property
    def is_zero(self) -> bool:
        return not any(np.any(getattr(self, n)) for n in ("v", "dv1", "dv2", "dv3", "dv4"))


def potential_from_samples(v, grid: PeriodicGrid) -> PotentialTable:
    """Build a table from sampled ``V`` alone, differentiating spectrally."""
    v = np.asarray(v, dtype=float)
    grid.check(v)
    derivs = [spectral_derivative(v, j, grid).real for j in range(1, 5)]
    return PotentialTable(v, *derivs, source="spectral")


def zero_potential(grid: PeriodicGrid) -> PotentialTable:
    z = np.zeros(grid.M)
    return PotentialTable(z, z, z, z, z, source="analytic")


def apply_symmetrized(f: np.ndarray, k: int, psi: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Apply ``<f>_k = (f d^k + d^k f) / 2`` to ``psi``; ``k = 0`` is ``f * psi``."""
    f = np.asarray(f)
    psi = grid.check(psi)
    if f.shape != psi.shape:
        raise ValueError(f"coefficient shape {f.shape} does not match {psi.shape}")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return f * psi
    mult = grid.multiplier(k)
    d_psi = np.fft.ifft(mult * np.fft.fft(psi))
    d_fpsi = np.fft.ifft(mult * np.fft.fft(f * psi))
    return 0.5 * (f * d_psi + d_fpsi)


@dataclass(frozen=True, eq=False)
class SemiclassicalProblem:
    """``dpsi/dt = i eps d2 psi - i V psi / eps`` on a periodic grid."""

    grid: PeriodicGrid
    potential: PotentialTable
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if len(self.potential) != self.grid.M:
            raise ValueError("potential table does not match grid size")

    @property
    def M(self) -> int:
        return self.grid.M

    def apply_R0(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.check(psi)
        return np.fft.ifft((0.5j * self.epsilon) * self.grid.multiplier(2) * np.fft.fft(psi))

    def apply_R1(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.check(psi)
        return (-0.5j / self.epsilon) * self.potential.v * psi

    def apply_R2(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.check(psi)
        pot, eps = self.potential, self.epsilon
        diag = pot.dv1_sq / (12 * eps) - (eps / 48) * pot.dv4
        out = diag * psi + (eps / 12) * apply_symmetrized(pot.dv2, 2, psi, self.grid)
        return 1j * out

    def apply_R3(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.check(psi)
        pot, eps = self.potential, self.epsilon
        out = (-7 / (120 * eps)) * pot.dv2_dv1_sq * psi
        out = out + (eps / 30) * apply_symmetrized(pot.r3_sym2_coeff, 2, psi, self.grid)
        out = out - (eps**3 / 120) * apply_symmetrized(pot.dv4, 4, psi, self.grid)
        return 1j * out

    def apply_generator(self, j: int, psi: np.ndarray) -> np.ndarray:
        return self.generators[j](psi)

    @property
    def generators(self) -> tuple[Generator, Generator, Generator, Generator]:
        return (self.apply_R0, self.apply_R1, self.apply_R2, self.apply_R3)

    def apply_hamiltonian(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.check(psi)
        kin = np.fft.ifft((1j * self.epsilon) * self.grid.multiplier(2) * np.fft.fft(psi))
        return kin - (1j / self.epsilon) * self.potential.v * psi

    def symmetric_part(self, j: int) -> Generator:
        """Real-symmetric ``A`` with ``R^[j] = i A``, as an action."""
        gen = self.generators[j]
        return lambda psi: -1j * gen(psi)
