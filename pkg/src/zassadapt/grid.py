"""Periodic spatial grid and Fourier spectral calculus."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["PeriodicGrid", "make_grid", "spectral_derivative", "l2_norm", "inner"]


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on ``[a, b)`` with ``M`` points; ``b`` is identified with ``a``.

    The forward transform is unscaled, the inverse carries the ``1/M``
    (``numpy.fft`` default normalization).
    """

    a: float
    b: float
    M: int
    _multipliers: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if self.M < 2 or self.M % 2:
            raise ValueError(f"M must be even and >= 2, got {self.M}")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.M

    @cached_property
    def x(self) -> np.ndarray:
        return self.a + self.dx * np.arange(self.M)

    @cached_property
    def kappa(self) -> np.ndarray:
        """Angular wavenumbers in FFT order; index M/2 is the Nyquist mode."""
        k = 2 * np.pi * np.fft.fftfreq(self.M, d=1.0 / self.M) / self.length
        k.flags.writeable = False
        return k

    def multiplier(self, k: int) -> np.ndarray:
        """Fourier symbol of the k-th derivative, ``(i kappa)**k``.

        The Nyquist entry is zeroed for odd ``k`` so real data have real
        derivatives.
        """
        if k < 0:
            raise ValueError("derivative order must be non-negative")
        mult = self._multipliers.get(k)
        if mult is None:
            mult = (1j * self.kappa) ** k
            if k % 2:
                mult[self.M // 2] = 0.0
            else:
                # exactly real for even k
                mult = mult.real.astype(complex)
            mult.flags.writeable = False
            self._multipliers[k] = mult
        return mult

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs)

    def check(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi)
        if psi.shape != (self.M,):
            raise ValueError(f"expected array of shape ({self.M},), got {psi.shape}")
        return psi


def make_grid(a: float, b: float, M: int) -> PeriodicGrid:
    return PeriodicGrid(float(a), float(b), int(M))


def spectral_derivative(psi: np.ndarray, k: int, grid: PeriodicGrid) -> np.ndarray:
    """Apply the spectral collocation approximation of ``d^k/dx^k`` to ``psi``."""
    if k < 1:
        raise ValueError(f"derivative order must be >= 1, got {k}")
    psi = grid.check(psi)
    return np.fft.ifft(grid.multiplier(k) * np.fft.fft(psi))


def l2_norm(psi: np.ndarray, grid: PeriodicGrid) -> float:
    """Discrete L2 norm ``sqrt(dx) * ||psi||_2``."""
    return float(np.sqrt(grid.dx) * np.linalg.norm(psi))


def inner(phi: np.ndarray, psi: np.ndarray, grid: PeriodicGrid) -> complex:
    """Discrete L2 inner product, conjugate-linear in ``phi``."""
    return complex(grid.dx * np.vdot(phi, psi))
