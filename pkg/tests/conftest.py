import warnings

import numpy as np
import pytest

from zassadapt.grid import make_grid
from zassadapt.operators import PotentialTable, SemiclassicalProblem
from zassadapt.problems import build_problem


def dft_matrix(M):
    """Unscaled DFT matrix from its defining formula (independent of numpy.fft)."""
    j = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(j, j) / M)


def dense_derivative(grid, k):
    """Dense spectral differentiation matrix F^-1 diag((i kappa)^k) F, Nyquist
    zeroed for odd k."""
    M = grid.M
    m = np.arange(M)
    signed = np.where(m < M // 2, m, m - M)
    kappa = 2 * np.pi * signed / (grid.b - grid.a)
    mult = (1j * kappa) ** k
    if k % 2:
        mult[M // 2] = 0
    F = dft_matrix(M)
    return (F.conj().T / M) @ np.diag(mult) @ F


def dense_of(action, M):
    """Assemble the matrix of a linear action column by column."""
    return np.column_stack([action(e) for e in np.eye(M, dtype=complex)])


def l2(grid, psi):
    return float(np.sqrt(grid.dx) * np.linalg.norm(psi))


def slope(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def cosine_problem(M=64, eps=0.1, a=-2.0, b=2.0):
    """Band-limited potential V = cos(pi x) on [-2, 2] with exact derivatives."""
    grid = make_grid(a, b, M)
    w = np.pi
    x = grid.x
    vals = [np.cos(w * x), -w * np.sin(w * x), -w**2 * np.cos(w * x), w**3 * np.sin(w * x), w**4 * np.cos(w * x)]
    return SemiclassicalProblem(grid, PotentialTable(*vals), eps)


@pytest.fixture
def rng():
    return np.random.default_rng(20181017)


@pytest.fixture(scope="session")
def lattice64():
    return build_problem("lattice", 1e-2, 64)


@pytest.fixture(scope="session")
def lattice256():
    return build_problem("lattice", 1e-2, 256)


@pytest.fixture(scope="session")
def free128():
    grid = make_grid(-2.0, 2.0, 128)
    z = np.zeros(128)
    return SemiclassicalProblem(grid, PotentialTable(z, z, z, z, z), 1e-2)


@pytest.fixture(autouse=True)
def _quiet_packet_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="wave packet tail")
        yield
