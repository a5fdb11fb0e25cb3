"""Built-in experiments and the dense reference propagator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb, factorial, pi

import numpy as np

from .grid import PeriodicGrid, make_grid
from .operators import PotentialTable, SemiclassicalProblem, zero_potential

__all__ = [
    "ORACLE_MAX_M",
    "PRESETS",
    "ProblemPreset",
    "ReferenceOracle",
    "WavePacketParams",
    "bump",
    "bump_derivatives",
    "build_problem",
    "lattice_potential",
    "morse_potential",
    "reference_solve",
    "wave_packet",
]

ORACLE_MAX_M = 2048
TAIL_WARN = 1e-12


@dataclass(frozen=True)
class WavePacketParams:
    delta: float
    x0: float
    k0: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"wave packet spread must be positive, got {self.delta}")


def wave_packet(grid: PeriodicGrid, params: WavePacketParams) -> np.ndarray:
    """Gaussian packet ``(delta pi)**-1/4 exp(i k0 (x-x0)/delta - (x-x0)**2 / (2 delta))``."""
    d, x0, k0 = params.delta, params.x0, params.k0
    y = grid.x - x0
    psi = (d * pi) ** -0.25 * np.exp(1j * k0 * y / d - y**2 / (2 * d))
    amp = np.abs(psi)
    edge = max(amp[0], amp[-1])
    if edge > TAIL_WARN * amp.max():
        warnings.warn(
            f"wave packet tail at the boundary is {edge / amp.max():.2e} of its peak",
            RuntimeWarning,
            stacklevel=2,
        )
    return psi


# -- bump function --------------------------------------------------------------


def _g_derivs(x: np.ndarray, order: int) -> list[np.ndarray]:
    """Derivatives 0..order of ``g(x) = 1/(x**2 - 1)`` (valid for |x| < 1)."""
    out = []
    for n in range(order + 1):
        s = 0.5 * (-1) ** n * factorial(n)
        out.append(s * ((x - 1.0) ** -(n + 1) - (x + 1.0) ** -(n + 1)))
    return out


def bump_derivatives(x, order: int = 4) -> list[np.ndarray]:
    """``[rho, rho', ..., rho^(order)]`` for ``rho(x) = exp(-1/(1-x**2))``, ``order <= 4``."""
    if not 0 <= order <= 4:
        raise ValueError("bump derivatives are available up to order 4")
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    xi = np.where(inside, x, 0.0)
    g, g1, g2, g3, g4 = _g_derivs(xi, 4)
    rho = np.exp(g)
    # Faa di Bruno for exp(g)
    polys = [
        np.ones_like(xi),
        g1,
        g2 + g1**2,
        g3 + 3 * g1 * g2 + g1**3,
        g4 + 4 * g1 * g3 + 3 * g2**2 + 6 * g1**2 * g2 + g1**4,
    ]
    return [np.where(inside, p * rho, 0.0) for p in polys[: order + 1]]


def bump(x):
    return bump_derivatives(x, 0)[0]


def bump_d1(x):
    return bump_derivatives(x, 1)[1]


def bump_d2(x):
    return bump_derivatives(x, 2)[2]


def bump_d3(x):
    return bump_derivatives(x, 3)[3]


def bump_d4(x):
    return bump_derivatives(x, 4)[4]


def _scaled_bump_times_sine(x, scale, shift, omega, order=4):
    """Derivatives of ``rho(scale*x + shift) * sin(omega*x)`` by Leibniz' rule."""
    r = bump_derivatives(scale * x + shift, order)
    r = [scale**k * rk for k, rk in enumerate(r)]
    s = [omega**k * np.sin(omega * x + k * pi / 2) for k in range(order + 1)]
    return [sum(comb(n, k) * r[k] * s[n - k] for k in range(n + 1)) for n in range(order + 1)]


def lattice_values(x) -> list[np.ndarray]:
    """``V_L`` and its first four derivatives at ``x``."""
    x = np.asarray(x, dtype=float)
    first = _scaled_bump_times_sine(x, 4.0, -1.0, 20 * pi)
    second = _scaled_bump_times_sine(x, 0.2, 0.0, 4 * pi)
    return [a + 0.1 * b for a, b in zip(first, second)]


def morse_values(x) -> list[np.ndarray]:
    """``V_M = (1 - exp(-(x-5)/2))**2`` and its first four derivatives."""
    x = np.asarray(x, dtype=float)
    e1 = np.exp(-(x - 5.0) / 2)
    e2 = e1**2
    out = [1.0 - 2.0 * e1 + e2]
    for n in range(1, 5):
        out.append(-2.0 * (-0.5) ** n * e1 + (-1.0) ** n * e2)
    return out


def lattice_potential(grid: PeriodicGrid) -> PotentialTable:
    return PotentialTable(*lattice_values(grid.x), source="analytic")


def morse_potential(grid: PeriodicGrid) -> PotentialTable:
    return PotentialTable(*morse_values(grid.x), source="analytic")


# -- presets ----------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemPreset:
    name: str
    domain: tuple[float, float]
    t_final: float
    grid_size_default: dict

    def packet(self, epsilon: float) -> WavePacketParams:
        if self.name == "lattice":
            return WavePacketParams(epsilon / 4, -0.75, 0.1)
        if self.name == "morse":
            return WavePacketParams(epsilon, 4.5, 0.0)
        # free particle: a moderately broad packet in the middle of the box
        a, b = self.domain
        return WavePacketParams(epsilon, 0.5 * (a + b), 0.5)

    def potential(self, grid: PeriodicGrid) -> PotentialTable:
        if self.name == "lattice":
            return lattice_potential(grid)
        if self.name == "morse":
            return morse_potential(grid)
        return zero_potential(grid)

    def default_M(self, epsilon: float) -> int:
        # nearest tabulated epsilon on a log scale
        eps = min(self.grid_size_default, key=lambda e: abs(np.log(e / epsilon)))
        return self.grid_size_default[eps]


PRESETS = {
    "lattice": ProblemPreset("lattice", (-2.0, 2.0), 1.0, {1e-2: 750, 1e-3: 1750, 1e-4: 15000}),
    "morse": ProblemPreset("morse", (3.0, 10.0), 20.0, {1e-2: 500, 1e-3: 1500, 1e-4: 10000}),
    "free": ProblemPreset("free", (-2.0, 2.0), 1.0, {1e-2: 256}),
}


def build_problem(name: str, epsilon: float, M: int | None = None):
    """Return ``(problem, psi0, t_final)`` for a preset."""
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}") from None
    M = preset.default_M(epsilon) if M is None else M
    grid = make_grid(*preset.domain, M)
    problem = SemiclassicalProblem(grid, preset.potential(grid), float(epsilon))
    with warnings.catch_warnings():
        # coarse test grids may not resolve the packet tails to 1e-12
        warnings.simplefilter("ignore", RuntimeWarning)
        psi0 = wave_packet(grid, preset.packet(epsilon))
    return problem, psi0, preset.t_final


# -- dense reference ---------------------------------------------------------------


def dense_second_derivative(grid: PeriodicGrid) -> np.ndarray:
    """Real symmetric spectral matrix of ``d^2/dx^2`` (test and oracle use only)."""
    eye = np.eye(grid.M)
    cols = np.fft.ifft(grid.multiplier(2)[:, None] * np.fft.fft(eye, axis=0), axis=0)
    return cols.real


class ReferenceOracle:
    """Exact propagation of the semi-discrete system by eigendecomposition.

    With ``A = eps K2 - diag(V) / eps`` real symmetric the Hamiltonian is
    ``H = i A``, so ``exp(t H) = Q exp(i t Lambda) Q^T``.
    """

    def __init__(self, problem: SemiclassicalProblem, max_M: int = ORACLE_MAX_M):
        if problem.grid.M > max_M:
            raise ValueError(
                f"dense reference limited to M <= {max_M} (O(M^3) cost); got M = {problem.grid.M}"
            )
        self.problem = problem
        A = problem.epsilon * dense_second_derivative(problem.grid) - np.diag(problem.potential.v) / problem.epsilon
        A = 0.5 * (A + A.T)
        try:
            self.eigvals, self.eigvecs = np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"eigendecomposition of the reference Hamiltonian failed: {exc}") from exc

    def propagate(self, psi0: np.ndarray, t: float) -> np.ndarray:
        Q = self.eigvecs
        coeff = Q.T @ np.asarray(psi0, dtype=complex)
        return Q @ (np.exp(1j * t * self.eigvals) * coeff)


_ORACLES: dict[int, tuple[SemiclassicalProblem, ReferenceOracle]] = {}


def reference_solve(psi0: np.ndarray, t_final: float, problem: SemiclassicalProblem) -> np.ndarray:
    """``exp(t_final H) psi0`` by the cached dense oracle."""
    key = id(problem)
    hit = _ORACLES.get(key)
    if hit is None or hit[0] is not problem:
        hit = (problem, ReferenceOracle(problem))
        if len(_ORACLES) > 8:
            _ORACLES.clear()
        _ORACLES[key] = hit
    return hit[1].propagate(psi0, t_final)
