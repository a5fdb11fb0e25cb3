"""Actions of the split exponentials ``exp(tau R^[j])`` on a wavefunction.

``R^[0]`` is diagonal in Fourier space and ``R^[1]`` in physical space, so
their exponentials are exact phase multipliers.  ``R^[2]`` and ``R^[3]``
are handled by a Lanczos iteration on the real symmetric ``A = -i R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Literal

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .operators import SemiclassicalProblem

__all__ = [
    "ExpCounter",
    "LanczosConfig",
    "NonConvergence",
    "apply_exponential",
    "exp_S0",
    "exp_S1",
    "exp_S2",
    "exp_S3",
    "lanczos_expv",
]

POWERS = (1, 1, 3, 5)


class NonConvergence(ArithmeticError):
    """Lanczos hit its dimension cap before meeting the tolerance."""

    def __init__(self, msg, m=None, estimate=None):
        super().__init__(msg)
        self.m = m
        self.estimate = estimate


@dataclass
class ExpCounter:
    s0: int = 0
    s1: int = 0
    s2: int = 0
    s3: int = 0
    lanczos_mv: int = 0

    @property
    def total(self) -> int:
        return self.s0 + self.s1 + self.s2 + self.s3

    def bump(self, j: int) -> None:
        name = f"s{j}"
        setattr(self, name, getattr(self, name) + 1)

    def snapshot(self) -> "ExpCounter":
        return ExpCounter(**{f.name: getattr(self, f.name) for f in fields(self)})

    def __add__(self, other: "ExpCounter") -> "ExpCounter":
        return ExpCounter(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def __sub__(self, other: "ExpCounter") -> "ExpCounter":
        return ExpCounter(**{f.name: getattr(self, f.name) - getattr(other, f.name) for f in fields(self)})

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class LanczosConfig:
    """Stopping rule for the Krylov exponential.

    ``tol`` bounds the error relative to ``||psi||``.  With
    ``strategy="fixed_m"`` exactly ``m_max`` iterations are run (fewer on
    breakdown) and no error check is made.
    """

    m_max: int = 30
    tol: float = 1e-9
    strategy: Literal["aposteriori", "fixed_m"] = "aposteriori"
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError(f"m_max must be >= 1, got {self.m_max}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.strategy not in ("aposteriori", "fixed_m"):
            raise ValueError(f"unknown Lanczos strategy {self.strategy!r}")


def _expit_e1(alpha, beta, tau):
    """``exp(i tau T) e_1`` for the symmetric tridiagonal ``T``."""
    if len(alpha) == 1:
        return np.array([np.exp(1j * tau * alpha[0])])
    lam, Q = eigh_tridiagonal(alpha, beta)
    return Q @ (np.exp(1j * tau * lam) * Q[0])


def lanczos_expv(
    apply_A: Callable[[np.ndarray], np.ndarray],
    tau: float,
    psi: np.ndarray,
    cfg: LanczosConfig = LanczosConfig(),
    counter: ExpCounter | None = None,
) -> np.ndarray:
    """Approximate ``exp(i tau A) psi`` for a Hermitian action ``apply_A``.

    The generator of the exponential is ``G = i A`` (skew-Hermitian).  The
    iteration stops once ``|tau| * beta_m * |[exp(i tau T_m) e_1]_m|``
    drops below ``cfg.tol`` or on (happy) breakdown.
    """
    psi = np.asarray(psi, dtype=complex)
    if tau == 0:
        return psi.copy()
    beta0 = np.linalg.norm(psi)
    if beta0 == 0:
        return np.zeros_like(psi)
    if not np.isfinite(beta0):
        raise FloatingPointError("non-finite input to Lanczos exponential")

    m_cap = min(cfg.m_max, psi.size)
    basis = np.empty((m_cap, psi.size), dtype=complex)
    basis[0] = psi / beta0
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    scale = 0.0
    estimate = math.inf

    for j in range(m_cap):
        w = apply_A(basis[j])
        if counter is not None:
            counter.lanczos_mv += 1
        alpha[j] = np.vdot(basis[j], w).real
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        if cfg.reorthogonalize:
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if not np.isfinite(beta[j]):
            raise FloatingPointError("non-finite value in Lanczos iteration")
        scale = max(scale, abs(alpha[j]) + beta[j])

        m = j + 1
        y = _expit_e1(alpha[:m], beta[: m - 1], tau)
        if beta[j] <= 1e-14 * scale or m == psi.size:
            # invariant subspace reached: the Krylov result is exact
            break
        if cfg.strategy == "aposteriori":
            estimate = abs(tau) * beta[j] * abs(y[-1])
            if estimate <= cfg.tol:
                break
        if m == m_cap:
            if cfg.strategy == "fixed_m":
                break
            raise NonConvergence(
                f"Lanczos did not reach tol={cfg.tol:g} within m={m} (estimate {estimate:.3g})",
                m=m,
                estimate=estimate,
            )
        basis[m] = w / beta[j]

    return beta0 * (y @ basis[:m])


def exp_S0(t: float, psi: np.ndarray, problem: SemiclassicalProblem, counter: ExpCounter | None = None) -> np.ndarray:
    """``exp(t R^[0]) psi``: the phase ``exp(-i t eps kappa**2 / 2)`` per mode."""
    if counter is not None:
        counter.bump(0)
    phase = np.exp((0.5j * t * problem.epsilon) * problem.grid.multiplier(2).real)
    return np.fft.ifft(phase * np.fft.fft(psi))


def exp_S1(t: float, psi: np.ndarray, problem: SemiclassicalProblem, counter: ExpCounter | None = None) -> np.ndarray:
    """``exp(t R^[1]) psi``: pointwise phase ``exp(-i t V / (2 eps))``."""
    if counter is not None:
        counter.bump(1)
    return np.exp((-0.5j * t / problem.epsilon) * problem.potential.v) * psi


def exp_S2(t, psi, problem, cfg=LanczosConfig(), counter=None):
    """``exp(t**3 R^[2]) psi``."""
    return apply_exponential(2, t**3, psi, problem, cfg, counter)


def exp_S3(t, psi, problem, cfg=LanczosConfig(), counter=None):
    """``exp(t**5 R^[3]) psi``."""
    return apply_exponential(3, t**5, psi, problem, cfg, counter)


def apply_exponential(
    j: int,
    tau: float,
    psi: np.ndarray,
    problem: SemiclassicalProblem,
    cfg: LanczosConfig = LanczosConfig(),
    counter: ExpCounter | None = None,
) -> np.ndarray:
    """``exp(tau R^[j]) psi`` with the already-powered argument ``tau``."""
    if j == 0:
        return exp_S0(tau, psi, problem, counter)
    if j == 1:
        return exp_S1(tau, psi, problem, counter)
    if j not in (2, 3):
        raise ValueError(f"no generator R^[{j}]")
    if counter is not None:
        counter.bump(j)
    return lanczos_expv(problem.symmetric_part(j), tau, psi, cfg, counter)
