"""Symmetric Zassenhaus steps, their time derivative and defects.

A scheme is a palindromic product of exponentials ``exp(c h**n R^[j])``
applied right to left.  The derivative of the product with respect to the
step size follows from the product rule; generator insertions are grouped
in pairs that share a stored prefix state, so a scheme with ``K`` factors
needs ``K - 1`` fresh exponentials for ``d/dh S(h) psi0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exponentials import ExpCounter, LanczosConfig, apply_exponential
from .operators import SemiclassicalProblem

__all__ = [
    "SchemeSpec",
    "StaleWorkspace",
    "StepWorkspace",
    "ZASS4",
    "ZASS6",
    "classical_defect",
    "get_scheme",
    "step",
    "step_derivative",
    "symmetrized_defect",
]


class StaleWorkspace(RuntimeError):
    """Workspace does not belong to the step being examined."""


@dataclass(frozen=True)
class SchemeSpec:
    """Palindromic exponential product.

    ``factors`` lists ``(j, n, c)`` in application order; the factor is
    ``exp(c * h**n * R^[j])``.  The weights ``c`` are relative to the
    h-independent generators, e.g. ``exp(W^[2]) = exp(2 h**3 R^[2])``.
    """

    name: str
    factors: tuple[tuple[int, int, float], ...]
    p: int

    def __post_init__(self):
        ids = [f[0] for f in self.factors]
        if ids != ids[::-1] or list(self.factors) != list(self.factors)[::-1]:
            raise ValueError(f"scheme {self.name!r} is not palindromic")
        if len(self.factors) % 2 == 0:
            raise ValueError("palindromic scheme needs an odd number of factors")
        if any(j not in (0, 1, 2, 3) for j in ids):
            raise ValueError("generator ids must lie in 0..3")

    @property
    def n_exponentials(self) -> int:
        return len(self.factors)

    def argument(self, k: int, h: float) -> float:
        j, n, c = self.factors[k]
        return c * h**n

    def weight(self, k: int, h: float) -> float:
        """Factor in front of ``R^[j]`` in ``d/dh exp(c h**n R^[j])``."""
        j, n, c = self.factors[k]
        return c * n * h ** (n - 1)


ZASS6 = SchemeSpec(
    "zass6",
    ((0, 1, 1.0), (1, 1, 1.0), (2, 3, 1.0), (3, 5, 1.0), (2, 3, 1.0), (1, 1, 1.0), (0, 1, 1.0)),
    p=4,
)
ZASS4 = SchemeSpec(
    "zass4",
    ((0, 1, 1.0), (1, 1, 1.0), (2, 3, 2.0), (1, 1, 1.0), (0, 1, 1.0)),
    p=4,
)
SCHEMES = {"zass6": ZASS6, "zass4": ZASS4}


def get_scheme(scheme) -> SchemeSpec:
    if isinstance(scheme, SchemeSpec):
        return scheme
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}") from None


@dataclass
class StepWorkspace:
    """Intermediates of one step.

    ``v[i]`` is the state after factors ``0..2i`` (so ``v[-1]`` is the step
    result) and ``w[i]`` the generator-weighted vector inserted at that
    prefix.
    """

    h: float
    psi0: np.ndarray
    v: list[np.ndarray]
    w: list[np.ndarray] = field(default_factory=list)
    counter: ExpCounter = field(default_factory=ExpCounter)

    @property
    def psi1(self) -> np.ndarray:
        return self.v[-1]


def _exp(scheme, k, h, psi, problem, cfg, counter):
    j = scheme.factors[k][0]
    return apply_exponential(j, scheme.argument(k, h), psi, problem, cfg, counter)


def _weighted(problem, terms, psi):
    """``sum(c * R^[j] psi for j, c in terms)``, skipping zero weights."""
    out = None
    for j, c in terms:
        if c == 0:
            continue
        term = c * problem.apply_generator(j, psi)
        out = term if out is None else out + term
    return np.zeros_like(psi) if out is None else out


def _merge(terms):
    merged: dict[int, float] = {}
    for j, c in terms:
        merged[j] = merged.get(j, 0.0) + c
    return sorted(merged.items())


def step(
    psi0: np.ndarray,
    h: float,
    scheme,
    problem: SemiclassicalProblem,
    cfg: LanczosConfig = LanczosConfig(),
    counter: ExpCounter | None = None,
    store_derivative_terms: bool = True,
) -> tuple[np.ndarray, StepWorkspace]:
    """Advance ``psi0`` by one step of size ``h``."""
    scheme = get_scheme(scheme)
    if h < 0:
        raise ValueError(f"step size must be non-negative, got {h}")
    counter = ExpCounter() if counter is None else counter
    psi0 = problem.grid.check(np.asarray(psi0, dtype=complex))
    K = scheme.n_exponentials

    u = psi0
    v = []
    for k in range(K):
        u = _exp(scheme, k, h, u, problem, cfg, counter)
        if k % 2 == 0:
            v.append(u)
    ws = StepWorkspace(h=h, psi0=psi0, v=v, counter=counter)

    if store_derivative_terms:
        for i, vi in enumerate(v):
            k = 2 * i
            terms = [(scheme.factors[k][0], scheme.weight(k, h))]
            if k + 1 < K:
                terms.append((scheme.factors[k + 1][0], scheme.weight(k + 1, h)))
            ws.w.append(_weighted(problem, _merge(terms), vi))
    return v[-1], ws


def _check(ws: StepWorkspace, h, psi1=None):
    if not ws.w or len(ws.w) != len(ws.v):
        raise StaleWorkspace("workspace holds no derivative terms")
    if h is not None and h != ws.h:
        raise StaleWorkspace(f"workspace was built for h={ws.h}, not h={h}")
    if psi1 is not None and psi1 is not ws.psi1 and not np.array_equal(psi1, ws.psi1):
        raise StaleWorkspace("psi1 is not the output of this workspace's step")


def _sweep(ws, scheme, problem, cfg, start):
    """Propagate ``start`` (placed at the first prefix) through the product
    while adding the inner ``w`` terms; the last ``w`` is left out."""
    K = scheme.n_exponentials
    h = ws.h
    acc = start
    for i in range(1, len(ws.v)):
        acc = _exp(scheme, 2 * i - 1, h, acc, problem, cfg, ws.counter)
        acc = _exp(scheme, 2 * i, h, acc, problem, cfg, ws.counter)
        if i < len(ws.v) - 1:
            acc = acc + ws.w[i]
    assert 2 * (len(ws.v) - 1) == K - 1
    return acc


def step_derivative(ws: StepWorkspace, scheme, problem: SemiclassicalProblem,
                    cfg: LanczosConfig = LanczosConfig(), h: float | None = None) -> np.ndarray:
    """``d/dh S(h) psi0`` from a completed step."""
    scheme = get_scheme(scheme)
    _check(ws, h)
    return _sweep(ws, scheme, problem, cfg, ws.w[0]) + ws.w[-1]


def _tail(ws, scheme, problem, ham_factor):
    """``w_last - ham_factor * H psi1`` as one combination of generators."""
    K = scheme.n_exponentials
    j_last = scheme.factors[K - 1][0]
    terms = [(j_last, scheme.weight(K - 1, ws.h)), (0, -2.0 * ham_factor), (1, -2.0 * ham_factor)]
    return _weighted(problem, _merge(terms), ws.psi1)


def classical_defect(ws: StepWorkspace, psi1, scheme, problem: SemiclassicalProblem,
                     cfg: LanczosConfig = LanczosConfig(), h: float | None = None) -> np.ndarray:
    """``d/dh S(h) psi0 - H psi1``; for ``zass6`` the tail is ``-(R0 + 2 R1) psi1``."""
    scheme = get_scheme(scheme)
    _check(ws, h, psi1)
    return _sweep(ws, scheme, problem, cfg, ws.w[0]) + _tail(ws, scheme, problem, 1.0)


def symmetrized_defect(ws: StepWorkspace, psi0, psi1, scheme, problem: SemiclassicalProblem,
                       cfg: LanczosConfig = LanczosConfig(), h: float | None = None) -> np.ndarray:
    """``d/dh S(h) psi0 - (H psi1 + S(h) H psi0) / 2``.

    ``S(h) H psi0 / 2`` is folded into the sweep, costing one exponential
    beyond the classical defect.
    """
    scheme = get_scheme(scheme)
    _check(ws, h, psi1)
    if psi0 is not ws.psi0 and not np.array_equal(psi0, ws.psi0):
        raise StaleWorkspace("psi0 is not the input of this workspace's step")
    half_h = _weighted(problem, [(0, 1.0), (1, 1.0)], ws.psi0)
    start = ws.w[0] - _exp(scheme, 0, ws.h, half_h, problem, cfg, ws.counter)
    return _sweep(ws, scheme, problem, cfg, start) + _tail(ws, scheme, problem, 0.5)
