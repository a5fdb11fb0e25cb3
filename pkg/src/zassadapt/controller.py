"""Defect-based local error control and the integration drivers."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np

from .exponentials import ExpCounter, LanczosConfig, NonConvergence
from .grid import PeriodicGrid, l2_norm
from .operators import SemiclassicalProblem
from .stepper import classical_defect, get_scheme, step, symmetrized_defect

__all__ = [
    "ControllerConfig",
    "IntegrationSummary",
    "MaxRejections",
    "StepRecord",
    "integrate",
    "local_error_estimate",
    "propagate_fixed",
    "propose_step",
]

DefectKind = Literal["classical", "symmetrized", "none"]


class MaxRejections(RuntimeError):
    """Too many consecutive rejections at one time point."""


@dataclass(frozen=True)
class ControllerConfig:
    tol: float = 1e-7
    alpha: float = 0.1
    p: int = 4
    h0: float = 1e-9
    h_min: float = 1e-12
    h_max: float = 1.0
    max_rejections: int = 20
    defect_kind: Literal["classical", "symmetrized"] = "classical"
    # cap on h_new / h_old after an accepted step; None disables it
    max_growth: float | None = 5.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0 < self.h_min <= self.h0 <= self.h_max:
            raise ValueError(
                f"need 0 < h_min <= h0 <= h_max, got h_min={self.h_min}, h0={self.h0}, h_max={self.h_max}"
            )
        if self.p < 1:
            raise ValueError("method order p must be >= 1")
        if self.max_rejections < 0:
            raise ValueError("max_rejections must be >= 0")
        if self.defect_kind not in ("classical", "symmetrized"):
            raise ValueError(f"unknown defect kind {self.defect_kind!r}")
        if self.max_growth is not None and not self.max_growth > 1:
            raise ValueError("max_growth must exceed 1")


@dataclass
class StepRecord:
    index: int
    t_start: float
    h: float
    est_local_err: float
    accepted: bool
    rejections_before: int
    exp_count: ExpCounter
    forced: bool = False
    norm: float = math.nan

    def as_row(self) -> dict:
        row = {
            "index": self.index,
            "t": self.t_start,
            "h": self.h,
            "est_local_err": self.est_local_err,
            "accepted": int(self.accepted),
            "rejections": self.rejections_before,
        }
        row.update({k: v for k, v in self.exp_count.as_dict().items() if k != "total"})
        row["forced"] = int(self.forced)
        row["norm"] = self.norm
        return row


@dataclass
class IntegrationSummary:
    accepted_steps: int = 0
    rejected_steps: int = 0
    exponentials: ExpCounter = field(default_factory=ExpCounter)
    wall_time: float = 0.0
    final_norm: float = math.nan
    t_final: float = 0.0
    h_min_used: float = math.inf
    h_max_used: float = 0.0
    forced_steps: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["exponentials"] = self.exponentials.as_dict()
        if not self.accepted_steps:
            d["h_min_used"] = d["h_max_used"] = None
        return d


def local_error_estimate(defect: np.ndarray, h: float, p: int, grid: PeriodicGrid) -> float:
    """``|| h/(p+1) * defect ||`` in the discrete L2 norm."""
    return h / (p + 1) * l2_norm(defect, grid)


def propose_step(h_old: float, est: float, cfg: ControllerConfig) -> float:
    """``(1 - alpha) h_old (tol/est)**(1/(p+1))`` clamped to ``[h_min, h_max]``."""
    if est < 0 or math.isnan(est):
        raise ValueError(f"error estimate must be non-negative, got {est}")
    if est == 0:
        return cfg.h_max
    h_new = (1 - cfg.alpha) * h_old * (cfg.tol / est) ** (1.0 / (cfg.p + 1))
    return min(max(h_new, cfg.h_min), cfg.h_max)


def default_lanczos(tol: float) -> LanczosConfig:
    return LanczosConfig(m_max=30, tol=tol / 100)


def _defect(kind, ws, psi0, psi1, scheme, problem, lanczos):
    if kind == "classical":
        return classical_defect(ws, psi1, scheme, problem, lanczos)
    return symmetrized_defect(ws, psi0, psi1, scheme, problem, lanczos)


def integrate(
    psi0: np.ndarray,
    t_final: float,
    scheme,
    problem: SemiclassicalProblem,
    cfg: ControllerConfig = ControllerConfig(),
    sink: Callable[[StepRecord], None] | None = None,
    lanczos: LanczosConfig | None = None,
) -> tuple[np.ndarray, IntegrationSummary]:
    """Adaptive propagation of ``psi0`` from 0 to ``t_final``.

    Every attempt, accepted or not, is passed to ``sink`` in order.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    scheme = get_scheme(scheme)
    lanczos = default_lanczos(cfg.tol) if lanczos is None else lanczos
    grid = problem.grid
    psi = problem.grid.check(np.asarray(psi0, dtype=complex))
    summary = IntegrationSummary(t_final=t_final)
    counter = ExpCounter()
    start = time.perf_counter()

    t = 0.0
    h = cfg.h0
    rejections = 0
    index = 0
    while t < t_final:
        remaining = t_final - t
        # a tail shorter than h_min is merged into this step
        last = h >= remaining or remaining - h < cfg.h_min * (1 - 1e-9)
        # floor status is judged on the requested h, so a merged step taken at h_min can still be forced
        at_floor = h <= cfg.h_min * (1 + 1e-12)
        if last:
            h = remaining
        before = counter.snapshot()
        try:
            psi1, ws = step(psi, h, scheme, problem, lanczos, counter)
            defect = _defect(cfg.defect_kind, ws, psi, psi1, scheme, problem, lanczos)
            est = local_error_estimate(defect, h, cfg.p, grid)
            if not math.isfinite(est):
                raise FloatingPointError("non-finite local error estimate")
        except NonConvergence:
            psi1, est = None, math.inf

        accept = psi1 is not None and (est <= cfg.tol or at_floor)
        record = StepRecord(index, t, h, est, accept, rejections, counter - before, forced=accept and est > cfg.tol)
        index += 1

        if accept:
            t = t_final if last else t + h
            psi = psi1
            record.norm = l2_norm(psi, grid)
            summary.accepted_steps += 1
            summary.forced_steps += record.forced
            summary.h_min_used = min(summary.h_min_used, h)
            summary.h_max_used = max(summary.h_max_used, h)
            rejections = 0
            h_next = propose_step(h, est, cfg)
            if cfg.max_growth is not None:
                h_next = min(h_next, cfg.max_growth * h)
            h = max(h_next, cfg.h_min)
        else:
            summary.rejected_steps += 1
            rejections += 1
            h = max(h / 2 if psi1 is None else propose_step(h, est, cfg), cfg.h_min)
        if sink is not None:
            sink(record)
        if not accept and rejections > cfg.max_rejections:
            raise MaxRejections(f"{rejections} consecutive rejections at t={t:.6g} (last h={record.h:.3g})")

    summary.exponentials = counter
    summary.wall_time = time.perf_counter() - start
    summary.final_norm = l2_norm(psi, grid)
    return psi, summary


def fixed_step_count(t_final: float, h: float) -> int:
    n = t_final / h
    return max(1, round(n)) if abs(n - round(n)) < 1e-9 * max(1.0, n) else math.ceil(n)


def propagate_fixed(
    psi0: np.ndarray,
    t_final: float,
    h: float,
    scheme,
    problem: SemiclassicalProblem,
    lanczos: LanczosConfig = LanczosConfig(),
    defect_kind: DefectKind = "none",
    p: int | None = None,
    sink: Callable[[StepRecord], None] | None = None,
) -> tuple[np.ndarray, IntegrationSummary]:
    """Constant step ``h``; the final step is shortened to land on ``t_final``.

    When ``t_final / h`` is an integer (to 1e-9) exactly that many equal steps
    are taken.  A defect is evaluated only if ``defect_kind`` asks for it.
    """
    if not h > 0:
        raise ValueError(f"fixed step must be positive, got {h}")
    if not t_final >= 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    scheme = get_scheme(scheme)
    p = scheme.p if p is None else p
    grid = problem.grid
    psi = problem.grid.check(np.asarray(psi0, dtype=complex))
    summary = IntegrationSummary(t_final=t_final)
    counter = ExpCounter()
    start = time.perf_counter()
    n = fixed_step_count(t_final, h) if t_final > 0 else 0
    if n and abs(t_final / h - n) < 1e-9 * max(1.0, n):
        h = t_final / n
    for i in range(n):
        t = i * h
        hi = h if i < n - 1 else t_final - t
        before = counter.snapshot()
        psi1, ws = step(psi, hi, scheme, problem, lanczos, counter, store_derivative_terms=defect_kind != "none")
        est = math.nan
        if defect_kind != "none":
            est = local_error_estimate(_defect(defect_kind, ws, psi, psi1, scheme, problem, lanczos), hi, p, grid)
        psi = psi1
        record = StepRecord(i, t, hi, est, True, 0, counter - before, norm=l2_norm(psi, grid))
        summary.accepted_steps += 1
        summary.h_min_used = min(summary.h_min_used, hi)
        summary.h_max_used = max(summary.h_max_used, hi)
        if sink is not None:
            sink(record)
    summary.exponentials = counter
    summary.wall_time = time.perf_counter() - start
    summary.final_norm = l2_norm(psi, grid)
    return psi, summary
