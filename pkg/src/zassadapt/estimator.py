"""scikit-learn style front end for the Zassenhaus integrator.

``fit`` binds a :class:`SemiclassicalProblem` and validates the
hyper-parameters; ``transform`` propagates one state or a stack of states
to ``t_final``.  Because the hyper-parameters live in ``__init__``,
``get_params``/``set_params``/``clone`` work and parameter sweeps can be
written with the usual tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .controller import ControllerConfig, integrate, propagate_fixed
from .exponentials import LanczosConfig
from .operators import SemiclassicalProblem
from .stepper import get_scheme

__all__ = ["ZassenhausPropagator", "check_states"]


def check_states(X, M: int) -> tuple[np.ndarray, bool]:
    """Coerce ``X`` to a complex ``(n, M)`` array of finite values.

    Returns the array and whether the input was a single 1-d state.
    """
    X = np.asarray(X)
    if X.dtype == object or not (np.issubdtype(X.dtype, np.number)):
        raise TypeError(f"wavefunctions must be numeric, got dtype {X.dtype}")
    single = X.ndim == 1
    X = np.atleast_2d(X).astype(complex, copy=True)
    if X.ndim != 2 or X.shape[1] != M:
        raise ValueError(f"expected states of length {M}, got array of shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("wavefunction contains NaN or Inf")
    return X, single


class ZassenhausPropagator(TransformerMixin, BaseEstimator):
    """Propagate wavefunctions with a symmetric Zassenhaus splitting.

    Parameters
    ----------
    scheme : {"zass6", "zass4"}
    stepping : {"adaptive", "fixed"}
    defect : {"classical", "symmetrized", "none"}
        Local error estimator.  ``"none"`` is only valid with fixed steps.
    tol, alpha, h0, h_min, h_max, max_rejections, max_growth
        Controller settings, see :class:`ControllerConfig`.
    fixed_h : float, optional
        Step size for ``stepping="fixed"``.
    t_final : float
        End of the integration interval.
    lanczos_tol : float, optional
        Krylov tolerance; defaults to ``tol / 100``.
    lanczos_m_max : int

    Attributes
    ----------
    problem_ : SemiclassicalProblem
    records_ : list of StepRecord
        Per-attempt records of the most recent propagation.
    summary_ : IntegrationSummary
        Summary of the most recent propagation.
    """

    def __init__(
        self,
        scheme="zass6",
        stepping="adaptive",
        defect="classical",
        tol=1e-7,
        alpha=0.1,
        h0=1e-9,
        fixed_h=None,
        h_min=1e-12,
        h_max=1.0,
        max_rejections=20,
        max_growth=5.0,
        t_final=1.0,
        lanczos_tol=None,
        lanczos_m_max=30,
    ):
        self.scheme = scheme
        self.stepping = stepping
        self.defect = defect
        self.tol = tol
        self.alpha = alpha
        self.h0 = h0
        self.fixed_h = fixed_h
        self.h_min = h_min
        self.h_max = h_max
        self.max_rejections = max_rejections
        self.max_growth = max_growth
        self.t_final = t_final
        self.lanczos_tol = lanczos_tol
        self.lanczos_m_max = lanczos_m_max

    def _validate(self):
        scheme = get_scheme(self.scheme)
        if self.stepping not in ("adaptive", "fixed"):
            raise ValueError(f"stepping must be 'adaptive' or 'fixed', got {self.stepping!r}")
        if self.defect not in ("classical", "symmetrized", "none"):
            raise ValueError(f"defect must be classical, symmetrized or none, got {self.defect!r}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        controller = None
        if self.stepping == "adaptive":
            if self.defect == "none":
                raise ValueError("adaptive stepping needs a defect estimator")
            controller = ControllerConfig(
                tol=self.tol,
                alpha=self.alpha,
                p=scheme.p,
                h0=self.h0,
                h_min=self.h_min,
                h_max=self.h_max,
                max_rejections=self.max_rejections,
                defect_kind=self.defect,
                max_growth=self.max_growth,
            )
        elif self.fixed_h is None or not self.fixed_h > 0:
            raise ValueError(f"fixed stepping requires fixed_h > 0, got {self.fixed_h}")
        lanczos_tol = self.tol / 100 if self.lanczos_tol is None else self.lanczos_tol
        lanczos = LanczosConfig(m_max=self.lanczos_m_max, tol=lanczos_tol)
        return scheme, controller, lanczos

    def fit(self, problem: SemiclassicalProblem, y=None):
        if not isinstance(problem, SemiclassicalProblem):
            raise TypeError(f"fit expects a SemiclassicalProblem, got {type(problem).__name__}")
        self.scheme_, self.controller_, self.lanczos_ = self._validate()
        self.problem_ = problem
        self.n_features_in_ = problem.grid.M
        return self

    def _propagate(self, psi0):
        records = []
        if self.t_final == 0:
            return psi0.copy(), None, records
        if self.stepping == "adaptive":
            psi, summary = integrate(
                psi0, self.t_final, self.scheme_, self.problem_, self.controller_, records.append, self.lanczos_
            )
        else:
            psi, summary = propagate_fixed(
                psi0, self.t_final, self.fixed_h, self.scheme_, self.problem_, self.lanczos_,
                self.defect, sink=records.append,
            )
        return psi, summary, records

    def transform(self, X):
        check_is_fitted(self, "problem_")
        X, single = check_states(X, self.problem_.grid.M)
        out = np.empty_like(X)
        self.summaries_ = []
        for i, psi0 in enumerate(X):
            out[i], summary, self.records_ = self._propagate(psi0)
            self.summaries_.append(summary)
        self.summary_ = self.summaries_[-1] if self.summaries_ else None
        return out[0] if single else out

    def score(self, X, y):
        """Negative mean discrete L2 distance between propagated ``X`` and ``y``."""
        pred = np.atleast_2d(self.transform(X))
        y, _ = check_states(y, self.problem_.grid.M)
        err = np.sqrt(self.problem_.grid.dx) * np.linalg.norm(pred - y, axis=1)
        return -float(err.mean())
