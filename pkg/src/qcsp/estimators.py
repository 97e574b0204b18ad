"""scikit-learn style wrappers around the functional API.

``fit`` takes an instance (the "data"); reducers are transformers mapping
source assignments to reduced-instance assignments and back.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .assignments import ObservableAssignment, PvmAssignment, eval_lin_observable_value
from .instances import LabelCoverInstance, LinInstance
from .projectivize import projectivize_assignment
from .reductions import (
    fold_2lin,
    lift_completeness_2lin,
    lift_completeness_maxcut,
    reduce_ulc_to_2lin,
    reduce_ulc_to_maxcut,
)
from .sdp import gw_round, solve_maxcut_sdp, tsirelson_assignment
from .soundness import MaxCutParams, TwoLinParams, run_soundness_2lin, run_soundness_maxcut


def _check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class MaxCutSDP(BaseEstimator):
    """Vector relaxation of a 2-Lin / MaxCut instance.

    Attributes
    ----------
    factor_ : GramFactor
    value_ : float
    restart_values_ : list of float
    """

    def __init__(self, restarts: int = 5, tol: float = 1e-9, random_state: int = 0):
        self.restarts = restarts
        self.tol = tol
        self.random_state = random_state

    def fit(self, X: LinInstance, y=None):
        res = solve_maxcut_sdp(X, tol=self.tol, restarts=self.restarts, seed=self.random_state)
        self.factor_ = res.factor
        self.value_ = res.value
        self.restart_values_ = res.restart_values
        return self

    def score(self, X=None, y=None) -> float:
        _check_fitted(self, "value_")
        return self.value_

    def observables(self) -> ObservableAssignment:
        """Noncommutative observables realizing the relaxation value."""
        _check_fitted(self, "factor_")
        return tsirelson_assignment(self.factor_)


class GoemansWilliamson(MaxCutSDP):
    """Relaxation followed by random-hyperplane rounding; ``predict`` returns labels in ``{0, 1}``."""

    def __init__(self, restarts: int = 5, tol: float = 1e-9, random_state: int = 0, samples: int = 10_000):
        super().__init__(restarts=restarts, tol=tol, random_state=random_state)
        self.samples = samples

    def fit(self, X: LinInstance, y=None):
        super().fit(X)
        res = gw_round(X, self.factor_, self.samples, np.random.default_rng(self.random_state))
        self.labeling_ = res.labeling
        self.cut_value_ = res.best_value
        self.mean_cut_ = res.mean_value
        return self

    def predict(self, X=None) -> np.ndarray:
        _check_fitted(self, "labeling_")
        return self.labeling_


class TwoLinReducer(BaseEstimator, TransformerMixin):
    """ULC to 2-Lin. ``transform`` lifts a quantum PVM assignment; ``inverse_transform`` extracts one back."""

    def __init__(self, eps: float = 0.1, t: float = 0.75, bt_const: float = 1.0):
        self.eps = eps
        self.t = t
        self.bt_const = bt_const

    def fit(self, X: LabelCoverInstance, y=None):
        self.reduction_ = reduce_ulc_to_2lin(X, self.eps)
        self.folded_ = fold_2lin(self.reduction_)
        return self

    def transform(self, X: PvmAssignment) -> ObservableAssignment:
        _check_fitted(self, "reduction_")
        return lift_completeness_2lin(self.reduction_, X)

    def inverse_transform(self, X: ObservableAssignment) -> PvmAssignment:
        _check_fitted(self, "reduction_")
        report = run_soundness_2lin(self.reduction_, X, TwoLinParams(self.eps, self.t, self.bt_const))
        self.report_ = report
        if report.projectivized is None:
            raise ValueError("; ".join(report.failures))
        return report.projectivized

    def score(self, X: ObservableAssignment, y=None) -> float:
        _check_fitted(self, "reduction_")
        return eval_lin_observable_value(self.reduction_.psi, X)


class MaxCutReducer(BaseEstimator, TransformerMixin):
    """ULC to MaxCut. ``transform`` lifts a weak-quantum PVM assignment of the source."""

    def __init__(self, rho: float = -0.5, eps: float = 0.05, delta2: float = 0.01, k_mis: int = 10):
        self.rho = rho
        self.eps = eps
        self.delta2 = delta2
        self.k_mis = k_mis

    def fit(self, X: LabelCoverInstance, y=None):
        self.reduction_ = reduce_ulc_to_maxcut(X, self.rho)
        return self

    def transform(self, X: PvmAssignment) -> ObservableAssignment:
        _check_fitted(self, "reduction_")
        return lift_completeness_maxcut(self.reduction_, X)

    def inverse_transform(self, X: ObservableAssignment) -> PvmAssignment:
        _check_fitted(self, "reduction_")
        report = run_soundness_maxcut(self.reduction_, X, MaxCutParams(self.eps, self.rho, self.delta2, self.k_mis))
        self.report_ = report
        if report.projectivized is None:
            raise ValueError("; ".join(report.failures))
        return report.projectivized

    def score(self, X: ObservableAssignment, y=None) -> float:
        _check_fitted(self, "reduction_")
        return eval_lin_observable_value(self.reduction_.psi, X)


class Projectivizer(BaseEstimator, TransformerMixin):
    """Rounds self-commuting POVM assignments of the fitted instance to PVM assignments."""

    def fit(self, X, y=None):
        self.instance_ = X
        return self

    def transform(self, X: PvmAssignment) -> PvmAssignment:
        _check_fitted(self, "instance_")
        res = projectivize_assignment(self.instance_, X)
        self.history_ = [res.initial_value] + res.history
        return res.assignment
