"""Estimator-style wrappers around the solvers."""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from . import functionals as fn
from .convexfn import linear_from_vector, normalize
from .optimizer import SolverConfig, canonical_distribution, optimize_vector
from .polytope import ToricSystem, system_from_dict


def check_system(S):
    """Accept a ToricSystem or its dict form."""
    if isinstance(S, ToricSystem):
        return S
    if isinstance(S, dict):
        return system_from_dict(S)
    raise TypeError(f"expected a ToricSystem or system dict, got {type(S).__name__}")


def check_points(X, dim):
    """2-D finite float array with ``dim`` columns."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != dim:
        raise ValueError(f"expected {dim} columns, got {X.shape[1]}")
    return X


class CanonicalDistribution(BaseEstimator):
    """Canonical distribution of a system at temperature ``T``.

    ``fit(S)`` solves for the minimizer of the free mu-energy; ``predict(X)``
    evaluates its density; ``score`` is ``-F``.
    """

    def __init__(self, T=0.0, pieces=10, starts=4, seed=0, f_tol=1e-6, max_iters=500):
        self.T = T
        self.pieces = pieces
        self.starts = starts
        self.seed = seed
        self.f_tol = f_tol
        self.max_iters = max_iters

    def _config(self):
        ks = tuple(k for k in SolverConfig.piece_schedule if k <= self.pieces) or (1,)
        return SolverConfig(pieces=self.pieces, piece_schedule=ks, starts=self.starts,
                            seed=self.seed, f_tol=self.f_tol, max_iters=self.max_iters)

    def fit(self, S, y=None):
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T >= 0):
            raise ValueError("T must be a finite nonnegative number")
        S = check_system(S)
        res = canonical_distribution(S, float(self.T), self._config())
        self.system_ = S
        self.q_ = res.q_star
        self.state_ = res.u_star
        self.report_ = res.report
        self.result_ = res
        self.n_features_in_ = S.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        return self.state_.density(check_points(X, self.n_features_in_))

    def score(self, S=None, y=None):
        check_is_fitted(self, "report_")
        if S is None:
            return -self.report_.F
        return -fn.report(check_system(S), self.q_, T=float(self.T)).F


class OptimalVector(BaseEstimator):
    """Critical vector of the NA mu-entropy restricted to linear functions."""

    def __init__(self, lam=0.0, tol=1e-8, max_iters=100):
        self.lam = lam
        self.tol = tol
        self.max_iters = max_iters

    def fit(self, S, y=None):
        S = check_system(S)
        xi, value = optimize_vector(S, float(self.lam), tol=self.tol, max_iters=self.max_iters)
        self.system_ = S
        self.xi_ = xi
        self.value_ = value
        self.q_ = linear_from_vector(xi)
        self.state_ = normalize(S, self.q_)
        self.n_features_in_ = S.dim
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        return self.state_.density(check_points(X, self.n_features_in_))

    def score(self, S=None, y=None):
        check_is_fitted(self, "value_")
        return self.value_
