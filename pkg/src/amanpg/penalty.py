"""Convex nonsmooth penalties with closed-form proximal maps.

Each penalty exposes ``value``, ``prox`` and ``jacobian_apply``. The latter
applies one element of the generalized Jacobian of ``prox(., t)`` at a point,
which is what the semi-smooth Newton subproblem solver needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import DimensionError


def soft_threshold(X: np.ndarray, thresh) -> np.ndarray:
    return np.sign(X) * np.maximum(np.abs(X) - thresh, 0.0)


def _check_step(t: float) -> None:
    if not t > 0:
        raise ValueError(f"prox step must be positive, got {t}")


class Penalty:
    """Base class; subclasses are immutable dataclasses."""

    def value(self, X: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, X: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def jacobian_apply(self, X: np.ndarray, t: float, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class Zero(Penalty):
    def value(self, X):
        return 0.0

    def prox(self, X, t):
        _check_step(t)
        return np.array(X, dtype=float)

    def jacobian_apply(self, X, t, V):
        _check_step(t)
        return np.array(V, dtype=float)

    @property
    def is_zero(self):
        return True


@dataclass(frozen=True)
class L1(Penalty):
    """``tau * sum |X_ij|``."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    def value(self, X):
        return float(self.tau * np.abs(X).sum())

    def prox(self, X, t):
        _check_step(t)
        return soft_threshold(np.asarray(X, dtype=float), t * self.tau)

    def jacobian_apply(self, X, t, V):
        _check_step(t)
        return np.where(np.abs(X) > t * self.tau, V, 0.0)


@dataclass(frozen=True)
class RowL21(Penalty):
    """``tau * sum_j ||X_j.||_2`` over rows (group lasso on rows)."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    def value(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return float(self.tau * np.abs(X).sum())
        return float(self.tau * np.linalg.norm(X, axis=1).sum())

    def prox(self, X, t):
        _check_step(t)
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 or X.shape[1] == 1:
            # row norms are magnitudes; soft-threshold is exact here
            return soft_threshold(X, t * self.tau)
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        thr = t * self.tau
        scale = np.zeros_like(norms)
        active = norms > thr
        scale[active] = 1.0 - thr / norms[active]
        return X * scale

    def jacobian_apply(self, X, t, V):
        """Row-wise ``I - (t tau/||b||)(I - b b^T/||b||^2)`` on active rows, 0 elsewhere."""
        _check_step(t)
        X = np.asarray(X, dtype=float)
        V = np.asarray(V, dtype=float)
        if X.ndim == 1 or X.shape[1] == 1:
            return np.where(np.abs(X) > t * self.tau, V, 0.0)
        thr = t * self.tau
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        active = norms > thr
        safe = np.where(active, norms, 1.0)
        radial = X * (np.sum(X * V, axis=1, keepdims=True) / safe**2)
        W = V - (thr / safe) * (V - radial)
        return np.where(active, W, 0.0)


@dataclass(frozen=True)
class ColumnElasticNet(Penalty):
    """``mu * ||X||_F^2 + sum_j mu1[j] * ||X_.j||_1`` (per-column lasso weights)."""

    mu: float
    mu1: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mu1", tuple(float(v) for v in np.atleast_1d(self.mu1)))
        if self.mu < 0 or min(self.mu1) < 0:
            raise ValueError("elastic-net weights must be nonnegative")

    def _weights(self, X: np.ndarray) -> np.ndarray:
        w = np.asarray(self.mu1)
        ncol = 1 if X.ndim == 1 else X.shape[1]
        if w.size != ncol:
            raise DimensionError(f"mu1 has {w.size} weights for {ncol} columns")
        return w if X.ndim == 2 else w[0]

    def value(self, X):
        X = np.asarray(X, dtype=float)
        w = self._weights(X)
        return float(self.mu * np.sum(X * X) + np.sum(w * np.abs(X).sum(axis=0)))

    def prox(self, X, t):
        _check_step(t)
        X = np.asarray(X, dtype=float)
        w = self._weights(X)
        return soft_threshold(X, t * w) / (1.0 + 2.0 * t * self.mu)

    def jacobian_apply(self, X, t, V):
        _check_step(t)
        X = np.asarray(X, dtype=float)
        w = self._weights(X)
        return np.where(np.abs(X) > t * w, V, 0.0) / (1.0 + 2.0 * t * self.mu)
