"""Sparse PCA and sparse CCA instances of the two-block problem."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .manifold import NumericalError, euclidean, generalized_stiefel, normalize, random_point, stiefel
from .penalty import ColumnElasticNet, RowL21, Zero
from .solver import ProblemSpec


@dataclass(frozen=True)
class SpcaConfig:
    """Elastic-net sparse PCA on a column-centered data matrix ``X`` (n x p)."""

    X: np.ndarray
    r: int
    mu: float
    mu1: tuple[float, ...] | float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        object.__setattr__(self, "X", X)
        mu1 = np.broadcast_to(np.asarray(self.mu1, dtype=float), (self.r,))
        object.__setattr__(self, "mu1", tuple(mu1.tolist()))
        n, p = X.shape
        if not 1 <= self.r <= min(n, p):
            raise ValueError(f"need 1 <= r <= min(n, p) = {min(n, p)}, got r={self.r}")

    @property
    def data_norm2(self) -> float:
        """``||X||_F^2``, the constant part of ``H``."""
        return float(np.sum(self.X * self.X))


@dataclass(frozen=True)
class SccaConfig:
    """Sparse CCA data. ``X`` and ``Y`` are assumed already divided by sqrt(n-1)."""

    X: np.ndarray
    Y: np.ndarray
    r: int
    tau1: float
    tau2: float
    alpha: float = 1e-4
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "Y", np.asarray(self.Y, dtype=float))
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y need the same number of rows")
        if self.r < 1:
            raise ValueError("r must be positive")

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def Mx(self) -> np.ndarray:
        return self._get("Mx", lambda: _metric(self.X, self.alpha))

    @property
    def My(self) -> np.ndarray:
        return self._get("My", lambda: _metric(self.Y, self.alpha))

    @property
    def Sxy(self) -> np.ndarray:
        return self._get("Sxy", lambda: self.X.T @ self.Y)


def _metric(Z: np.ndarray, alpha: float) -> np.ndarray:
    M = (1.0 - alpha) * (Z.T @ Z)
    M[np.diag_indices_from(M)] += alpha
    return M


def lambda_max(X: np.ndarray) -> float:
    """Largest eigenvalue of ``X^T X`` by Lanczos iteration on ``v -> X^T (X v)``."""
    n, p = X.shape
    if min(n, p) <= 50:
        return float(np.linalg.norm(X, 2) ** 2)
    op = LinearOperator((p, p), matvec=lambda v: X.T @ (X @ v), dtype=float)
    v0 = np.ones(p) / np.sqrt(p)
    return float(eigsh(op, k=1, which="LA", v0=v0, tol=1e-10, return_eigenvectors=False)[0])


def spca_problem(
    cfg: SpcaConfig, t1: float | None = None, t2: float | None = None, debug: bool = False
) -> ProblemSpec:
    """``H(A, B) = ||X - X B A^T||_F^2``, ``f = 0``, ``g`` = column elastic net.

    ``A`` lives on the Stiefel manifold and ``B`` is unconstrained. Default
    steps are ``t1 = 100 / p`` and ``t2 = 1 / (2 lambda_max(X^T X))``.
    """
    X = cfg.X
    n, p = X.shape
    r = cfg.r
    if n > p:
        gram = X.T @ X
        sig = lambda Z: gram @ Z  # noqa: E731
    else:
        sig = lambda Z: X.T @ (X @ Z)  # noqa: E731
    trace_sigma = cfg.data_norm2

    def eval_H(A, B):
        SB = sig(B)
        return float(trace_sigma - 2.0 * np.sum(A * SB) + np.sum((B.T @ SB) * (A.T @ A)))

    def grad_A(A, B):
        SB = sig(B)
        return -2.0 * SB + 2.0 * A @ (B.T @ SB)

    def grad_B(A, B):
        return -2.0 * sig(A) + 2.0 * sig(B @ (A.T @ A))

    if t1 is None:
        t1 = 100.0 / p
    if t2 is None:
        t2 = 1.0 / (2.0 * lambda_max(X))
    problem = ProblemSpec(
        eval_H, grad_A, grad_B,
        f=Zero(),
        g=ColumnElasticNet(cfg.mu, cfg.mu1),
        man_A=stiefel(p, r),
        man_B=euclidean(p, r),
        t1=t1, t2=t2,
    )
    if debug:
        _assert_gradients(problem)
    return problem


def spca_init(cfg: SpcaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Leading ``r`` right singular vectors of ``X`` for both blocks."""
    _, _, Vt = np.linalg.svd(cfg.X, full_matrices=False)
    A0 = Vt[: cfg.r].T.copy()
    return A0, A0.copy()


def scca_problem(cfg: SccaConfig, debug: bool = False) -> ProblemSpec:
    """``H(A, B) = -tr(A^T X^T Y B)`` with row-wise l2,1 penalties.

    Both blocks live on generalized Stiefel manifolds with metrics
    ``(1 - alpha) X^T X + alpha I`` and the analogue for ``Y``; ``t1 = t2 = 1``.
    """
    S = cfg.Sxy
    try:
        man_A = generalized_stiefel(cfg.Mx, cfg.r)
        man_B = generalized_stiefel(cfg.My, cfg.r)
    except NumericalError as exc:
        raise NumericalError(f"CCA metric is not positive definite: {exc}") from exc

    def eval_H(A, B):
        return float(-np.sum(A * (S @ B)))

    def grad_A(A, B):
        return -(S @ B)

    def grad_B(A, B):
        return -(S.T @ A)

    problem = ProblemSpec(
        eval_H, grad_A, grad_B,
        f=RowL21(cfg.tau1),
        g=RowL21(cfg.tau2),
        man_A=man_A,
        man_B=man_B,
        t1=1.0, t2=1.0,
    )
    if debug:
        _assert_gradients(problem)
    return problem


def scca_init(cfg: SccaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Truncated-SVD initializer.

    Entries of ``X^T Y`` smaller in magnitude than its largest diagonal entry
    are zeroed; the top ``r`` singular pairs of the result are then normalized
    onto the two generalized Stiefel manifolds.
    """
    S = cfg.Sxy.copy()
    thresh = np.abs(np.diag(S)).max()
    S[np.abs(S) < thresh] = 0.0
    if not S.any():
        warnings.warn("truncation removed every entry of X^T Y; using it untruncated", RuntimeWarning)
        S = cfg.Sxy.copy()
    U, _, Vt = np.linalg.svd(S, full_matrices=False)
    A0 = U[:, : cfg.r]
    B0 = Vt[: cfg.r].T
    man_A = generalized_stiefel(cfg.Mx, cfg.r)
    man_B = generalized_stiefel(cfg.My, cfg.r)
    return normalize(man_A, A0), normalize(man_B, B0)


def scca_canonical_form(cfg: SccaConfig, A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate ``(A, B)`` so that ``A^T X^T Y B`` is diagonal with decreasing entries.

    The objective and the row-wise penalties only see the column spaces, so a
    solution is determined up to ``A Q, B Q``. Rotating by the singular vectors
    of ``A^T X^T Y B`` keeps both iterates feasible and leaves the penalties
    and row supports untouched, and it can only lower ``-tr(A^T X^T Y B)``.
    """
    U, _, Vt = np.linalg.svd(A.T @ (cfg.Sxy @ B))
    return A @ U, B @ Vt.T


def fd_gradient(fn, Z: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Entrywise central-difference gradient of a scalar function of a matrix."""
    G = np.zeros_like(Z)
    for idx in np.ndindex(Z.shape):
        E = np.zeros_like(Z)
        E[idx] = h
        G[idx] = (fn(Z + E) - fn(Z - E)) / (2 * h)
    return G


def gradient_errors(problem: ProblemSpec, A: np.ndarray, B: np.ndarray, h: float = 1e-6) -> tuple[float, float]:
    """Relative errors of ``grad_A`` and ``grad_B`` against central differences of ``H``."""
    gA = fd_gradient(lambda Z: problem.eval_H(Z, B), A, h)
    gB = fd_gradient(lambda Z: problem.eval_H(A, Z), B, h)
    eA = np.linalg.norm(problem.grad_A(A, B) - gA) / max(np.linalg.norm(gA), 1e-12)
    eB = np.linalg.norm(problem.grad_B(A, B) - gB) / max(np.linalg.norm(gB), 1e-12)
    return float(eA), float(eB)


def random_feasible(problem: ProblemSpec, rng: np.random.Generator):
    return random_point(problem.man_A, rng), random_point(problem.man_B, rng)


def _assert_gradients(problem: ProblemSpec, tol: float = 1e-5) -> None:
    A, B = random_feasible(problem, np.random.default_rng(0))
    errs = gradient_errors(problem, A, B)
    if max(errs) > tol:
        raise AssertionError(f"gradient check failed: relative errors {errs}")
