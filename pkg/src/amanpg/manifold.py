"""Euclidean, Stiefel and generalized Stiefel manifolds.

Points are dense ``p x r`` arrays. The generalized Stiefel manifold is
``{X : X^T M X = I_r}`` for a symmetric positive-definite ``M``; the plain
Stiefel manifold is the special case ``M = I``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


class DimensionError(ValueError):
    """Array shapes do not match the manifold."""


class NumericalError(ArithmeticError):
    """A factorization needed by a manifold operation broke down."""


class Kind(enum.Enum):
    EUCLIDEAN = "euclidean"
    STIEFEL = "stiefel"
    GENERALIZED_STIEFEL = "generalized_stiefel"


class Retraction(enum.Enum):
    POLAR = "polar"
    QR = "qr"
    CAYLEY = "cayley"


_EIG_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class ManifoldDescriptor:
    """Immutable description of the constraint set for one block variable.

    Use :func:`euclidean`, :func:`stiefel` or :func:`generalized_stiefel`
    rather than calling the constructor directly.
    """

    kind: Kind
    p: int
    r: int
    M: np.ndarray | None = None
    chol: np.ndarray | None = field(default=None, repr=False)

    @property
    def metric(self) -> np.ndarray | None:
        """The metric matrix, or ``None`` for identity/no constraint."""
        return self.M if self.kind is Kind.GENERALIZED_STIEFEL else None

    def apply_metric(self, X: np.ndarray) -> np.ndarray:
        return X if self.M is None else self.M @ X

    def _check_shape(self, X: np.ndarray, name: str = "X") -> None:
        if X.shape != (self.p, self.r):
            raise DimensionError(
                f"{name} has shape {X.shape}, expected {(self.p, self.r)}"
            )


def euclidean(p: int, r: int) -> ManifoldDescriptor:
    _check_dims(p, r)
    return ManifoldDescriptor(Kind.EUCLIDEAN, p, r)


def stiefel(p: int, r: int) -> ManifoldDescriptor:
    _check_dims(p, r)
    return ManifoldDescriptor(Kind.STIEFEL, p, r)


def generalized_stiefel(M: np.ndarray, r: int) -> ManifoldDescriptor:
    """Generalized Stiefel manifold ``{X : X^T M X = I_r}``.

    Raises:
        DimensionError: if ``M`` is not square or ``r > p``.
        NumericalError: if ``M`` is not symmetric positive definite.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"metric must be square, got {M.shape}")
    p = M.shape[0]
    _check_dims(p, r)
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise NumericalError("metric matrix is not symmetric")
    M = 0.5 * (M + M.T)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("metric matrix is not positive definite") from exc
    M.setflags(write=False)
    L.setflags(write=False)
    return ManifoldDescriptor(Kind.GENERALIZED_STIEFEL, p, r, M, L)


def _check_dims(p: int, r: int) -> None:
    if p < 1 or r < 1:
        raise DimensionError("dimensions must be positive")
    if r > p:
        raise DimensionError(f"r={r} exceeds p={p}")


def sym(Z: np.ndarray) -> np.ndarray:
    return 0.5 * (Z + Z.T)


def sym_power(S: np.ndarray, power: float) -> np.ndarray:
    """``S**power`` for a symmetric positive-definite matrix via eigendecomposition."""
    w, Q = np.linalg.eigh(sym(S))
    if w.min() <= _EIG_FLOOR * max(1.0, w.max()):
        raise NumericalError(f"matrix is (numerically) singular: min eigenvalue {w.min():.3e}")
    return (Q * w**power) @ Q.T


def check_point(man: ManifoldDescriptor, X: np.ndarray) -> float:
    """Feasibility residual ``||X^T M X - I||_F`` (zero for Euclidean)."""
    X = np.asarray(X, dtype=float)
    man._check_shape(X)
    if man.kind is Kind.EUCLIDEAN:
        return 0.0
    G = X.T @ man.apply_metric(X)
    return float(np.linalg.norm(G - np.eye(man.r)))


def tangent_residual(man: ManifoldDescriptor, X: np.ndarray, D: np.ndarray) -> float:
    """``||D^T M X + X^T M D||_F``; zero exactly when D is tangent at X."""
    if man.kind is Kind.EUCLIDEAN:
        return 0.0
    C = D.T @ man.apply_metric(X)
    return float(np.linalg.norm(C + C.T))


def normal_coefficient(man: ManifoldDescriptor, X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Symmetric ``S`` such that ``G - M X S`` is the tangent projection of ``G``.

    Solves ``K S + S K = X^T M G + G^T M X`` with ``K = X^T M^2 X``.
    """
    MX = man.apply_metric(X)
    C = MX.T @ G
    C = C + C.T
    if man.kind is Kind.STIEFEL:
        # K = I here, so S is just half of C.
        return 0.5 * C
    K = sym(MX.T @ MX)
    w, Q = np.linalg.eigh(K)
    if w.min() <= _EIG_FLOOR * max(1.0, w.max()):
        raise NumericalError("M X is rank deficient; tangent projection undefined")
    Ct = Q.T @ C @ Q
    St = Ct / (w[:, None] + w[None, :])
    return sym(Q @ St @ Q.T)


def project_tangent(man: ManifoldDescriptor, X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Orthogonal (Frobenius) projection of ``G`` onto the tangent space at ``X``."""
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    man._check_shape(X)
    man._check_shape(G, "G")
    if man.kind is Kind.EUCLIDEAN:
        return G.copy()
    S = normal_coefficient(man, X, G)
    return G - man.apply_metric(X) @ S


def retract(
    man: ManifoldDescriptor,
    X: np.ndarray,
    xi: np.ndarray,
    kind: Retraction | str = Retraction.POLAR,
) -> np.ndarray:
    """Map the tangent vector ``xi`` at ``X`` back onto the manifold.

    Polar is available everywhere; QR and Cayley only on the plain Stiefel
    manifold. On the generalized Stiefel manifold the polar retraction uses
    the thin SVD ``Y = U S V^T`` of ``Y = X + xi`` and returns
    ``U (U^T M U)^{-1/2} V^T``.
    """
    kind = Retraction(kind)
    X = np.asarray(X, dtype=float)
    xi = np.asarray(xi, dtype=float)
    man._check_shape(X)
    man._check_shape(xi, "xi")
    if man.kind is Kind.EUCLIDEAN:
        return X + xi
    if man.kind is Kind.GENERALIZED_STIEFEL and kind is not Retraction.POLAR:
        raise ValueError(f"{kind.value} retraction is only defined on the Stiefel manifold")
    if not xi.any():
        return X.copy()

    Y = X + xi
    if kind is Retraction.POLAR:
        if man.kind is Kind.STIEFEL:
            # Y^T Y equals I + xi^T xi for tangent xi; using Y^T Y keeps the
            # output exactly feasible even if xi drifted off the tangent space.
            return Y @ sym_power(Y.T @ Y, -0.5)
        U, s, Vt = np.linalg.svd(Y, full_matrices=False)
        if s.min() <= _EIG_FLOOR * max(1.0, s.max()):
            raise NumericalError("X + xi is rank deficient")
        return U @ sym_power(U.T @ (man.M @ U), -0.5) @ Vt
    if kind is Retraction.QR:
        Q, R = np.linalg.qr(Y)
        d = np.sign(np.diag(R))
        if np.any(d == 0):
            raise NumericalError("X + xi is rank deficient")
        return Q * d
    return _cayley(X, xi)


def _cayley(X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    p = X.shape[0]
    P = np.eye(p) - 0.5 * X @ X.T
    W = P @ xi @ X.T - X @ xi.T @ P
    eye = np.eye(p)
    return np.linalg.solve(eye - 0.5 * W, (eye + 0.5 * W) @ X)


def random_point(man: ManifoldDescriptor, rng: np.random.Generator) -> np.ndarray:
    """A random feasible point: QR of a Gaussian draw, mapped through ``L^{-T}`` when ``M = L L^T``."""
    Z = rng.standard_normal((man.p, man.r))
    if man.kind is Kind.EUCLIDEAN:
        return Z
    Q, _ = np.linalg.qr(Z)
    if man.kind is Kind.STIEFEL:
        return Q
    return solve_triangular(man.chol, Q, lower=True, trans="T")


def normalize(man: ManifoldDescriptor, Z: np.ndarray) -> np.ndarray:
    """``Z (Z^T M Z)^{-1/2}``: a feasible point with the same column space as Z."""
    if man.kind is Kind.EUCLIDEAN:
        return np.array(Z, dtype=float)
    return Z @ sym_power(Z.T @ man.apply_metric(Z), -0.5)
