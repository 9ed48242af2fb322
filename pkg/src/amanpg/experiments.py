"""Synthetic data generators and evaluation metrics for the SPCA and sparse CCA benchmarks.

Randomness comes from numpy's Philox counter-based generator. Repetition
``rep`` of a run with master seed ``seed`` draws from the stream keyed by
``SeedSequence([seed, rep])``, so any single repetition can be regenerated in
isolation and on any platform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .manifold import NumericalError, sym_power

SUPPORT = (0, 5, 10, 15, 20)  # zero-based rows carrying the true canonical loadings
VECTOR_CORR = (0.9,)
MATRIX_CORR = (0.9, 0.8)


def rng_for(seed: int, rep: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))


class CovKind(enum.Enum):
    IDENTITY = "identity"
    TOEPLITZ = "toeplitz"
    SPARSE_INVERSE = "sparse-inverse"


@dataclass(frozen=True)
class CovarianceSpec:
    kind: CovKind
    p: int
    rho: float = 0.9  # Toeplitz only

    def __post_init__(self):
        object.__setattr__(self, "kind", CovKind(self.kind))
        if self.p < 1:
            raise ValueError("p must be positive")


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Dense covariance matrix for ``spec``; raises NumericalError if it is not PD."""
    p = spec.p
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    if spec.kind is CovKind.IDENTITY:
        S = np.eye(p)
    elif spec.kind is CovKind.TOEPLITZ:
        S = spec.rho ** lag.astype(float)
    else:
        omega = (lag == 0) + 0.5 * (lag == 1) + 0.4 * (lag == 2)
        S0 = np.linalg.inv(omega)
        d = np.sqrt(np.diag(S0))
        S = S0 / np.outer(d, d)
        S = 0.5 * (S + S.T)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{spec.kind.value} covariance is not positive definite") from exc
    return S


def gen_spca_data(n: int, p: int, seed: int, rep: int = 0) -> np.ndarray:
    """Standard normal ``n x p`` matrix, column-centered, scaled to unit maximum column norm."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    X = rng_for(seed, rep).standard_normal((n, p))
    X -= X.mean(axis=0)
    return X / np.linalg.norm(X, axis=0).max()


@dataclass(frozen=True)
class CcaGroundTruth:
    U: np.ndarray
    V: np.ndarray
    corr: np.ndarray  # diagonal of the true canonical correlations
    support: tuple[int, ...] = SUPPORT


def _sparse_loading(Sigma, r, rng, max_tries=100):
    p = Sigma.shape[0]
    idx = np.array(SUPPORT)
    for _ in range(max_tries):
        U = np.zeros((p, r))
        U[idx] = rng.integers(-2, 3, size=(idx.size, r))
        gram = U.T @ Sigma @ U
        if np.linalg.cond(gram) <= 1e8:
            return U @ sym_power(gram, -0.5)
    raise NumericalError(f"{max_tries} consecutive singular draws of the canonical loadings")


def gen_canonical_truth(
    Sigma_x: np.ndarray, Sigma_y: np.ndarray, r: int, seed: int, rep: int = 0,
    corr: tuple[float, ...] | None = None,
) -> CcaGroundTruth:
    """Sparse canonical loadings on rows 0, 5, 10, 15, 20 with entries from {-2, ..., 2}.

    Loadings are normalized so that ``U^T Sigma_x U = I`` and likewise for ``V``.
    Default correlations are 0.9 for ``r = 1`` and (0.9, 0.8) for ``r = 2``.
    """
    if min(Sigma_x.shape[0], Sigma_y.shape[0]) <= max(SUPPORT):
        raise ValueError(f"need p, q >= {max(SUPPORT) + 1}")
    if corr is None:
        defaults = {1: VECTOR_CORR, 2: MATRIX_CORR}
        if r not in defaults:
            raise ValueError("pass corr explicitly for r > 2")
        corr = defaults[r]
    if len(corr) != r:
        raise ValueError("need one correlation per canonical pair")
    rng = rng_for(seed, rep).spawn(1)[0]
    U = _sparse_loading(Sigma_x, r, rng)
    V = _sparse_loading(Sigma_y, r, rng)
    return CcaGroundTruth(U, V, np.asarray(corr, dtype=float))


def gen_cca_data(
    n: int, Sigma_x: np.ndarray, Sigma_y: np.ndarray, truth: CcaGroundTruth, seed: int, rep: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Joint normal sample with cross-covariance ``Sigma_x U diag(corr) V^T Sigma_y``.

    Both blocks are divided by ``sqrt(n - 1)``, so ``X^T Y`` estimates the cross-covariance.
    """
    p, q = Sigma_x.shape[0], Sigma_y.shape[0]
    Sxy = Sigma_x @ truth.U @ np.diag(truth.corr) @ truth.V.T @ Sigma_y
    joint = np.block([[Sigma_x, Sxy], [Sxy.T, Sigma_y]])
    try:
        Lc = np.linalg.cholesky(joint)
    except np.linalg.LinAlgError:
        lmin = float(np.linalg.eigvalsh(joint)[0])
        raise NumericalError(f"joint covariance is not PD (min eigenvalue {lmin:.3e})") from None
    Z = rng_for(seed, rep).standard_normal((n, p + q)) @ Lc.T
    Z /= np.sqrt(n - 1)
    return Z[:, :p].copy(), Z[:, p:].copy()


def loss_vector(u_hat: np.ndarray, u: np.ndarray) -> float:
    """``2 (1 - |<u_hat, u>|)`` after scaling both vectors to unit Euclidean norm."""
    a = np.ravel(u_hat)
    b = np.ravel(u)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("loss_vector needs nonzero vectors")
    return float(2.0 * (1.0 - min(1.0, abs(a @ b) / (na * nb))))


def _projector(U: np.ndarray) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[0] < U.shape[1]:
        U = U.T
    if np.linalg.matrix_rank(U) < U.shape[1]:
        raise ValueError("loss_subspace needs full column rank inputs")
    Q, _ = np.linalg.qr(U)
    return Q @ Q.T


def loss_subspace(U: np.ndarray, A: np.ndarray) -> float:
    """Squared Frobenius distance between the orthogonal projectors onto span(U) and span(A)."""
    return float(np.sum((_projector(U) - _projector(A)) ** 2))


def sparsity_stats(B: np.ndarray, thresh: float = 1e-4) -> tuple[float, int]:
    """Percentage of entries with magnitude below ``thresh`` and the count of the rest."""
    B = np.asarray(B)
    nz = int(np.count_nonzero(np.abs(B) >= thresh))
    if B.size == 0:
        return 100.0, 0
    return 100.0 * (B.size - nz) / B.size, nz


def canonical_correlations(X: np.ndarray, Y: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Diagonal of ``A^T X^T Y B``, signs kept."""
    A = np.asarray(A).reshape(X.shape[1], -1)
    B = np.asarray(B).reshape(Y.shape[1], -1)
    return np.einsum("ij,ij->j", X @ A, Y @ B)


def save_matrix(path: str | Path, M: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def load_matrix(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
