"""Regularized semi-smooth Newton solver for the tangent-space proximal subproblem.

For a feasible ``X`` on a (generalized) Stiefel manifold with metric ``M``,
gradient ``G``, step ``t`` and penalty ``f`` the subproblem is::

    min_D <G, D> + ||D||_F^2 / (2t) + f(X + D)   s.t.  D^T M X + X^T M D = 0.

Its KKT conditions give ``D(L) = prox_{tf}(X - t(G - 2 M X L)) - X`` for a
symmetric multiplier ``L``, and ``L`` is the root of the symmetric residual
``E(L) = D(L)^T M X + X^T M D(L)``. Multipliers are handled in packed
lower-triangular form (``svec``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .manifold import Kind, ManifoldDescriptor, NumericalError, normal_coefficient
from .penalty import Penalty

logger = logging.getLogger(__name__)

_DENSE_MAX = 21  # r <= 6


@lru_cache(maxsize=None)
def _tril_index(r: int) -> tuple[np.ndarray, np.ndarray]:
    # column-major lower triangle: (0,0), (1,0), ..., (r-1,0), (1,1), ...
    rows, cols = [], []
    for j in range(r):
        for i in range(j, r):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def svec_length(r: int) -> int:
    return r * (r + 1) // 2


def svec(L: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Pack a symmetric matrix into its column-major lower triangle."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {L.shape}")
    if not np.allclose(L, L.T, rtol=0.0, atol=atol):
        raise ValueError("matrix is not symmetric")
    rows, cols = _tril_index(L.shape[0])
    return L[rows, cols].copy()


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    r = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if svec_length(r) != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    rows, cols = _tril_index(r)
    L = np.zeros((r, r))
    L[rows, cols] = v
    L[cols, rows] = v
    return L


def duplication_matrix(r: int) -> np.ndarray:
    """Explicit ``r^2 x r(r+1)/2`` matrix with ``U @ svec(L) == vec(L)`` (column-major vec)."""
    rows, cols = _tril_index(r)
    U = np.zeros((r * r, rows.size))
    for k, (i, j) in enumerate(zip(rows, cols)):
        U[i + j * r, k] = 1.0
        U[j + i * r, k] = 1.0
    return U


def svec_weights(r: int) -> np.ndarray:
    """Diagonal of ``U^T U``: 1 for diagonal entries, 2 for off-diagonal ones.

    ``<smat(a), smat(b)>_F == a @ (w * b)``.
    """
    rows, cols = _tril_index(r)
    return np.where(rows == cols, 1.0, 2.0)


@dataclass(frozen=True)
class SubproblemInput:
    man: ManifoldDescriptor
    X: np.ndarray
    G: np.ndarray
    t: float
    pen: Penalty
    tol: float = 1e-5
    max_newton: int = 100

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("step size t must be positive")


@dataclass
class SubproblemResult:
    D: np.ndarray
    lam: np.ndarray  # svec of the multiplier
    residual: float
    iters: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def Lambda(self) -> np.ndarray:
        return smat(self.lam) if self.lam.size else np.zeros((0, 0))


def _MX(inp: SubproblemInput) -> np.ndarray:
    return inp.man.apply_metric(inp.X)


def _B(L: np.ndarray, inp: SubproblemInput, MX: np.ndarray) -> np.ndarray:
    return inp.X - inp.t * (inp.G - 2.0 * MX @ L)


def direction(L: np.ndarray, inp: SubproblemInput, MX: np.ndarray | None = None) -> np.ndarray:
    """``D(L) = prox(B(L), t) - X``."""
    MX = _MX(inp) if MX is None else MX
    return inp.pen.prox(_B(L, inp, MX), inp.t) - inp.X


def residual_E(L: np.ndarray, inp: SubproblemInput, MX: np.ndarray | None = None) -> np.ndarray:
    """Symmetric residual ``D(L)^T M X + X^T M D(L)`` for a full symmetric ``L``."""
    MX = _MX(inp) if MX is None else MX
    C = direction(L, inp, MX).T @ MX
    return C + C.T


def jacobian_matvec(
    L: np.ndarray, d: np.ndarray, inp: SubproblemInput, MX: np.ndarray | None = None
) -> np.ndarray:
    """Directional derivative of ``svec(E(smat(.)))`` at ``svec(L)`` along ``d``.

    Matrix-free: ``dB = 2t M X smat(d)``, ``dD = J dB`` with ``J`` the selected
    generalized Jacobian of the prox at ``B(L)``, ``dE = dD^T M X + X^T M dD``.
    """
    MX = _MX(inp) if MX is None else MX
    B = _B(L, inp, MX)
    dB = 2.0 * inp.t * (MX @ smat(d))
    dD = inp.pen.jacobian_apply(B, inp.t, dB)
    C = dD.T @ MX
    return svec(C + C.T)


def _newton_matrix(L, inp, MX) -> np.ndarray:
    m = svec_length(inp.man.r)
    cols = [jacobian_matvec(L, e, inp, MX) for e in np.eye(m)]
    return np.column_stack(cols)


def _newton_direction(L, e, eta, inp, MX) -> np.ndarray:
    """Solve ``(G + eta I) d = -e``.

    Both sides are scaled by ``W = diag(svec_weights)``; ``W G`` is symmetric
    positive semi-definite, so the scaled system is SPD and suits CG.
    """
    r = inp.man.r
    w = svec_weights(r)
    m = w.size
    if m <= _DENSE_MAX:
        H = w[:, None] * _newton_matrix(L, inp, MX)
        H = 0.5 * (H + H.T) + eta * np.diag(w)
        return np.linalg.solve(H, -w * e)

    def mv(v):
        return w * jacobian_matvec(L, v, inp, MX) + eta * w * v

    op = LinearOperator((m, m), matvec=mv, dtype=float)
    d, _ = cg(op, -w * e, rtol=1e-10, maxiter=10 * m)
    return d


def solve(inp: SubproblemInput, lam0: np.ndarray | None = None) -> SubproblemResult:
    """Solve the subproblem.

    Args:
        inp: subproblem data.
        lam0: optional packed warm start for the multiplier (zero if omitted).

    Returns:
        SubproblemResult. ``converged`` is False when ``max_newton`` is hit; in
        that case the best multiplier seen is returned.

    Raises:
        NumericalError: if the residual becomes NaN.
    """
    man = inp.man
    X, G, t, pen = inp.X, inp.G, inp.t, inp.pen

    if man.kind is Kind.EUCLIDEAN:
        D = pen.prox(X - t * G, t) - X
        return SubproblemResult(D, np.zeros(0), 0.0, 0, True)

    if pen.is_zero:
        S = normal_coefficient(man, X, G)
        D = -t * (G - man.apply_metric(X) @ S)
        return SubproblemResult(D, svec(0.5 * S, atol=np.inf), 0.0, 0, True)

    MX = _MX(inp)
    m = svec_length(man.r)
    lam = np.zeros(m) if lam0 is None or lam0.size != m else np.array(lam0, dtype=float)
    E = residual_E(smat(lam), inp, MX)
    res = float(np.linalg.norm(E))
    history = [res]
    best = (res, lam.copy())
    iters = 0
    while res > inp.tol and iters < inp.max_newton:
        if not np.isfinite(res):
            raise NumericalError("semi-smooth Newton residual is not finite")
        iters += 1
        L = smat(lam)
        eta = min(0.1, res)
        d = _newton_direction(L, svec(E), eta, inp, MX)
        beta = 1.0
        for _ in range(21):
            trial = lam + beta * d
            E_trial = residual_E(smat(trial), inp, MX)
            res_trial = float(np.linalg.norm(E_trial))
            if res_trial <= (1.0 - 1e-4 * beta) * res:
                break
            beta *= 0.5
        else:
            # monotone-operator safeguard
            trial = lam - 0.1 * svec(E)
            E_trial = residual_E(smat(trial), inp, MX)
            res_trial = float(np.linalg.norm(E_trial))
        lam, E, res = trial, E_trial, res_trial
        history.append(res)
        if res < best[0]:
            best = (res, lam.copy())
    if not np.isfinite(res):
        raise NumericalError("semi-smooth Newton residual is not finite")

    converged = res <= inp.tol
    if not converged:
        logger.debug("SSN stopped after %d iterations with residual %.3e", iters, res)
        res, lam = best
    D = direction(smat(lam), inp, MX)
    return SubproblemResult(D, lam, res, iters, converged, history)
