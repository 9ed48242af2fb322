"""Sparse PCA baselines: alternating minimization (AMA), PALM and variable projection (VP).

All three keep ``A`` exactly orthonormal through SVD-based updates and report
progress in the same :class:`~amanpg.solver.SolverTrace` format as A-ManPG.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .penalty import Penalty
from .problems import SpcaConfig, lambda_max, spca_problem
from .solver import IterRecord, ProblemSpec, SolverTrace, Status

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineOptions:
    max_iter: int = 10000
    obj_change_tol: float = 1e-5
    f_target: float | None = None
    fista_max_iter: int = 500
    fista_tol: float = 1e-8


def procrustes(W: np.ndarray) -> np.ndarray:
    """Orthonormal ``A`` maximizing ``tr(A^T W)``: ``U V^T`` from the thin SVD of ``W``."""
    U, _, Vt = np.linalg.svd(W, full_matrices=False)
    return U @ Vt


def fista(
    grad: Callable[[np.ndarray], np.ndarray],
    lipschitz: float,
    pen: Penalty,
    x0: np.ndarray,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> tuple[np.ndarray, int, bool]:
    """Accelerated proximal gradient for ``q(x) + pen(x)`` with ``L``-smooth ``q``.

    Stops when ``||x_k - x_{k-1}||_F <= tol * max(1, ||x_k||_F)``.

    Returns:
        (x, iterations, converged)
    """
    step = 1.0 / lipschitz
    x = np.array(x0, dtype=float)
    y = x.copy()
    s = 1.0
    for k in range(1, max_iter + 1):
        x_new = pen.prox(y - step * grad(y), step)
        s_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * s * s))
        diff = x_new - x
        y = x_new + ((s - 1.0) / s_new) * diff
        x, s = x_new, s_new
        if np.linalg.norm(diff) <= tol * max(1.0, np.linalg.norm(x)):
            return x, k, True
    return x, max_iter, False


class _Run:
    """Shared bookkeeping for the three baselines."""

    def __init__(self, problem: ProblemSpec, A, B, opts: BaselineOptions):
        self.problem = problem
        self.opts = opts
        self.F = problem.objective(A, B)
        self.trace = SolverTrace(F0=self.F)
        self.tic = time.perf_counter()

    def record(self, k, A_old, A, B_old, B, F_mid, inner_iters=0, inner_ok=True) -> bool:
        """Append an iteration; return True when the stopping rule fires."""
        F_new = self.problem.objective(A, B)
        self.trace.records.append(
            IterRecord(
                k, self.F, F_mid, F_new,
                float(np.sum((A - A_old) ** 2)), float(np.sum((B - B_old) ** 2)),
                1.0, 1.0, 0, inner_iters, inner_ok,
            )
        )
        self.trace.max_infeasibility = max(
            self.trace.max_infeasibility, float(np.linalg.norm(A.T @ A - np.eye(A.shape[1])))
        )
        F_prev, self.F = self.F, F_new
        if abs(F_prev - F_new) < self.opts.obj_change_tol:
            if self.opts.f_target is None or F_new <= self.opts.f_target:
                self.trace.status = Status.OBJ_CHANGE
                return True
        return False

    def finish(self):
        self.trace.seconds = time.perf_counter() - self.tic
        return self.trace


def _setup(cfg, problem, init):
    problem = problem or spca_problem(cfg)
    A, B = (np.array(Z, dtype=float) for Z in init)
    return problem, A, B


def ama_spca(
    cfg: SpcaConfig,
    init: tuple[np.ndarray, np.ndarray],
    opts: BaselineOptions | None = None,
    problem: ProblemSpec | None = None,
):
    """Alternate an exact Procrustes A-step with an elastic-net B-step solved by FISTA.

    The FISTA solve is warm-started from the current ``B``.
    """
    opts = opts or BaselineOptions(max_iter=1000)
    problem, A, B = _setup(cfg, problem, init)
    X = cfg.X
    L = 2.0 * lambda_max(X)
    pen = problem.g
    run = _Run(problem, A, B, opts)
    for k in range(opts.max_iter):
        A_old, B_old = A, B
        A = procrustes(X.T @ (X @ B))
        F_mid = problem.objective(A, B)
        SA = X.T @ (X @ A)
        B, its, ok = fista(
            lambda Z: 2.0 * (X.T @ (X @ Z)) - 2.0 * SA, L, pen, B,
            opts.fista_max_iter, opts.fista_tol,
        )
        if not ok:
            logger.warning("AMA iteration %d: FISTA hit %d iterations", k, its)
        if run.record(k, A_old, A, B_old, B, F_mid, its, ok):
            break
    return A, B, run.finish()


def palm_spca(
    cfg: SpcaConfig,
    init: tuple[np.ndarray, np.ndarray],
    opts: BaselineOptions | None = None,
    problem: ProblemSpec | None = None,
    t1: float = 1.0,
):
    """PALM: polar projection of a gradient step for A, prox-gradient step for B.

    On ``A^T A = I`` the coupling reduces to ``const - 2 tr(A^T X^T X B)``, so
    the A-step linearizes that form; its gradient ``-2 X^T X B`` has no
    curvature in ``A`` and any ``t1 > 0`` gives a monotone step.
    ``t2`` is taken from ``problem`` (``1 / (2 lambda_max)`` by default).
    """
    opts = opts or BaselineOptions()
    problem, A, B = _setup(cfg, problem, init)
    X = cfg.X
    t2 = problem.t2
    run = _Run(problem, A, B, opts)
    for k in range(opts.max_iter):
        A_old, B_old = A, B
        A = procrustes(A + 2.0 * t1 * (X.T @ (X @ B)))
        F_mid = problem.objective(A, B)
        B = problem.g.prox(B - t2 * problem.grad_B(A, B), t2)
        if run.record(k, A_old, A, B_old, B, F_mid):
            break
    return A, B, run.finish()


def vp_spca(
    cfg: SpcaConfig,
    init: tuple[np.ndarray, np.ndarray],
    opts: BaselineOptions | None = None,
    problem: ProblemSpec | None = None,
):
    """Variable projection: exact Procrustes A-step, PALM's B-step."""
    opts = opts or BaselineOptions()
    problem, A, B = _setup(cfg, problem, init)
    X = cfg.X
    t2 = problem.t2
    run = _Run(problem, A, B, opts)
    for k in range(opts.max_iter):
        A_old, B_old = A, B
        A = procrustes(X.T @ (X @ B))
        F_mid = problem.objective(A, B)
        B = problem.g.prox(B - t2 * problem.grad_B(A, B), t2)
        if run.record(k, A_old, A, B_old, B, F_mid):
            break
    return A, B, run.finish()
