"""Alternating manifold proximal gradient (A-ManPG) for two-block problems.

Solves ``min H(A, B) + f(A) + g(B)`` with ``A`` and ``B`` on (generalized)
Stiefel or Euclidean manifolds. Each block takes a proximal step restricted
to the tangent space, followed by an Armijo backtracking search along the
retraction.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ssn
from .manifold import ManifoldDescriptor, Retraction, check_point, retract
from .penalty import Penalty

logger = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True)
class ProblemSpec:
    """Smooth coupling ``H`` plus block penalties, constraint sets and step sizes."""

    eval_H: Callable[[Array, Array], float]
    grad_A: Callable[[Array, Array], Array]
    grad_B: Callable[[Array, Array], Array]
    f: Penalty
    g: Penalty
    man_A: ManifoldDescriptor
    man_B: ManifoldDescriptor
    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("step sizes must be positive")

    def objective(self, A: Array, B: Array) -> float:
        return float(self.eval_H(A, B) + self.f.value(A) + self.g.value(B))


class Mode(enum.Enum):
    GAUSS_SEIDEL = "gauss-seidel"
    JACOBI = "jacobi"


class Status(enum.Enum):
    STATIONARY = "StationaryTol"
    OBJ_CHANGE = "ObjChangeTol"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_STALL = "LineSearchStall"


@dataclass(frozen=True)
class SolverOptions:
    delta: float = 1e-4
    gamma: float = 0.5
    eps_tol: float = 1e-8
    max_iter: int = 10000
    mode: Mode = Mode.GAUSS_SEIDEL
    obj_change_tol: float | None = None
    f_target: float | None = None  # objective-change rule fires only once F <= f_target
    min_alpha: float = 1e-10
    ssn_tol: float = 1e-5
    ssn_max_iter: int = 100
    retraction: Retraction = Retraction.POLAR

    def __post_init__(self):
        if not (0 < self.delta < 1 and 0 < self.gamma < 1):
            raise ValueError("delta and gamma must lie in (0, 1)")
        if self.max_iter < 0 or self.eps_tol < 0 or self.min_alpha <= 0:
            raise ValueError("invalid solver tolerances")


@dataclass
class IterRecord:
    k: int
    F_start: float
    F_mid: float  # after the A-update
    F: float  # after the B-update
    dA2: float
    dB2: float
    alpha1: float
    alpha2: float
    inner_iters_A: int  # SSN (or FISTA) iterations
    inner_iters_B: int
    inner_ok: bool
    joint: bool = False  # Jacobi mode: one step length for both blocks, alpha1 == alpha2


@dataclass
class SolverTrace:
    F0: float
    records: list[IterRecord] = field(default_factory=list)
    status: Status = Status.MAX_ITER
    seconds: float = 0.0
    max_infeasibility: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def F_final(self) -> float:
        return self.records[-1].F if self.records else self.F0

    @property
    def objectives(self) -> np.ndarray:
        return np.array([self.F0] + [rec.F for rec in self.records])


def stationarity(D_A: Array, D_B: Array) -> float:
    """``||D_A||_F^2 + ||D_B||_F^2``."""
    return float(np.sum(np.square(D_A)) + np.sum(np.square(D_B)))


def _backtrack(F_of, F_cur, X, D, man, opts):
    """Armijo search along the retraction; returns (alpha, X_new, F_new) or None on stall."""
    d2 = float(np.sum(D * D))
    alpha = 1.0
    while alpha >= opts.min_alpha:
        X_new = retract(man, X, alpha * D, opts.retraction)
        F_new = F_of(X_new)
        if F_new <= F_cur - opts.delta * alpha * d2:
            return alpha, X_new, F_new
        alpha *= opts.gamma
    return None


def _joint_backtrack(P, F_cur, A, B, D_A, D_B, d2, opts):
    alpha = 1.0
    while alpha >= opts.min_alpha:
        A_new = retract(P.man_A, A, alpha * D_A, opts.retraction)
        B_new = retract(P.man_B, B, alpha * D_B, opts.retraction)
        F_new = P.objective(A_new, B_new)
        if F_new <= F_cur - opts.delta * alpha * d2:
            return alpha, A_new, B_new, F_new
        alpha *= opts.gamma
    return None


def amanpg(
    problem: ProblemSpec,
    A0: Array,
    B0: Array,
    opts: SolverOptions | None = None,
) -> tuple[Array, Array, SolverTrace]:
    """Run A-ManPG (Gauss-Seidel) or ManPG (Jacobi) from a feasible start.

    Gauss-Seidel computes the B-direction after A has moved and searches each
    block separately. Jacobi computes both directions at the current pair and
    takes one joint Armijo step, since a stale B-direction need not be a
    descent direction once A has changed.

    Terminates when ``max(||D_A||^2, ||D_B||^2) <= eps_tol``, when the optional
    objective-change rule fires, after ``max_iter`` iterations, or when a line
    search falls below ``min_alpha`` (the current iterate is returned).
    """
    opts = opts or SolverOptions()
    P = problem
    for man, X0, name in ((P.man_A, A0, "A0"), (P.man_B, B0, "B0")):
        if check_point(man, X0) > 1e-8:
            raise ValueError(f"{name} is not feasible")
    A = np.array(A0, dtype=float)
    B = np.array(B0, dtype=float)
    F = P.objective(A, B)
    trace = SolverTrace(F0=F)
    lam_A = lam_B = None
    tic = time.perf_counter()

    def sub(man, X, G, t, pen, lam):
        inp = ssn.SubproblemInput(man, X, G, t, pen, opts.ssn_tol, opts.ssn_max_iter)
        return ssn.solve(inp, lam)

    for k in range(opts.max_iter):
        res_A = sub(P.man_A, A, P.grad_A(A, B), P.t1, P.f, lam_A)
        lam_A = res_A.lam
        dA2 = float(np.sum(res_A.D**2))
        if opts.mode is Mode.JACOBI:
            res_B = sub(P.man_B, B, P.grad_B(A, B), P.t2, P.g, lam_B)
            lam_B = res_B.lam
            dB2 = float(np.sum(res_B.D**2))
            step = _joint_backtrack(P, F, A, B, res_A.D, res_B.D, dA2 + dB2, opts)
            if step is None:
                trace.status = Status.LINE_SEARCH_STALL
                break
            alpha, A, B, F_new = step
            rec = IterRecord(k, F, F_new, F_new, dA2, dB2, alpha, alpha, res_A.iters, res_B.iters,
                             res_A.converged and res_B.converged, joint=True)
        else:
            step = _backtrack(lambda Z: P.objective(Z, B), F, A, res_A.D, P.man_A, opts)
            if step is None:
                trace.status = Status.LINE_SEARCH_STALL
                break
            alpha1, A, F_mid = step
            res_B = sub(P.man_B, B, P.grad_B(A, B), P.t2, P.g, lam_B)
            lam_B = res_B.lam
            dB2 = float(np.sum(res_B.D**2))
            step = _backtrack(lambda Z: P.objective(A, Z), F_mid, B, res_B.D, P.man_B, opts)
            if step is None:
                # A already moved with a verified decrease; record it before stopping.
                trace.records.append(
                    IterRecord(k, F, F_mid, F_mid, dA2, dB2, alpha1, 0.0, res_A.iters, res_B.iters,
                               res_A.converged and res_B.converged)
                )
                trace.status = Status.LINE_SEARCH_STALL
                F = F_mid
                break
            alpha2, B, F_new = step
            rec = IterRecord(k, F, F_mid, F_new, dA2, dB2, alpha1, alpha2, res_A.iters, res_B.iters,
                             res_A.converged and res_B.converged)

        trace.records.append(rec)
        F_prev, F = F, F_new
        trace.max_infeasibility = max(
            trace.max_infeasibility, check_point(P.man_A, A), check_point(P.man_B, B)
        )
        if max(dA2, dB2) <= opts.eps_tol:
            trace.status = Status.STATIONARY
            break
        if opts.obj_change_tol is not None and abs(F_prev - F) < opts.obj_change_tol:
            if opts.f_target is None or F <= opts.f_target:
                trace.status = Status.OBJ_CHANGE
                break
    trace.seconds = time.perf_counter() - tic
    logger.debug("amanpg: %s after %d iterations, F=%.6e", trace.status.value, trace.iterations, F)
    return A, B, trace


def directions_at(problem: ProblemSpec, A: Array, B: Array, opts: SolverOptions | None = None):
    """Both subproblem directions at ``(A, B)`` (Jacobi-style, no step taken)."""
    opts = opts or SolverOptions()
    P = problem
    rA = ssn.solve(ssn.SubproblemInput(P.man_A, A, P.grad_A(A, B), P.t1, P.f, opts.ssn_tol, opts.ssn_max_iter))
    rB = ssn.solve(ssn.SubproblemInput(P.man_B, B, P.grad_B(A, B), P.t2, P.g, opts.ssn_tol, opts.ssn_max_iter))
    return rA.D, rB.D


def check_trace(trace: SolverTrace, opts: SolverOptions, rel_slack: float = 1e-12) -> list[str]:
    """Verify the per-iteration sufficient-decrease bookkeeping of a run.

    Returns a list of human-readable violations (empty when all checks pass):
    the Armijo inequality for both blocks at every iteration, monotone
    objective values, and the iteration-count bound
    ``#{k : ||D_A||^2 + ||D_B||^2 > eps} <= (F0 - F_final) / (delta * alpha_min * eps)``.
    """
    problems = []
    d = opts.delta
    for rec in trace.records:
        slack = rel_slack * max(1.0, abs(rec.F_start))
        if rec.joint:
            if rec.F > rec.F_start - d * rec.alpha1 * (rec.dA2 + rec.dB2) + slack:
                problems.append(f"iter {rec.k}: joint step violates sufficient decrease")
            continue
        if rec.F_mid > rec.F_start - d * rec.alpha1 * rec.dA2 + slack:
            problems.append(f"iter {rec.k}: A-step violates sufficient decrease")
        if rec.alpha2 > 0 and rec.F > rec.F_mid - d * rec.alpha2 * rec.dB2 + slack:
            problems.append(f"iter {rec.k}: B-step violates sufficient decrease")
    F = trace.objectives
    if np.any(np.diff(F) > rel_slack * np.maximum(1.0, np.abs(F[:-1]))):
        problems.append("objective sequence increases")
    alphas = [a for rec in trace.records for a in (rec.alpha1, rec.alpha2) if a > 0]
    if alphas and opts.eps_tol > 0:
        alpha_min = min(alphas)
        # a stalled B-step contributes no decrease, so only its A-part counts
        count = sum(
            1 for rec in trace.records
            if rec.dA2 + (rec.dB2 if rec.alpha2 > 0 else 0.0) > opts.eps_tol
        )
        bound = (trace.F0 - trace.F_final) / (d * alpha_min * opts.eps_tol)
        if count > bound * (1 + 1e-9) + 1e-9:
            problems.append(f"iteration bound violated: {count} > {bound:.6g}")
    return problems
