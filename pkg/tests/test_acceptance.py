"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Criteria 1-4 replay the benchmark protocols at full size (20 repetitions), so
this module takes a few minutes on a single core. Run it alone with
``pytest tests/test_acceptance.py -s``.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from amanpg import cli
from amanpg.manifold import (
    Retraction,
    check_point,
    generalized_stiefel,
    project_tangent,
    random_point,
    retract,
    stiefel,
)
from amanpg.penalty import L1, ColumnElasticNet, RowL21, Zero
from amanpg.problems import SccaConfig, SpcaConfig, gradient_errors, random_feasible, scca_problem, spca_problem
from amanpg.solver import SolverOptions, Status, check_trace
from amanpg.ssn import SubproblemInput, jacobian_matvec, residual_E, smat, solve, svec

from conftest import ACCEPTANCE_LINES
from oracles import tangent_prox_oracle

pytestmark = pytest.mark.slow

REPS = 20
SEED = 2024


def report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b))


def spd(rng, p):
    Z = rng.standard_normal((p + 3, p))
    return Z.T @ Z / (p + 3) + 0.1 * np.eye(p)


# ---------------------------------------------------------------- benchmark runs shared by 1-4, 8, 10


@pytest.fixture(scope="module")
def spca_runs():
    args = cli.build_parser().parse_args(
        ["spca", "--n", "100", "--p", "1000", "--r", "6", "--mu", "1", "--mu1", "0.1",
         "--reps", str(REPS), "--seed", str(SEED)]
    )
    return [cli.spca_repetition(args, k) for k in range(REPS)]


@pytest.fixture(scope="module")
def vec_runs():
    args = cli.build_parser().parse_args(
        ["scca-vec", "--n", "500", "--p", "800", "--q", "800", "--cov", "identity",
         "--reps", str(REPS), "--seed", str(SEED)]
    )
    return args, [cli.cca_repetition(args, k, 1) for k in range(REPS)]


@pytest.fixture(scope="module")
def mat_runs():
    args = cli.build_parser().parse_args(
        ["scca-mat", "--n", "500", "--p", "300", "--q", "300", "--cov", "identity", "--b-grid", "1.4",
         "--reps", str(REPS), "--seed", str(SEED)]
    )
    return [cli.cca_repetition(args, k, 2) for k in range(REPS)]


def spca_median(runs, alg, key):
    return cli.lower_median([rep[alg].metrics[key] for rep in runs])


def test_criterion_01_spca_objective_parity(spca_runs):
    algs = ("amanpg", "palm", "vp", "ama")
    F = {a: spca_median(spca_runs, a, "F") for a in algs}
    worst = max(rel_gap(F[a], F[b]) for a, b in itertools.combinations(algs, 2))
    slowest = max(rep["amanpg"].trace.seconds for rep in spca_runs)
    cells = ", ".join(f"{a}={F[a]:.6g}" for a in algs)
    report(1, worst <= 5e-3 and slowest < 5.0,
           f"SPCA median F {cells}; max pairwise gap {worst:.2e} (<= 5e-3); slowest A-ManPG run {slowest:.2f}s (< 5s)")


def test_criterion_02_spca_sparsity_band(spca_runs):
    sp = {a: spca_median(spca_runs, a, "sp") for a in ("amanpg", "palm", "vp", "ama")}
    worst = max(abs(v - sp["palm"]) for v in sp.values())
    cells = ", ".join(f"{a}={v:.1f}" for a, v in sp.items())
    report(2, worst <= 5.0, f"SPCA median sp {cells}; max distance to PALM {worst:.2f} points (<= 5)")


def test_criterion_03_vector_cca_recovery(vec_runs):
    args, runs = vec_runs
    best = [min((rep[("amanpg", b)] for b in args.b_grid),
                key=lambda o: o.metrics["lossu"] + o.metrics["lossv"]) for rep in runs]
    med = {k: cli.lower_median([o.metrics[k] for o in best]) for k in ("lossu", "lossv", "rho", "nu", "nv")}
    slowest = max(o.trace.seconds for rep in runs for o in rep.values())
    ok = (med["lossu"] <= 0.02 and med["lossv"] <= 0.02 and 0.88 <= med["rho"] <= 0.92
          and 3 <= med["nu"] <= 8 and 3 <= med["nv"] <= 8 and slowest < 2.0)
    report(3, ok, "vector CCA medians lossu={lossu:.3e} lossv={lossv:.3e} |rho|={rho:.3f} nu={nu:g} nv={nv:g}".format(**med)
           + f"; slowest solve {slowest:.2f}s")


def test_criterion_04_matrix_cca_recovery(mat_runs):
    out = [rep[("amanpg", 1.4)] for rep in mat_runs]
    med = {k: cli.lower_median([o.metrics[k] for o in out]) for k in ("lossu", "lossv", "rho1", "rho2", "nA", "nB")}
    ok = (med["lossu"] <= 0.05 and med["lossv"] <= 0.05 and 0.885 <= med["rho1"] <= 0.915
          and 0.78 <= med["rho2"] <= 0.83 and 8 <= med["nA"] <= 16 and 8 <= med["nB"] <= 16)
    report(4, ok, "matrix CCA b=1.4 medians lossu={lossu:.3e} lossv={lossv:.3e} |rho1|={rho1:.3f} "
           "|rho2|={rho2:.3f} nA={nA:g} nB={nB:g}".format(**med))


# ---------------------------------------------------------------- subproblem and derivative checks


def test_criterion_05_subproblem_oracle():
    rng = np.random.default_rng(5)
    kinds = [lambda r: Zero(), lambda r: L1(0.4), lambda r: RowL21(0.6),
             lambda r: ColumnElasticNet(0.3, tuple(np.linspace(0.2, 0.5, r)))]
    worst_d = worst_res = 0.0
    count = 0
    for i in range(50):
        p = int(rng.integers(3, 11))
        r = int(rng.integers(1, 3))
        gen = i % 2 == 1
        pen = kinds[(i // 2) % 4](r)
        man = generalized_stiefel(spd(rng, p), r) if gen else stiefel(p, r)
        X = random_point(man, rng)
        G = rng.standard_normal((p, r))
        t = float(rng.uniform(0.3, 2.0))
        default = solve(SubproblemInput(man, X, G, t, pen))
        tight = solve(SubproblemInput(man, X, G, t, pen, tol=1e-10))
        oracle = tangent_prox_oracle(man.M if gen else None, X, G, t, pen)
        if not (default.converged and tight.converged):
            worst_res = np.inf
        worst_res = max(worst_res, default.residual)
        worst_d = max(worst_d, float(np.linalg.norm(tight.D - oracle)))
        count += 1
    report(5, worst_d <= 1e-6 and worst_res <= 1e-5,
           f"{count} subproblems vs interior-point oracle: max ||D - D*||_F {worst_d:.2e} (<= 1e-6), "
           f"max residual {worst_res:.2e} (<= 1e-5)")


def _far_from_ties(pen, B, t, margin=1e-3):
    if isinstance(pen, RowL21):
        return np.min(np.abs(np.linalg.norm(B, axis=1) - t * pen.tau)) >= margin
    if isinstance(pen, L1):
        return np.min(np.abs(np.abs(B) - t * pen.tau)) >= margin
    if isinstance(pen, ColumnElasticNet):
        return np.min(np.abs(np.abs(B) - t * np.asarray(pen.mu1))) >= margin
    return True


def test_criterion_06_jacobian_vs_finite_differences():
    rng = np.random.default_rng(6)
    h = 1e-6
    worst = 0.0
    pairs = 0
    pens = [Zero(), L1(0.3), RowL21(0.5), ColumnElasticNet(0.2, (0.3, 0.1, 0.4))]
    while pairs < 200:
        pen = pens[pairs % 4]
        r = 3 if isinstance(pen, ColumnElasticNet) else int(rng.integers(1, 4))
        p = int(rng.integers(r + 2, 10))
        man = generalized_stiefel(spd(rng, p), r) if rng.integers(2) else stiefel(p, r)
        X = random_point(man, rng)
        inp = SubproblemInput(man, X, rng.standard_normal((p, r)), float(rng.uniform(0.3, 1.5)), pen)
        L = smat(rng.standard_normal(r * (r + 1) // 2) * 0.3)
        d = rng.standard_normal(L.shape[0] * (L.shape[0] + 1) // 2)
        MX = man.apply_metric(X)
        B = X - inp.t * (inp.G - 2 * MX @ L)
        if not _far_from_ties(pen, B, inp.t):
            continue
        fd = (svec(residual_E(L + h * smat(d), inp), atol=1e-9)
              - svec(residual_E(L - h * smat(d), inp), atol=1e-9)) / (2 * h)
        jd = jacobian_matvec(L, d, inp)
        scale = max(np.linalg.norm(fd), np.linalg.norm(jd))
        err = 0.0 if scale == 0 else float(np.linalg.norm(jd - fd) / scale)
        worst = max(worst, err)
        pairs += 1
    report(6, worst <= 1e-5, f"{pairs} (Lambda, d) pairs: max relative error {worst:.2e} (<= 1e-5)")


def test_criterion_07_gradients():
    rng = np.random.default_rng(7)
    Xs = rng.standard_normal((20, 10))
    Xs -= Xs.mean(axis=0)
    Xw = rng.standard_normal((8, 15))
    Xw -= Xw.mean(axis=0)
    Xc = rng.standard_normal((30, 10)) / np.sqrt(29)
    Yc = (Xc[:, :8] + rng.standard_normal((30, 8)) / np.sqrt(29))
    problems = {
        "spca tall": spca_problem(SpcaConfig(Xs, 2, 0.5, 0.1)),
        "spca wide": spca_problem(SpcaConfig(Xw, 3, 1.0, 0.1)),
        "scca vector": scca_problem(SccaConfig(Xc, Yc, 1, 0.1, 0.1)),
        "scca matrix": scca_problem(SccaConfig(Xc, Yc, 2, 0.1, 0.1)),
    }
    worst = {}
    for name, pb in problems.items():
        worst[name] = max(max(gradient_errors(pb, *random_feasible(pb, rng))) for _ in range(10))
    cells = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(7, max(worst.values()) <= 1e-5, f"10 points per problem, max relative error: {cells} (<= 1e-5)")


# ---------------------------------------------------------------- solver invariants over every benchmark run


def _all_amanpg_outcomes(spca_runs, vec_runs, mat_runs):
    outs = [rep["amanpg"] for rep in spca_runs]
    outs += [o for rep in vec_runs[1] for o in rep.values()]
    outs += [o for rep in mat_runs for o in rep.values()]
    return outs


def test_criterion_08_algorithm_invariants(spca_runs, vec_runs, mat_runs):
    opts = SolverOptions()
    outs = _all_amanpg_outcomes(spca_runs, vec_runs, mat_runs)
    violations = []
    worst_feas = 0.0
    worst_exit = 0.0
    for o in outs:
        violations += [v for v in check_trace(o.trace, opts) if "bound" not in v]
        worst_feas = max(worst_feas, o.trace.max_infeasibility)
        if o.trace.status is Status.STATIONARY:
            worst_exit = max(worst_exit, o.exit_stationarity / opts.eps_tol)
    # baselines promise monotone objectives and exact feasibility too
    for rep in spca_runs:
        for alg in ("palm", "vp", "ama"):
            tr = rep[alg].trace
            F = tr.objectives
            if np.any(np.diff(F) > 1e-12 * np.abs(F[:-1])):
                violations.append(f"{alg} objective increased")
            worst_feas = max(worst_feas, tr.max_infeasibility)
    n_stat = sum(o.trace.status is Status.STATIONARY for o in outs)
    ok = not violations and worst_feas <= 1e-10 and worst_exit <= 2.0
    report(8, ok, f"{len(outs)} A-ManPG runs: {len(violations)} Armijo/monotonicity violations, "
           f"max infeasibility {worst_feas:.1e} (<= 1e-10), exit stationarity <= {worst_exit:.2f} x tol "
           f"over {n_stat} stationary exits (<= 2)")


def test_criterion_09_retractions():
    rng = np.random.default_rng(9)
    cases = [(stiefel(8, 3), k) for k in Retraction] + [(generalized_stiefel(spd(rng, 8), 3), Retraction.POLAR)]
    worst_feas = 0.0
    worst_spread = 0.0
    zero_ok = True
    for man, kind in cases:
        for _ in range(200):
            X = random_point(man, rng)
            xi = project_tangent(man, X, rng.standard_normal((8, 3)))
            zero_ok &= np.array_equal(retract(man, X, np.zeros_like(X), kind), X)
            worst_feas = max(worst_feas, check_point(man, retract(man, X, xi, kind)))
        for _ in range(20):
            X = random_point(man, rng)
            xi = project_tangent(man, X, rng.standard_normal((8, 3)))
            xi /= np.linalg.norm(xi)
            ratios = [np.linalg.norm(retract(man, X, h * xi, kind) - (X + h * xi)) / h**2
                      for h in (1e-2, 1e-3, 1e-4)]
            worst_spread = max(worst_spread, max(ratios) / min(ratios))
    report(9, zero_ok and worst_feas <= 1e-10 and worst_spread < 10,
           f"R(0)=X {'holds' if zero_ok else 'fails'}; max infeasibility {worst_feas:.1e} (<= 1e-10); "
           f"second-order ratio spread {worst_spread:.2f}x across h (< 10x)")


def test_criterion_10_iteration_bound(spca_runs, vec_runs, mat_runs):
    opts = SolverOptions()
    outs = _all_amanpg_outcomes(spca_runs, vec_runs, mat_runs)
    tightest = 0.0
    bad = 0
    for o in outs:
        tr = o.trace
        if any("bound" in v for v in check_trace(tr, opts)):
            bad += 1
        alphas = [a for rec in tr.records for a in (rec.alpha1, rec.alpha2) if a > 0]
        count = sum(rec.dA2 + (rec.dB2 if rec.alpha2 > 0 else 0.0) > opts.eps_tol for rec in tr.records)
        if count:
            bound = (tr.F0 - tr.F_final) / (opts.delta * min(alphas) * opts.eps_tol)
            tightest = max(tightest, count / bound)
    report(10, bad == 0 and tightest <= 1.0,
           f"{len(outs)} runs: iteration count / bound at most {tightest:.2e} (<= 1)")
