"""Benchmark harness: ``amanpg {spca,scca-vec,scca-mat} [options]``.

Every table cell is the lower median over repetitions. Repetition ``k`` uses
the random stream keyed by ``(seed, k)``, so output is deterministic apart
from the timing column.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import baselines, experiments as ex
from .manifold import NumericalError
from .problems import SccaConfig, SpcaConfig, scca_canonical_form, scca_init, scca_problem, spca_init, spca_problem
from .solver import Mode, SolverOptions, SolverTrace, Status, amanpg, directions_at, stationarity

logger = logging.getLogger(__name__)

SPCA_ALGS = ("amanpg", "manpg-jacobi", "ama", "palm", "vp")
SCCA_ALGS = ("amanpg", "manpg-jacobi")
OBJ_CHANGE_TOL = 1e-5
FISTA_TOL = 1e-8
DEFAULT_CAPS = {"ama": 1000}
DEFAULT_CAP = 10000

COLUMNS = {
    "spca": ("algorithm", "F", "sp", "cpu", "iter"),
    "scca-vec": ("algorithm", "b", "cpu", "iter", "lossu", "lossv", "rho", "nu", "nv"),
    "scca-mat": ("algorithm", "b", "cpu", "iter", "lossu", "lossv", "nA", "nB", "rho1", "rho2"),
}
INT_COLUMNS = {"iter", "nu", "nv", "nA", "nB"}

@dataclass
class ResultRow:
    algorithm: str
    b: float | str | None = None  # "best" for the vector-CCA best-b summary row
    values: dict[str, float] = field(default_factory=dict)

    def cell(self, col: str) -> str:
        if col == "algorithm":
            return self.algorithm
        v = self.b if col == "b" else self.values[col]
        if isinstance(v, str):
            return v
        if col in INT_COLUMNS:
            return str(int(v))
        return f"{v:.6g}"

@dataclass
class RunOutcome:
    """One solver call inside a repetition: table metrics plus the full trace."""

    metrics: dict[str, float]
    trace: SolverTrace
    exit_stationarity: float | None = None  # re-solved at the returned point when status is StationaryTol


def lower_median(values: Sequence[float]) -> float:
    """Median; for an even count the smaller of the two middle values."""
    if not len(values):
        raise ValueError("median of an empty sequence")
    s = sorted(values)
    return s[(len(s) - 1) // 2]

def _medians(outcomes: list[RunOutcome]) -> dict[str, float]:
    return {k: lower_median([o.metrics[k] for o in outcomes]) for k in outcomes[0].metrics}

def _map_reps(fn: Callable[[int], object], reps: int, threads: int) -> list:
    if threads <= 1:
        return [fn(k) for k in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))  # map keeps rep order

# ---------------------------------------------------------------- SPCA

def spca_repetition(args, rep: int) -> dict[str, RunOutcome]:
    """PALM first (when requested), then the others with PALM's final F as their target."""
    X = ex.load_matrix(args.data) if args.data else ex.gen_spca_data(args.n, args.p, args.seed, rep)
    if args.data:
        X = X - X.mean(axis=0)
    cfg = SpcaConfig(X, args.r, args.mu, args.mu1)
    init = spca_init(cfg)
    problem = spca_problem(cfg)
    const = cfg.data_norm2
    out = {}
    f_target = None
    order = sorted(args.algs, key=lambda a: a != "palm")  # PALM sets the target for the others
    for alg in order:
        cap = args.max_iter or DEFAULT_CAPS.get(alg, DEFAULT_CAP)
        bopts = baselines.BaselineOptions(
            max_iter=cap, obj_change_tol=OBJ_CHANGE_TOL, f_target=f_target,
            fista_tol=FISTA_TOL,
        )
        if alg == "palm":
            A, B, tr = baselines.palm_spca(cfg, init, bopts, problem)
            f_target = tr.F_final
        elif alg == "vp":
            A, B, tr = baselines.vp_spca(cfg, init, bopts, problem)
        elif alg == "ama":
            A, B, tr = baselines.ama_spca(cfg, init, bopts, problem)
        else:
            mode = Mode.JACOBI if alg == "manpg-jacobi" else Mode.GAUSS_SEIDEL
            sopts = SolverOptions(max_iter=cap, mode=mode, obj_change_tol=OBJ_CHANGE_TOL, f_target=f_target)
            A, B, tr = amanpg(problem, *init, sopts)
        metrics = {
            # the constant ||X||_F^2 is dropped from H when reporting F
            "F": tr.F_final - const,
            "sp": ex.sparsity_stats(B)[0],
            "cpu": tr.seconds,
            "iter": tr.iterations,
        }
        out[alg] = RunOutcome(metrics, tr)
    return out

def run_spca(args) -> list[ResultRow]:
    per_rep = _map_reps(lambda k: spca_repetition(args, k), args.reps, args.threads)
    return [ResultRow(alg, None, _medians([d[alg] for d in per_rep])) for alg in args.algs]

# ---------------------------------------------------------------- sparse CCA

def tau_for(b: float, n: int, p: int, q: int) -> float:
    return 0.5 * b * math.sqrt(math.log(p + q) / n)

def cca_repetition(args, rep: int, r: int) -> dict[tuple[str, float], RunOutcome]:
    """Every (algorithm, b) pair on one generated data set."""
    Sx = ex.build_covariance(ex.CovarianceSpec(args.cov, args.p, args.toeplitz_rho))
    Sy = ex.build_covariance(ex.CovarianceSpec(args.cov, args.q, args.toeplitz_rho))
    truth = ex.gen_canonical_truth(Sx, Sy, r, args.seed, rep)
    X, Y = ex.gen_cca_data(args.n, Sx, Sy, truth, args.seed, rep)
    out = {}
    for b in args.b_grid:
        tau = tau_for(b, args.n, args.p, args.q)
        cfg = SccaConfig(X, Y, r, tau, tau)
        problem = scca_problem(cfg)
        A0, B0 = scca_init(cfg)
        for alg in args.algs:
            mode = Mode.JACOBI if alg == "manpg-jacobi" else Mode.GAUSS_SEIDEL
            sopts = SolverOptions(max_iter=args.max_iter or DEFAULT_CAP, mode=mode)
            A, B, tr = amanpg(problem, A0, B0, sopts)
            exit_stat = None
            if tr.status is Status.STATIONARY:
                exit_stat = stationarity(*directions_at(problem, A, B, sopts))
            if r > 1:
                A, B = scca_canonical_form(cfg, A, B)
            rho = ex.canonical_correlations(X, Y, A, B)
            if r == 1:
                row = {
                    "lossu": ex.loss_vector(A, truth.U), "lossv": ex.loss_vector(B, truth.V),
                    "rho": abs(rho[0]),
                    "nu": ex.sparsity_stats(A)[1], "nv": ex.sparsity_stats(B)[1],
                }
            else:
                row = {
                    "lossu": ex.loss_subspace(truth.U, A), "lossv": ex.loss_subspace(truth.V, B),
                    "nA": ex.sparsity_stats(A)[1], "nB": ex.sparsity_stats(B)[1],
                }
                row.update({f"rho{i + 1}": abs(v) for i, v in enumerate(rho[:2])})
            out[(alg, b)] = RunOutcome({"cpu": tr.seconds, "iter": tr.iterations, **row}, tr, exit_stat)
    return out

def run_scca_vec(args) -> list[ResultRow]:
    per_rep = _map_reps(lambda k: cca_repetition(args, k, 1), args.reps, args.threads)
    rows = []
    for alg in args.algs:
        best = []
        for d in per_rep:
            cands = [d[(alg, b)] for b in args.b_grid]
            best.append(min(cands, key=lambda o: o.metrics["lossu"] + o.metrics["lossv"]))
        rows.append(ResultRow(alg, "best", _medians(best)))
        rows.extend(ResultRow(alg, b, _medians([d[(alg, b)] for d in per_rep])) for b in args.b_grid)
    return rows

def run_scca_mat(args) -> list[ResultRow]:
    per_rep = _map_reps(lambda k: cca_repetition(args, k, args.r), args.reps, args.threads)
    return [
        ResultRow(alg, b, _medians([d[(alg, b)] for d in per_rep]))
        for alg in args.algs for b in args.b_grid
    ]

# ---------------------------------------------------------------- output

def format_rows(rows: list[ResultRow], columns: Sequence[str], fmt: str) -> str:
    cells = [[row.cell(c) for c in columns] for row in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        w.writerows(cells)
        return buf.getvalue()
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    lines += ["| " + " | ".join(c) + " |" for c in cells]
    return "\n".join(lines) + "\n"

def parse_table(text: str) -> list[dict[str, str]]:
    """Read back a CSV or markdown table produced by :func:`format_rows`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].startswith("|"):
        split = [[c.strip() for c in ln.strip().strip("|").split("|")] for ln in lines]
        header, body = split[0], split[2:]
    else:
        parsed = list(csv.reader(lines))
        header, body = parsed[0], parsed[1:]
    return [dict(zip(header, row)) for row in body]

def config_echo(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["obj_change_tol"] = OBJ_CHANGE_TOL
    if args.command == "spca":
        cfg["fista_tol"] = FISTA_TOL
        cfg["max_iter_caps"] = {a: args.max_iter or DEFAULT_CAPS.get(a, DEFAULT_CAP) for a in args.algs}
        cfg["reported_F"] = "H + penalties - ||X||_F^2"
    else:
        defaults = SolverOptions()
        cfg.update(delta=defaults.delta, gamma=defaults.gamma, eps_tol=defaults.eps_tol,
                   ssn_tol=defaults.ssn_tol, t1=1.0, t2=1.0, alpha=1e-4)
        cfg["tau"] = {str(b): tau_for(b, args.n, args.p, args.q) for b in args.b_grid}
    cfg["median"] = "lower"
    cfg["rng"] = "numpy Philox, SeedSequence([seed, rep])"
    return cfg

def emit(rows: list[ResultRow], columns: Sequence[str], fmt: str, path: str | None, config: dict | None = None) -> str:
    text = format_rows(rows, columns, fmt)
    if path is None:
        sys.stdout.write(text)
        return text
    out = Path(path)
    out.write_text(text)
    if config is not None:
        out.with_name(out.name + ".config.json").write_text(json.dumps(config, indent=2, default=str) + "\n")
    return text

# ---------------------------------------------------------------- argument parsing

def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v

def _float_list(s: str) -> list[float]:
    try:
        vals = [float(x) for x in s.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals

def _alg_list(allowed):
    def parse(s: str) -> list[str]:
        algs = [a for a in s.replace(",", " ").split() if a]
        bad = [a for a in algs if a not in allowed]
        if bad or not algs:
            raise argparse.ArgumentTypeError(f"unknown algorithm(s) {bad}; choose from {', '.join(allowed)}")
        return list(dict.fromkeys(algs))
    return parse

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amanpg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, n, p, reps=20):
        sp.add_argument("--n", type=_positive_int, default=n)
        sp.add_argument("--p", type=_positive_int, default=p)
        sp.add_argument("--reps", type=_positive_int, default=reps)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-iter", type=_positive_int, default=None, help="override iteration caps")
        sp.add_argument("--out-format", choices=("csv", "md"), default="csv")
        sp.add_argument("--out-path", default=None, help="write here (plus a .config.json sibling) instead of stdout")
        sp.add_argument("--threads", type=_positive_int, default=1, help="repetitions run concurrently")

    sp = sub.add_parser("spca", help="sparse PCA benchmark")
    common(sp, 100, 1000)
    sp.add_argument("--r", type=_positive_int, default=6)
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--mu1", type=float, default=0.1)
    sp.add_argument("--algs", type=_alg_list(SPCA_ALGS), default=["amanpg", "palm", "vp", "ama"])
    sp.add_argument("--data", default=None, help="headerless CSV data matrix used instead of synthetic data")
    sp.set_defaults(func=run_spca)

    for name, grid, rho, p, r in (
        ("scca-vec", [1.0, 1.2, 1.4, 1.6], 0.9, 800, 1),
        ("scca-mat", [0.8, 1.0, 1.2, 1.4, 1.6], 0.3, 300, 2),
    ):
        sp = sub.add_parser(name, help=f"sparse CCA benchmark ({'vector' if r == 1 else 'matrix'})")
        common(sp, 500, p)
        sp.add_argument("--q", type=_positive_int, default=p)
        if r == 2:
            sp.add_argument("--r", type=int, choices=(2,), default=2)
        sp.add_argument("--b-grid", type=_float_list, default=grid)
        sp.add_argument("--cov", choices=[k.value for k in ex.CovKind], default="identity")
        sp.add_argument("--toeplitz-rho", type=float, default=rho)
        sp.add_argument("--algs", type=_alg_list(SCCA_ALGS), default=["amanpg"])
        sp.set_defaults(func=run_scca_vec if r == 1 else run_scca_mat)
    return ap

def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command != "spca" and min(args.p, args.q) <= max(ex.SUPPORT):
            ap.error(f"--p and --q must be at least {max(ex.SUPPORT) + 1}")
        rows = args.func(args)
        emit(rows, COLUMNS[args.command], args.out_format, args.out_path, config_echo(args))
    except (ValueError, NumericalError, OSError) as exc:
        print(f"amanpg: error: {exc}", file=sys.stderr)
        return 1
    return 0

if __name__ == "__main__":
    sys.exit(main())
