import warnings

import numpy as np
import pytest

from amanpg.manifold import check_point, random_point
from amanpg.problems import (
    SccaConfig,
    SpcaConfig,
    gradient_errors,
    lambda_max,
    random_feasible,
    scca_canonical_form,
    scca_init,
    scca_problem,
    spca_init,
    spca_problem,
)


def centered(rng, n, p):
    X = rng.standard_normal((n, p))
    return X - X.mean(axis=0)


def test_spca_identity_data():
    p, r = 7, 3
    rng = np.random.default_rng(1)
    A = random_point(__import__("amanpg").stiefel(p, r), rng)
    pb = spca_problem(SpcaConfig(np.eye(p), r, 0.0, 0.0))
    assert pb.eval_H(A, A) == pytest.approx(p - r, abs=1e-12)
    assert pb.f.value(A) == 0.0


@pytest.mark.parametrize("n,p", [(20, 10), (8, 12)])
def test_spca_gradients(rng, n, p):
    pb = spca_problem(SpcaConfig(centered(rng, n, p), 2, 0.5, 0.1), debug=True)
    for _ in range(10):
        A, B = random_feasible(pb, rng)
        assert max(gradient_errors(pb, A, B)) <= 1e-5


def test_spca_row_sum_identity(rng):
    X = centered(rng, 15, 8)
    pb = spca_problem(SpcaConfig(X, 3, 0.1, 0.1))
    A, B = random_feasible(pb, rng)
    rows = sum(np.sum((x - A @ (B.T @ x)) ** 2) for x in X)
    assert pb.eval_H(A, B) == pytest.approx(rows, rel=1e-10)
    assert pb.eval_H(A, B) == pytest.approx(np.sum((X - X @ B @ A.T) ** 2), rel=1e-10)


def test_spca_rank_error(rng):
    with pytest.raises(ValueError):
        SpcaConfig(centered(rng, 3, 10), 4, 1.0, 0.1)


def test_spca_steps(rng):
    X = centered(rng, 30, 20)
    pb = spca_problem(SpcaConfig(X, 2, 1.0, 0.1))
    assert pb.t1 == pytest.approx(100 / 20)
    assert pb.t2 == pytest.approx(1 / (2 * np.linalg.eigvalsh(X.T @ X)[-1]))


def test_lambda_max_lanczos(rng):
    X = centered(rng, 80, 200)
    assert lambda_max(X) == pytest.approx(np.linalg.eigvalsh(X.T @ X)[-1], rel=1e-10)


def test_spca_init(rng):
    X = centered(rng, 50, 30)
    cfg = SpcaConfig(X, 3, 1.0, 0.1)
    A0, B0 = spca_init(cfg)
    V = np.linalg.svd(X)[2][:3].T
    np.testing.assert_allclose(np.abs(A0), np.abs(V), atol=1e-12)
    np.testing.assert_allclose(A0.T @ A0, np.eye(3), atol=1e-12)
    np.testing.assert_array_equal(A0, B0)
    pb = spca_problem(cfg)
    F0 = pb.objective(A0, B0)
    for _ in range(20):
        assert F0 <= pb.objective(*random_feasible(pb, rng))


def cca_cfg(rng, n=30, p=10, q=8, r=2, alpha=1e-4):
    X = rng.standard_normal((n, p)) / np.sqrt(n - 1)
    Y = rng.standard_normal((n, q)) / np.sqrt(n - 1)
    return SccaConfig(X, Y, r, 0.1, 0.2, alpha)


def test_scca_gradients(rng):
    pb = scca_problem(cca_cfg(rng), debug=True)
    for _ in range(10):
        A, B = random_feasible(pb, rng)
        assert max(gradient_errors(pb, A, B)) <= 1e-5


def test_scca_orthogonal_blocks(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
    X, Y = Q[:, :6], Q[:, 6:11]
    pb = scca_problem(SccaConfig(X, Y, 2, 0.1, 0.1))
    A, B = random_feasible(pb, rng)
    assert pb.eval_H(A, B) == pytest.approx(0.0, abs=1e-14)


def test_scca_vector_penalty_is_l1(rng):
    cfg = cca_cfg(rng, r=1)
    pb = scca_problem(cfg)
    u = rng.standard_normal((cfg.X.shape[1], 1))
    assert pb.f.value(u) == pytest.approx(0.1 * np.abs(u).sum())


def test_metric(rng):
    X = rng.standard_normal((40, 5))
    cfg = SccaConfig(X, X, 1, 0.1, 0.1, alpha=0.0)
    np.testing.assert_array_equal(cfg.Mx, X.T @ X)
    wide = SccaConfig(rng.standard_normal((5, 12)), rng.standard_normal((5, 9)), 1, 0.1, 0.1)
    np.linalg.cholesky(wide.Mx)
    np.linalg.cholesky(wide.My)


def test_scca_init_diagonal():
    d = np.array([0.5, 3.0, 2.0, 1.0])
    X = np.diag(np.sqrt(d))
    cfg = SccaConfig(X, X, 2, 0.1, 0.1, alpha=0.0)
    A0, B0 = scca_init(cfg)
    expect = np.zeros((4, 2))
    expect[1, 0] = 1 / np.sqrt(3.0)
    expect[2, 1] = 1 / np.sqrt(2.0)
    np.testing.assert_allclose(np.abs(A0), expect, atol=1e-12)
    np.testing.assert_allclose(np.abs(B0), expect, atol=1e-12)


def test_scca_init_feasible(rng):
    for r in (1, 2, 3):
        cfg = cca_cfg(rng, r=r)
        pb = scca_problem(cfg)
        A0, B0 = scca_init(cfg)
        assert check_point(pb.man_A, A0) <= 1e-10
        assert check_point(pb.man_B, B0) <= 1e-10


def test_scca_canonical_form(rng):
    cfg = cca_cfg(rng, r=3)
    pb = scca_problem(cfg)
    A, B = random_feasible(pb, rng)
    A[0] = 0.0  # a zero row must stay zero; renormalize to get back onto the manifold
    A = A @ np.linalg.inv(np.linalg.cholesky(A.T @ cfg.Mx @ A)).T
    A2, B2 = scca_canonical_form(cfg, A, B)
    C = A2.T @ cfg.Sxy @ B2
    np.testing.assert_allclose(C, np.diag(np.diag(C)), atol=1e-12)
    assert np.all(np.diff(np.diag(C)) <= 0) and np.all(np.diag(C) >= 0)
    assert check_point(pb.man_A, A2) <= 1e-10 and check_point(pb.man_B, B2) <= 1e-10
    assert not A2[0].any()
    assert pb.f.value(A2) == pytest.approx(pb.f.value(A)) and pb.g.value(B2) == pytest.approx(pb.g.value(B))
    assert pb.objective(A2, B2) <= pb.objective(A, B) + 1e-12


def test_scca_init_truncates(rng):
    cfg = cca_cfg(rng, r=1)
    S = cfg.Sxy
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        A0, _ = scca_init(cfg)
    kept = np.abs(S) >= np.abs(np.diag(S)).max()
    # left singular vector of the truncated matrix lives on rows with kept entries
    assert np.all(np.abs(A0[~kept.any(axis=1)]) < 1e-12)


def test_mismatched_rows(rng):
    with pytest.raises(ValueError):
        SccaConfig(np.ones((3, 2)), np.ones((4, 2)), 1, 0.1, 0.1)
