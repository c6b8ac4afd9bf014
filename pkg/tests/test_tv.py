import numpy as np
import pytest
from _checks import assert_nonincreasing

from l12prox.prox import prox_l12
from l12prox.tv import (
    GradientOperator,
    TvConfig,
    altmin_denoise,
    cgd_solve,
    image_rmse,
    piecewise_constant_image,
    split_objective,
    tv12_value,
    unvectorize,
    vectorize,
)


def naive_gradient(X):
    m, n = X.shape
    H = np.zeros((m, n))
    V = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            if j + 1 < n:
                H[i, j] = X[i, j + 1] - X[i, j]
            if i + 1 < m:
                V[i, j] = X[i + 1, j] - X[i, j]
    return H, V


# ---- gradient operator ---------------------------------------------------

def test_constant_image_has_no_edges():
    op = GradientOperator(5, 4)
    np.testing.assert_array_equal(op.apply(np.full((5, 4), 0.7)), np.zeros((20, 2)))


def test_ramp():
    op = GradientOperator(1, 6)
    G = op.apply(np.arange(6.0))
    np.testing.assert_array_equal(G[:, 0], [1, 1, 1, 1, 1, 0])
    np.testing.assert_array_equal(G[:, 1], 0)


def test_matches_naive_loops_in_column_major_order():
    X = np.random.default_rng(0).standard_normal((4, 5))
    H, V = naive_gradient(X)
    G = GradientOperator(4, 5).apply(vectorize(X))
    np.testing.assert_array_equal(G[:, 0], H.ravel(order="F"))
    np.testing.assert_array_equal(G[:, 1], V.ravel(order="F"))
    np.testing.assert_array_equal(unvectorize(vectorize(X), 4, 5), X)


def test_adjoint_identity():
    r = np.random.default_rng(1)
    for _ in range(20):
        m, n = r.integers(1, 12, size=2)
        op = GradientOperator(m, n)
        u, P = r.standard_normal(m * n), r.standard_normal((m * n, 2))
        assert abs(np.sum(op.apply(u) * P) - u @ op.adjoint(P)) <= 1e-10


def test_operator_dimension_checks():
    op = GradientOperator(3, 3)
    with pytest.raises(ValueError):
        op.apply(np.zeros(8))
    with pytest.raises(ValueError):
        op.adjoint(np.zeros((9, 3)))
    with pytest.raises(ValueError):
        GradientOperator(0, 3)


def test_normal_operator_dominates_identity():
    r = np.random.default_rng(2)
    op = GradientOperator(9, 7)
    for mu in (0.0, 0.1, 10.0):
        v = r.standard_normal(63)
        assert v @ op.normal(v, mu) >= v @ v - 1e-10


# ---- TV value ------------------------------------------------------------

def test_tv_value_examples():
    op = GradientOperator(4, 4)
    assert tv12_value(op, np.ones((4, 4))) == 0.0
    rows_equal = np.tile(np.array([0.0, 1.0, 0.3, 2.0]), (4, 1))
    assert tv12_value(op, rows_equal) == 0.0
    X = np.random.default_rng(3).standard_normal((4, 4))
    H, V = naive_gradient(X)
    naive = sum(abs(H[i, j]) + abs(V[i, j]) - np.hypot(H[i, j], V[i, j])
                for i in range(4) for j in range(4))
    assert tv12_value(op, X) == pytest.approx(naive, abs=1e-12)
    assert tv12_value(op, X) >= 0


# ---- conjugate gradients -------------------------------------------------

def test_cg_identity_system_one_step():
    op = GradientOperator(6, 5)
    rhs = np.random.default_rng(4).standard_normal(30)
    x, ok, iters = cgd_solve(op, 0.0, rhs)
    assert ok and iters == 1
    np.testing.assert_array_equal(x, rhs)


def test_cg_recovers_known_solution():
    op = GradientOperator(12, 10)
    x_known = np.random.default_rng(5).standard_normal(120)
    rhs = op.normal(x_known, 3.0)
    x, ok, _ = cgd_solve(op, 3.0, rhs, tol=1e-12, max_iters=1000)
    assert ok
    np.testing.assert_allclose(x, x_known, atol=1e-9)


def test_cg_energy_error_decreases():
    # the residual norm of CG can rise; the B-norm error cannot
    r = np.random.default_rng(6)
    op = GradientOperator(15, 15)
    for _ in range(5):
        mu = float(r.uniform(0.5, 50))
        x_known = r.standard_normal(225)
        rhs = op.normal(x_known, mu)
        errs = []

        def energy(x):
            e = x - x_known
            errs.append(float(e @ op.normal(e, mu)))

        cgd_solve(op, mu, rhs, tol=1e-10, max_iters=500, callback=energy)
        assert len(errs) > 3
        assert np.all(np.diff(errs) < 0)


def test_cg_flags_budget():
    op = GradientOperator(20, 20)
    rhs = np.random.default_rng(7).standard_normal(400)
    _, ok, iters = cgd_solve(op, 50.0, rhs, tol=1e-14, max_iters=2)
    assert not ok and iters == 2


# ---- split objective -----------------------------------------------------

def test_split_objective_examples():
    op = GradientOperator(3, 4)
    cfg = TvConfig(0.5)
    y = np.full((3, 4), 0.25)
    assert split_objective(op, y, np.zeros((12, 2)), y, cfg) == 0.0
    Y = np.random.default_rng(8).standard_normal((3, 4))
    G = op.apply(Y)
    assert split_objective(op, Y, np.zeros((12, 2)), Y, cfg) == pytest.approx(
        cfg.mu / 2 * np.sum(G ** 2), rel=1e-14)


def test_split_objective_term_by_term():
    r = np.random.default_rng(9)
    op = GradientOperator(4, 3)
    cfg = TvConfig(0.3, mu=2.0)
    x, y, W = r.standard_normal(12), r.standard_normal(12), r.standard_normal((12, 2))
    H, V = naive_gradient(unvectorize(x, 4, 3))
    Dx = np.column_stack([H.ravel(order="F"), V.ravel(order="F")])
    expected = 0.5 * sum((x - y) ** 2)
    expected += 0.3 * sum(abs(a) + abs(b) - np.hypot(a, b) for a, b in W)
    expected += 1.0 * np.sum((W - Dx) ** 2)
    assert split_objective(op, x, W, y, cfg) == pytest.approx(expected, abs=1e-10)


# ---- AltMin --------------------------------------------------------------

def test_config_rules():
    assert TvConfig(0.04).mu == pytest.approx(4.0)
    assert TvConfig(0.0).mu == 0.0
    with pytest.raises(ValueError):
        TvConfig(0.1, mu=0.0)
    with pytest.raises(ValueError):
        TvConfig(-0.1)


def test_zero_weight_returns_input():
    y = np.random.default_rng(10).random((8, 9))
    x, tr = altmin_denoise(y, TvConfig(0.0))
    np.testing.assert_array_equal(x, y)
    assert tr.n_iters == 1


def test_constant_image_unchanged():
    y = np.full((10, 10), 0.4)
    x, _ = altmin_denoise(y, TvConfig(0.1))
    np.testing.assert_allclose(x, y, atol=1e-8)


@pytest.fixture(scope="module")
def noisy_small():
    clean = piecewise_constant_image(24, 24)
    noisy = clean + 0.05 * np.random.default_rng(11).standard_normal(clean.shape)
    return clean, noisy


def test_descent_with_accurate_cg(noisy_small):
    _, noisy = noisy_small
    for lam in (0.02, 0.16, 1.28):
        _, tr = altmin_denoise(noisy, TvConfig(lam, cgd_tol=1e-10, cgd_max_iters=2000))
        assert_nonincreasing(tr.objective, 1e-6)
        assert not tr.warnings


def test_w_update_is_exact(noisy_small):
    _, noisy = noisy_small
    cfg = TvConfig(0.1, outer_iters=3, cgd_tol=1e-10, cgd_max_iters=2000)
    x, _ = altmin_denoise(noisy, cfg)
    op = GradientOperator(*noisy.shape)
    W = np.array([prox_l12(g, cfg.lam / cfg.mu) for g in op.apply(x)])
    h = split_objective(op, x, W, noisy, cfg)
    r = np.random.default_rng(12)
    for scale in (1e-6, 1e-4, 1e-2):
        for _ in range(20):
            Wp = W + scale * r.standard_normal(W.shape)
            assert h <= split_objective(op, x, Wp, noisy, cfg) + 1e-12


def test_cg_shortfall_is_recorded(noisy_small):
    _, noisy = noisy_small
    _, tr = altmin_denoise(noisy, TvConfig(1.0, cgd_max_iters=1, cgd_tol=1e-14, outer_iters=3))
    assert len(tr.warnings) == 3
    assert tr.info["cgd_converged"][1] is False


def test_denoising_helps(noisy_small):
    clean, noisy = noisy_small
    x, _ = altmin_denoise(noisy, TvConfig(0.08))
    assert image_rmse(x, clean) < image_rmse(noisy, clean)


def test_rejects_bad_image():
    with pytest.raises(ValueError):
        altmin_denoise(np.zeros(5), TvConfig(0.1))


def test_test_image_range():
    img = piecewise_constant_image()
    assert img.shape == (64, 64)
    assert img.min() >= 0 and img.max() <= 1
    assert len(np.unique(img)) >= 4
