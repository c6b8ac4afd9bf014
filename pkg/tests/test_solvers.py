import numpy as np
import pytest
from _checks import assert_nmapg_invariant, assert_nonincreasing

from l12prox.cs import CsConfig, cs_objective, gen_instance
from l12prox.prox import phi_objective, prox_l1, prox_l12_numerical
from l12prox.solvers import (
    L1,
    L12,
    NO_PENALTY,
    DivergenceError,
    SmoothObjective,
    SolverConfig,
    SolverTrace,
    estimate_lipschitz,
    l12_numerical_penalty,
    quadratic_objective,
    solve_dca,
    solve_fista,
    solve_nmapg,
    solve_pg,
    solve_scp,
)


def shifted_square(b):
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return SmoothObjective(value=lambda x: 0.5 * float(np.sum((x - b) ** 2)),
                           gradient=lambda x: x - b, lipschitz=1.0)


def composite(f, penalty, lam, x):
    return f.value(x) + lam * penalty.value(x)


@pytest.fixture(scope="module")
def cs50():
    inst = gen_instance(CsConfig(d=50), seed=7)
    return inst, cs_objective(inst.A, inst.y)


@pytest.fixture(scope="module")
def spd_quadratic():
    r = np.random.default_rng(3)
    M = r.standard_normal((8, 8))
    H = M @ M.T + 0.5 * np.eye(8)
    b = r.standard_normal(8)
    return quadratic_objective(H, b), np.linalg.solve(H, b)


# ---- proximal gradient ---------------------------------------------------

def test_pg_exact_gradient_step():
    b = np.array([1.0, -2.0, 3.0])
    x, trace = solve_pg(shifted_square(b), NO_PENALTY, 0.0, np.zeros(3), SolverConfig(max_iters=1))
    np.testing.assert_array_equal(x, b)
    assert trace.n_iters == 1


@pytest.mark.parametrize("solver", [solve_pg, solve_fista])
def test_soft_threshold_fixed_point(solver):
    x, _ = solver(shifted_square(2.0), L1, 1.0, np.zeros(1))
    np.testing.assert_allclose(x, [1.0], atol=1e-8)


def test_pg_descent_on_small_least_squares():
    r = np.random.default_rng(11)
    A, y = r.standard_normal((3, 5)), r.standard_normal(3)
    f = cs_objective(A, y)
    _, trace = solve_pg(f, L12, 0.1, np.zeros(5), SolverConfig(max_iters=500))
    assert_nonincreasing(trace.objective, 1e-9)


def test_trace_invariants(cs50):
    _, f = cs50
    for solver in (solve_pg, solve_fista):
        _, tr = solver(f, L12, 1e-3, np.zeros(200), SolverConfig(max_iters=50))
        assert np.all(np.diff(tr.iteration) > 0)
        assert np.all(np.diff(tr.seconds) >= 0)
        assert tr.solver


# ---- FISTA ---------------------------------------------------------------

def test_fista_beats_pg_after_ten_iterations():
    r = np.random.default_rng(5)
    M = r.standard_normal((30, 30))
    H = M @ M.T / 30 + 1e-3 * np.eye(30)
    f = quadratic_objective(H, r.standard_normal(30))
    cfg = SolverConfig(max_iters=10, tol=1e-300)
    _, tp = solve_pg(f, NO_PENALTY, 0.0, np.zeros(30), cfg)
    _, tf = solve_fista(f, NO_PENALTY, 0.0, np.zeros(30), cfg)
    assert tf.final_objective <= tp.final_objective


def test_fista_reaches_unconstrained_minimizer(spd_quadratic):
    f, x_star = spd_quadratic
    x, tr = solve_fista(f, NO_PENALTY, 0.0, np.zeros(8), SolverConfig(tol=1e-12, max_iters=100000))
    assert tr.converged
    np.testing.assert_allclose(x, x_star, atol=1e-8)


# ---- nmAPG ---------------------------------------------------------------

def test_nmapg_matches_fista_on_convex_problem(cs50):
    _, f = cs50
    cfg = SolverConfig(max_iters=20000, tol=1e-10)
    _, tn = solve_nmapg(f, L1, 1e-2, np.zeros(200), cfg)
    _, tf = solve_fista(f, L1, 1e-2, np.zeros(200), cfg)
    assert abs(tn.final_objective - tf.final_objective) <= 1e-6


def test_nmapg_one_dimensional_penalty_vanishes():
    x, _ = solve_nmapg(shifted_square(2.0), L12, 0.5, np.zeros(1))
    np.testing.assert_allclose(x, [2.0], atol=1e-8)


def test_nmapg_not_worse_than_scp(cs50):
    _, f = cs50
    _, tn = solve_nmapg(f, L12, 1e-3, np.zeros(200))
    _, ts = solve_scp(f, 1e-3, np.zeros(200))
    assert tn.final_objective <= ts.final_objective + 1e-6


def test_nmapg_acceptance_invariant(cs50):
    _, f = cs50
    _, tr = solve_nmapg(f, L12, 1e-3, np.zeros(200), SolverConfig(max_iters=3000))
    assert assert_nmapg_invariant(tr) > 100


def test_nmapg_numerical_prox_agrees_with_closed_form(cs50):
    _, f = cs50
    _, tc = solve_nmapg(f, L12, 1e-3, np.zeros(200))
    _, tn = solve_nmapg(f, l12_numerical_penalty(), 1e-3, np.zeros(200))
    assert abs(tc.final_objective - tn.final_objective) <= 1e-4 * abs(tc.final_objective)


def test_nmapg_without_forward_map_gives_same_iterates(cs50):
    inst, f = cs50
    plain = SmoothObjective(f.value, f.gradient, f.lipschitz)
    cfg = SolverConfig(max_iters=200)
    x1, t1 = solve_nmapg(f, L12, 1e-3, np.zeros(200), cfg)
    x2, t2 = solve_nmapg(plain, L12, 1e-3, np.zeros(200), cfg)
    np.testing.assert_allclose(x1, x2, atol=1e-9)


# ---- DCA and SCP ---------------------------------------------------------

def test_dca_zero_weight_solves_smooth_problem(spd_quadratic):
    f, x_star = spd_quadratic
    cfg = SolverConfig(tol=1e-12, inner_tol=1e-12, inner_max_iters=100000)
    x, _ = solve_dca(f, 0.0, np.zeros(8), cfg)
    np.testing.assert_allclose(x, x_star, atol=1e-8)


@pytest.mark.parametrize("solver", [solve_dca, solve_scp])
def test_dc_solvers_one_dimensional(solver):
    x, _ = solver(shifted_square(2.0), 0.5, np.zeros(1))
    np.testing.assert_allclose(x, [2.0], atol=1e-6)


def test_dca_close_to_nmapg_but_slower(cs50):
    _, f = cs50
    _, tn = solve_nmapg(f, L12, 1e-3, np.zeros(200))
    _, td = solve_dca(f, 1e-3, np.zeros(200))
    assert abs(td.final_objective - tn.final_objective) <= 1e-4
    assert td.elapsed > tn.elapsed


def test_dca_records_inner_iterations_and_warnings(cs50):
    _, f = cs50
    _, td = solve_dca(f, 1e-3, np.zeros(200), SolverConfig(max_iters=5, inner_max_iters=3))
    assert len(td.warnings) == 5
    assert td.info["inner_iters"][1] == 3


def test_scp_first_iterate():
    r = np.random.default_rng(2)
    A, y = r.standard_normal((6, 9)), r.standard_normal(6)
    f = cs_objective(A, y)
    lam = 0.3
    x1, _ = solve_scp(f, lam, np.zeros(9), SolverConfig(max_iters=1))
    L = f.lipschitz
    np.testing.assert_allclose(x1, prox_l1(-f.gradient(np.zeros(9)) / L, lam / L), atol=1e-15)


def test_scp_descent_on_cs(cs50):
    _, f = cs50
    _, tr = solve_scp(f, 1e-3, np.zeros(200), SolverConfig(max_iters=3000))
    assert_nonincreasing(tr.objective, 1e-9)


def test_scp_on_prox_objective_follows_dc_prox_iteration():
    r = np.random.default_rng(8)
    for _ in range(50):
        z = r.standard_normal(r.integers(1, 6))
        lam = float(r.uniform(0.05, 2.0))
        seen = []
        base = shifted_square(z)
        spy = SmoothObjective(base.value, lambda x: (seen.append(x.copy()), x - z)[1], 1.0)
        x_scp, _ = solve_scp(spy, lam, np.zeros(z.size), SolverConfig(max_iters=1000, tol=1e-10))
        ref = []
        x_num = prox_l12_numerical(z, lam, max_iters=1000, tol=1e-10,
                                   callback=lambda x: ref.append(x.copy()))
        seq = seen[1:] + [x_scp]
        assert len(seq) == len(ref)
        np.testing.assert_allclose(np.array(seq), np.array(ref), atol=1e-12)
        assert phi_objective(x_scp, z, lam) == pytest.approx(phi_objective(x_num, z, lam), abs=1e-12)


# ---- shared properties ---------------------------------------------------

def test_all_solvers_agree_without_penalty(spd_quadratic):
    f, x_star = spd_quadratic
    cfg = SolverConfig(tol=1e-12, max_iters=100000, inner_tol=1e-12, inner_max_iters=100000)
    x0 = np.zeros(8)
    results = [
        solve_pg(f, L12, 0.0, x0, cfg)[0],
        solve_fista(f, L1, 0.0, x0, cfg)[0],
        solve_nmapg(f, L12, 0.0, x0, cfg)[0],
        solve_scp(f, 0.0, x0, cfg)[0],
        solve_dca(f, 0.0, x0, cfg)[0],
    ]
    for x in results:
        np.testing.assert_allclose(x, x_star, atol=1e-6)


@pytest.mark.parametrize("name", ["pg", "fista", "nmapg", "scp", "dca"])
def test_solvers_are_deterministic(cs50, name):
    _, f = cs50
    cfg = SolverConfig(max_iters=100)
    run = {
        "pg": lambda: solve_pg(f, L12, 1e-3, np.zeros(200), cfg),
        "fista": lambda: solve_fista(f, L1, 1e-3, np.zeros(200), cfg),
        "nmapg": lambda: solve_nmapg(f, L12, 1e-3, np.zeros(200), cfg),
        "scp": lambda: solve_scp(f, 1e-3, np.zeros(200), cfg),
        "dca": lambda: solve_dca(f, 1e-3, np.zeros(200), SolverConfig(max_iters=5)),
    }[name]
    (x1, t1), (x2, t2) = run(), run()
    np.testing.assert_array_equal(x1, x2)
    assert t1.objective == t2.objective


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_divergence_is_reported():
    f = SmoothObjective(lambda x: float(-np.sum(x ** 2)) * 1e300, lambda x: -1e300 * x - 1e300, 1e-300)
    with pytest.raises(DivergenceError):
        solve_pg(f, NO_PENALTY, 0.0, np.ones(2), SolverConfig(max_iters=50))


@pytest.mark.parametrize("kw", [{"max_iters": 0}, {"tol": 0.0}, {"eta": 1.0}, {"delta": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_objective_rejects_bad_lipschitz():
    with pytest.raises(ValueError):
        SmoothObjective(lambda x: 0.0, lambda x: x, 0.0)


def test_trace_csv_round_trip(tmp_path, cs50):
    _, f = cs50
    _, tr = solve_nmapg(f, L12, 1e-3, np.zeros(200), SolverConfig(max_iters=20))
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("iter,seconds,objective,reporting_seconds,accepted")
    assert len(lines) == len(tr.iteration) + 1
    assert float(lines[-1].split(",")[2]) == tr.objective[-1]


def test_trace_record_pads_missing_columns():
    tr = SolverTrace()
    tr.record(0, 0.0, 1.0)
    tr.record(1, 0.1, 0.5, extra=3)
    tr.record(2, 0.2, 0.4)
    assert tr.info["extra"] == [None, 3, None]


# ---- Lipschitz estimate --------------------------------------------------

def test_lipschitz_identity():
    assert estimate_lipschitz(np.eye(5)) == pytest.approx(1.01, rel=1e-8)


def test_lipschitz_diagonal():
    assert estimate_lipschitz(np.diag([3.0, 1.0])) == pytest.approx(9.09, rel=1e-7)


def test_lipschitz_random_against_svd():
    A = np.random.default_rng(4).standard_normal((20, 80))
    exact = np.linalg.norm(A, 2) ** 2
    est = estimate_lipschitz(A)
    assert exact <= est <= 1.02 * exact


def test_lipschitz_zero_operator():
    assert estimate_lipschitz(np.zeros((3, 4))) == 1.0
