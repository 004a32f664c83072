import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svr_oracle import duality_gap, project
from svr_oracle import solve as oracle_solve
from weldparams import _smo_py
from weldparams._smo_backend import BACKEND, available_backends
from weldparams.dataset import GeneratorParams, synthesize
from weldparams.linear_model import standardize_stats
from weldparams.svr import (SvrHyperParams, SvrModel, compute_bias, dual_objective, fit_svr, fit_svr_arrays,
                            kkt_violations, predict_svr, rbf_gram, rbf_kernel, solve_svr_dual)

HP = SvrHyperParams()


def toy_instance(seed, n=None, d=16):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 9))
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
    y = rng.normal(size=n)
    mean, scale = standardize_stats(X)
    Z = (X - mean) / scale
    return rbf_gram(Z, Z, HP.gamma), (y - y.mean()) / (y.std() or 1.0)


# --- kernel ---------------------------------------------------------------

def test_rbf_examples():
    u = np.arange(16.0)
    assert rbf_kernel(u, u, 0.025) == 1.0
    v = u.copy()
    v[:10] += 2.0  # squared distance 40
    assert rbf_kernel(u, v, 0.025) == pytest.approx(math.exp(-1), rel=1e-15)
    assert rbf_kernel(u, v, 0.025) == pytest.approx(0.367879, abs=1e-6)


@given(st.lists(st.floats(-5, 5), min_size=16, max_size=16), st.lists(st.floats(-5, 5), min_size=16, max_size=16))
def test_rbf_symmetric_and_bounded(u, v):
    k = rbf_kernel(u, v, 0.025)
    assert k == rbf_kernel(v, u, 0.025)
    assert 0 < k <= 1


def test_gram_matches_pairwise_kernel():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(5, 16)), rng.normal(size=(4, 16))
    G = rbf_gram(A, B, 0.3)
    ref = np.array([[rbf_kernel(a, b, 0.3) for b in B] for a in A])
    np.testing.assert_allclose(G, ref, rtol=1e-12)
    assert np.all(np.diag(rbf_gram(A, A, 0.3)) == 1.0)


# --- solver vs brute force -----------------------------------------------

def test_projection_is_feasible_and_optimal():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, s = rng.normal(size=6) * 40, rng.normal(size=6) * 40
        pa, ps = project(a, s, 35.0)
        assert np.all((pa >= 0) & (pa <= 35) & (ps >= 0) & (ps <= 35))
        assert abs(pa.sum() - ps.sum()) < 1e-9
        # no random feasible point is closer
        for _ in range(20):
            qa, qs = project(pa + rng.normal(size=6), ps + rng.normal(size=6), 35.0)
            d0 = np.sum((pa - a) ** 2 + (ps - s) ** 2)
            assert d0 <= np.sum((qa - a) ** 2 + (qs - s) ** 2) + 1e-9


def toy_1d():
    x = np.linspace(0, 5, 6)[:, None]
    y = np.sin(x[:, 0])
    z = (x - x.mean()) / x.std()
    return rbf_gram(z, z, HP.gamma), (y - y.mean()) / y.std()


@pytest.mark.xfail(strict=True, reason="kkt_tol=1e-3 leaves a 1.4e-4 objective gap on this near-singular kernel")
def test_one_dimensional_toy_default_tolerance():
    K, y = toy_1d()
    _, obj_o = oracle_solve(K, y, HP.c, HP.epsilon)
    sol = solve_svr_dual(K, y, HP)
    assert sol.converged
    assert abs(dual_objective(sol.beta, K, y, HP.epsilon) - obj_o) < 1e-4


def test_one_dimensional_toy_tight_tolerance():
    K, y = toy_1d()
    beta_o, obj_o = oracle_solve(K, y, HP.c, HP.epsilon)
    assert duality_gap(beta_o, K, y, HP.c, HP.epsilon) < 1e-9
    sol = solve_svr_dual(K, y, SvrHyperParams(kkt_tol=1e-6))
    assert sol.converged
    assert abs(dual_objective(sol.beta, K, y, HP.epsilon) - obj_o) < 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_small_instances_match_oracle(seed):
    K, y = toy_instance(seed)
    sol = solve_svr_dual(K, y, HP)
    beta_o, obj_o = oracle_solve(K, y, HP.c, HP.epsilon)
    assert duality_gap(beta_o, K, y, HP.c, HP.epsilon) < 1e-9
    assert sol.converged
    assert abs(dual_objective(sol.beta, K, y, HP.epsilon) - obj_o) < 1e-4
    assert kkt_violations(sol.beta, sol.residual(y), HP.c, HP.epsilon, HP.kkt_tol).size == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.5, 50), st.floats(0, 0.8))
def test_feasibility_and_monotone_objective(seed, C, eps):
    K, y = toy_instance(seed, n=12)
    hp = SvrHyperParams(c=C, epsilon=eps)
    sol = solve_svr_dual(K, y, hp, record=True)
    assert abs(sol.beta.sum()) < 1e-10
    assert np.all(np.abs(sol.beta) <= C)
    h = np.array(sol.history)
    assert np.all(np.diff(h) >= -1e-10 * max(1.0, np.abs(h).max()))
    assert h[-1] == pytest.approx(dual_objective(sol.beta, K, y, eps), abs=1e-8)
    np.testing.assert_allclose(sol.f, K @ sol.beta, atol=1e-9)
    if sol.converged:
        assert kkt_violations(sol.beta, sol.residual(y), C, eps, hp.kkt_tol).size == 0


def test_line_search_matches_grid():
    rng = np.random.default_rng(3)
    for _ in range(200):
        bi, bj = rng.uniform(-2, 2, size=2)
        gi, gj = rng.normal(size=2) * 2
        eta, eps, hi = rng.uniform(0.01, 3), rng.uniform(0, 1), rng.uniform(0.1, 4)

        def phi(t):
            return t * (gi - gj) - eta * t * t / 2 - eps * (abs(bi + t) - abs(bi)) - eps * (abs(bj - t) - abs(bj))

        t = _smo_py.line_search(bi, bj, gi, gj, eta, eps, hi)
        grid = np.linspace(0, hi, 4001)
        assert 0 <= t <= hi
        assert phi(t) >= max(phi(g) for g in grid) - 1e-9


def test_max_passes_returns_flag_not_error():
    K, y = toy_instance(5, n=30)
    sol = solve_svr_dual(K, y, SvrHyperParams(max_passes=2))
    assert sol.n_iter == 2 and not sol.converged


def test_bias_midpoint_when_no_free_vectors():
    beta = np.zeros(3)
    y = np.array([0.05, -0.05, 0.0])
    b = compute_bias(beta, np.zeros(3), y, 1.0, 0.1)
    # feasible interval is [max(y) - eps, min(y) + eps]
    assert b == pytest.approx(0.5 * ((0.05 - 0.1) + (-0.05 + 0.1)))


# --- backends -------------------------------------------------------------

def test_backends_agree_exactly():
    backends = available_backends()
    if len(backends) < 2:
        pytest.skip("compiled backend not built")
    for seed in range(5):
        K, y = toy_instance(seed, n=40)
        out = {name: solve(K, y, 35.0, 0.1, 1e-3, 10000, True) for name, solve in backends.items()}
        a, b = out["python"], out["cython"]
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        assert a[2:4] == b[2:4]
        assert a[4] == b[4]


def test_backend_name():
    assert BACKEND in ("cython", "python")


# --- model ------------------------------------------------------------------

def test_constant_labels_give_constant_predictions():
    gp = GeneratorParams(energy_a=0, amp_a=0, press_a=0, noise_std=(0, 0, 0))
    ds = synthesize(20, gp, seed=1)
    m = fit_svr(ds)
    assert all(c.size == 0 for c in m.coef)
    np.testing.assert_allclose(m.predict(synthesize(5, seed=9).X), np.tile(ds.Y[0], (5, 1)), rtol=1e-12)


def test_large_c_wide_tube_residual_bound():
    ds = synthesize(60, GeneratorParams().with_noise((0, 0, 0)), seed=2)
    hp = SvrHyperParams(c=1e4, epsilon=0.5)
    m = fit_svr(ds, hp)
    assert all(m.converged)
    resid = (m.predict(ds.X) - ds.Y) / m.target_scale
    assert np.all(np.abs(resid) <= hp.epsilon + hp.kkt_tol + 1e-9)


def test_fit_invariants_and_determinism():
    ds = synthesize(80, seed=4)
    m = fit_svr(ds)
    for beta in m.coef:
        assert abs(beta.sum()) < 1e-9
        assert np.all(np.abs(beta) <= HP.c)
    again = fit_svr(ds)
    x = synthesize(7, seed=5).X
    assert np.array_equal(m.predict(x), again.predict(x))
    np.testing.assert_allclose(predict_svr(m, x[0]), m.predict(x)[0], rtol=1e-13)


def test_interior_points_inside_tube():
    ds = synthesize(40, seed=8)
    m = fit_svr(ds)
    Z = (ds.X - m.input_mean) / m.input_scale
    T = (ds.Y - m.target_mean) / m.target_scale
    pred = (m.predict(ds.X) - m.target_mean) / m.target_scale
    for k in range(3):
        sv = {tuple(r) for r in m.support[k]}
        interior = np.array([tuple(z) not in sv for z in Z])
        assert np.all(np.abs(pred[interior, k] - T[interior, k]) <= HP.epsilon + HP.kkt_tol + 1e-9)


def test_zero_coefficients_predict_bias():
    m = SvrModel(HP, np.zeros(16), np.ones(16), np.array([10.0, 50.0, 2.0]), np.array([2.0, 4.0, 0.5]),
                 (np.zeros((0, 16)),) * 3, (np.zeros(0),) * 3, np.array([1.0, -1.0, 0.0]))
    np.testing.assert_array_equal(m.predict(np.ones(16)), [12.0, 46.0, 2.0])


def test_hyperparameter_validation():
    assert HP.to_dict() == {"c": 35.0, "epsilon": 0.1, "gamma": 0.025, "kkt_tol": 1e-3, "max_passes": 10000}
    for bad in ({"c": 0}, {"gamma": 0}, {"epsilon": -1}, {"kkt_tol": 0}, {"max_passes": 0}):
        with pytest.raises(ValueError):
            SvrHyperParams(**bad)
    with pytest.raises(ValueError):
        fit_svr_arrays(np.zeros((0, 16)), np.zeros((0, 3)))
