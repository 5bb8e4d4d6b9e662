import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from scdual import SolverOptions, kkt_report, solve_dual, solve_primal_reference
from scdual.balancer import dual_objective, primal_objective, uniform_weights
from scdual.errors import ConvergenceError, ExpOverflowError, RangeError, ShapeError


def instance(seed, n=40, p=3, share=0.4):
    rng = np.random.default_rng(seed)
    D = np.zeros(n, bool)
    D[: max(1, int(share * n))] = True
    X = rng.standard_normal((n, p)) + 0.5 * D[:, None]
    return X, D


def test_no_features_gives_uniform_weights():
    D = np.array([1, 0, 0, 0, 1, 0], bool)
    sol = solve_dual(None, D)
    np.testing.assert_allclose(sol.weights, uniform_weights(D), atol=1e-12)
    assert np.mean(sol.weights * ~D) == pytest.approx(1.0)


def test_balanced_groups_need_no_tilting():
    X = np.array([[1.0], [-1], [1], [-1], [2], [-2]])
    D = np.array([1, 1, 0, 0, 0, 0], bool)
    sol = solve_dual(X, D, zeta=0.0)
    np.testing.assert_allclose(sol.weights[~D], 1.5, atol=1e-10)
    np.testing.assert_allclose(sol.beta, 0, atol=1e-10)


def test_exact_balance_at_zero_zeta():
    X, D = instance(1, n=60, p=2)
    sol = solve_dual(X, D, zeta=0.0)
    np.testing.assert_allclose(sol.imbalance, 0, atol=1e-9)


@pytest.mark.parametrize("zeta", [0.5, 2.0])
def test_matches_primal_reference(zeta):
    X, D = instance(7, n=12, p=2)
    dual = solve_dual(X, D, zeta)
    primal = solve_primal_reference(X, D, zeta)
    assert np.max(np.abs(dual.weights - primal.weights)) < 1e-4
    assert primal_objective(dual.weights, X, D, zeta) <= primal_objective(primal.weights, X, D, zeta) + 1e-9


def test_primal_reference_size_limit():
    X, D = instance(0, n=201)
    with pytest.raises(RangeError):
        solve_primal_reference(X, D)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(6, 80), p=st.integers(0, 5), zeta=st.sampled_from([0.1, 1.0, 3.0]))
def test_kkt_fuzz(seed, n, p, zeta):
    X, D = instance(seed, n, p)
    try:
        sol = solve_dual(X, D, zeta)
    except ExpOverflowError:
        assume(False)  # tiny draws can lack overlap
    assert sol.converged
    assert sol.kkt_residual <= 1e-9
    assert kkt_report(sol, X, D).max_abs <= 1e-9
    assert abs(np.mean(sol.weights * ~D) - 1) <= 1e-8
    assert np.all(sol.weights[~D] >= 0) and np.all(sol.weights[D] == 0)


def test_perturbed_solution_shows_residual():
    X, D = instance(3)
    sol = solve_dual(X, D)
    from dataclasses import replace
    bad = replace(sol, beta=sol.beta + 0.1)
    assert kkt_report(bad, X, D).max_abs > 1e-4


def test_dual_objective_is_convex_on_segments():
    X, D = instance(5, n=30, p=2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a0, a1 = rng.standard_normal(2)
        b0, b1 = rng.standard_normal((2, 2))
        f0 = dual_objective(a0, b0, X, D, 1.0)
        f1 = dual_objective(a1, b1, X, D, 1.0)
        for lam in (0.25, 0.5, 0.75):
            fm = dual_objective(lam * a0 + (1 - lam) * a1, lam * b0 + (1 - lam) * b1, X, D, 1.0)
            assert fm <= lam * f0 + (1 - lam) * f1 + 1e-12


def test_minimizer_beats_nearby_points():
    X, D = instance(9)
    sol = solve_dual(X, D, 1.0)
    f = dual_objective(sol.alpha, sol.beta, X, D, 1.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        d = 1e-3 * rng.standard_normal(X.shape[1] + 1)
        assert dual_objective(sol.alpha + d[0], sol.beta + d[1:], X, D, 1.0) >= f


def test_rotation_invariance():
    X, D = instance(11, p=3)
    Q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((3, 3)))
    a = solve_dual(X, D, 1.0).weights
    b = solve_dual(X @ Q, D, 1.0).weights
    np.testing.assert_allclose(a, b, rtol=1e-8)


def test_shift_invariance():
    X, D = instance(12)
    a = solve_dual(X, D, 1.0).weights
    b = solve_dual(X + np.array([5.0, -3.0, 100.0]), D, 1.0).weights
    np.testing.assert_allclose(a, b, rtol=1e-7)


def test_imbalance_grows_with_zeta():
    X, D = instance(13, n=50)
    norms = [solve_dual(X, D, z).imbalance_norm for z in (0.0, 0.5, 1.0, 2.0, 5.0, 20.0)]
    assert norms[0] < 1e-9
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))


def test_large_zeta_approaches_uniform():
    X, D = instance(14)
    sol = solve_dual(X, D, 1e6)
    np.testing.assert_allclose(sol.weights, uniform_weights(D), rtol=1e-3)


def test_collinear_features_get_ridge():
    X, D = instance(15, p=2)
    X = np.column_stack([X, X[:, 0]])
    with pytest.warns(UserWarning, match="singular"):
        sol = solve_dual(X, D, 0.0)
    assert sol.converged
    np.testing.assert_allclose(sol.imbalance, 0, atol=1e-8)


def test_separation_raises_overflow():
    X = np.array([[0.0], [1], [2], [3], [10], [11]])
    D = np.array([0, 0, 0, 0, 1, 1], bool)
    with pytest.raises(ExpOverflowError):
        solve_dual(X, D, 0.0)


def test_nonconvergence_carries_best_iterate():
    X, D = instance(16)
    with pytest.raises(ConvergenceError) as info:
        solve_dual(X, D, 1.0, SolverOptions(max_iter=1))
    assert info.value.best is not None and not info.value.best.converged


def test_input_validation():
    X, D = instance(17)
    with pytest.raises(ShapeError):
        solve_dual(X[:-1], D)
    with pytest.raises(ValueError):
        solve_dual(X, np.ones_like(D))
    with pytest.raises(ValueError):
        solve_dual(X, D, zeta=-1.0)
    with pytest.raises(ValueError):
        SolverOptions.from_dict({"nope": 1})
