import numpy as np
import pytest

from scdual import PanelDataset, solve_dual
from scdual.balancer import uniform_weights
from scdual.estimators import (
    StaggeredPanel,
    did_reference,
    fit_sc,
    sc_effect_path,
    sc_estimate,
    staggered_tau_t,
    twfe_event_study,
)
from scdual.errors import ConsistencyError, EmptyCohortError, ShapeError

from conftest import make_panel


def additive_panel(n=10, t0=4, k_post=2, tau=None, seed=0):
    rng = np.random.default_rng(seed)
    T = t0 + k_post + 1
    Y = rng.standard_normal(n)[:, None] + rng.standard_normal(T)[None, :]
    D = np.arange(n) < n // 2
    if tau is not None:
        Y[D, t0:] += tau
    return PanelDataset(Y, D, t0)


def test_twfe_recovers_known_effects():
    tau = np.array([1.0, 2.0, -0.5])
    data = additive_panel(tau=tau)
    res = twfe_event_study(data)
    np.testing.assert_allclose(res.post, tau, atol=1e-10)
    np.testing.assert_allclose(res.pre, 0, atol=1e-10)
    assert -1 not in res.horizons


def test_twfe_pure_fixed_effects_gives_zero():
    res = twfe_event_study(additive_panel())
    np.testing.assert_allclose(res.tau, 0, atol=1e-10)


def test_twfe_matches_closed_form(rng):
    data = make_panel(n=15, t0=5, k_post=3, seed=4)
    np.testing.assert_allclose(twfe_event_study(data).tau, did_reference(data), atol=1e-9)


def test_twfe_invariant_to_unit_shifts(rng):
    data = make_panel(n=15, t0=5, k_post=3)
    shifted = PanelDataset(data.outcomes + rng.standard_normal(15)[:, None], data.treated, data.t0)
    np.testing.assert_allclose(twfe_event_study(data).tau, twfe_event_study(shifted).tau, atol=1e-10)


def test_twfe_two_period_panel():
    data = make_panel(n=6, t0=2, k_post=-1)
    res = twfe_event_study(data)
    assert res.horizons.tolist() == [-2]
    np.testing.assert_allclose(res.tau, did_reference(data), atol=1e-12)


def test_sc_path_horizons():
    data = make_panel(t0=4, k_post=2)
    path = sc_effect_path(data, uniform_weights(data.treated))
    assert path.horizons.tolist() == [-4, -3, -2, -1, 0, 1, 2]
    assert path.post.size == 3 and path.pre.size == 4


def test_sc_uniform_weights_is_difference_in_means():
    data = make_panel()
    path = sc_effect_path(data, uniform_weights(data.treated))
    D = data.treated
    gap = data.outcomes[D].mean(0) - data.outcomes[~D].mean(0)
    np.testing.assert_allclose(path.tau, gap, atol=1e-12)


def test_sc_is_linear_in_post_outcomes(rng):
    data = make_panel(n=20, t0=4, k_post=2)
    sol = solve_dual(data.pre, data.treated)
    extra = rng.standard_normal((20, 3))
    Y2 = data.outcomes.copy()
    Y2[:, 4:] = 2.0 * Y2[:, 4:] + extra
    other = PanelDataset(Y2, data.treated, data.t0)
    a = sc_effect_path(data, sol).post
    b = sc_effect_path(other, sol).post
    e = sc_effect_path(PanelDataset(np.c_[data.pre, extra], data.treated, 4), sol).post
    np.testing.assert_allclose(b, 2 * a + e, atol=1e-12)


def test_sc_constant_effect_shift():
    base = additive_panel(n=30, seed=3)
    treated = additive_panel(n=30, seed=3, tau=np.array([0.7, 0.7, 0.7]))
    a = sc_estimate(base).tau_hat
    b = sc_estimate(treated).tau_hat
    np.testing.assert_allclose(b - a, 0.7, atol=1e-10)


def test_sc_exact_balance_recovers_effect_with_zero_zeta():
    data = additive_panel(n=30, tau=np.array([1.5, 1.5, 1.5]), seed=5)
    with pytest.warns(UserWarning, match="singular"):
        path, sol = fit_sc(data, zeta=0.0)
    np.testing.assert_allclose(path.post, 1.5, atol=1e-8)
    np.testing.assert_allclose(path.pre, 0, atol=1e-8)


def test_sc_weight_shape_checked():
    data = make_panel()
    with pytest.raises(ShapeError):
        sc_effect_path(data, np.ones(3))


def test_estimate_result_horizons():
    res = sc_estimate(make_panel(t0=4, k_post=2))
    assert res.horizons.tolist() == [0, 1, 2]
    assert res.n1 == 4 and res.pi_bar == pytest.approx(1 / 3)


def staggered(seed=0):
    rng = np.random.default_rng(seed)
    n, T = 30, 6
    Y = rng.standard_normal(n)[:, None] + np.arange(T)[None, :] + 0.1 * rng.standard_normal((n, T))
    dates = np.zeros(n, int)
    dates[:8] = 4
    dates[8:14] = 5
    return Y, dates


def test_staggered_uses_not_yet_treated_controls():
    Y, dates = staggered()
    panel = StaggeredPanel.from_adoption_dates(Y, dates)
    res = staggered_tau_t(panel, 5)
    assert res.n1 == 6
    assert res.pi_bar == pytest.approx(6 / 22)


def test_staggered_effect_recovered():
    Y, dates = staggered()
    Y = Y.copy()
    W = StaggeredPanel.from_adoption_dates(Y, dates).adoption
    Y[W] += 2.0
    res = staggered_tau_t(StaggeredPanel(Y, W), 4, zeta=0.0)
    assert res.tau_hat[0] == pytest.approx(2.0, abs=0.15)


def test_staggered_ignores_future_periods():
    Y, dates = staggered()
    Y2 = Y.copy()
    Y2[:, 4:] = 99.0
    a = staggered_tau_t(StaggeredPanel.from_adoption_dates(Y, dates), 4).tau_hat
    b = staggered_tau_t(StaggeredPanel.from_adoption_dates(Y2, dates), 4).tau_hat
    np.testing.assert_array_equal(a, b)


def test_staggered_errors():
    Y, dates = staggered()
    panel = StaggeredPanel.from_adoption_dates(Y, dates)
    with pytest.raises(EmptyCohortError):
        staggered_tau_t(panel, 6)
    with pytest.raises(EmptyCohortError):
        staggered_tau_t(panel, 2)
    W = panel.adoption.copy()
    W[0, -1] = False
    with pytest.raises(ConsistencyError):
        StaggeredPanel(Y, W)
