import numpy as np
import pytest

from scdual import PanelDataset
from scdual.dgp import DgpSpec, simulate
from scdual.estimators import sc_estimate
from scdual.errors import DegenerateDesignError
from scdual.inference import bootstrap_sc, normal_interval, plugin_variance_as, plugin_variance_van

from conftest import make_panel


def test_plugin_van_arithmetic():
    data = PanelDataset(np.arange(12.0).reshape(4, 3), [1, 1, 0, 0], 2)
    # mean(r^2) = 1, pi_bar * n = 2
    assert plugin_variance_van(data, [1.0, -1.0]) == pytest.approx(0.5)
    assert plugin_variance_van(data, [1.0, -1.0, 7.0, 7.0]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        plugin_variance_van(data, [1.0, 2.0, 3.0])


def test_plugin_as_arithmetic():
    data = PanelDataset(np.zeros((4, 3)), [1, 1, 0, 0], 2)
    v = plugin_variance_as(data, [1.0, 1.0], [0.5, 0.5])
    assert v == pytest.approx(2.0 / 2.0)


def test_normal_interval():
    lo, hi = normal_interval(1.0, 4.0, 0.9)
    assert hi - 1.0 == pytest.approx(1.6448536269514722 * 2.0)
    assert 1.0 - lo == pytest.approx(hi - 1.0)


def test_constant_outcomes_have_zero_se():
    Y = np.tile([1.0, 2.0, 3.0, 4.0], (20, 1))
    Y[:, 0] += np.linspace(0, 1, 20)  # vary the features, not the outcome gap
    D = np.arange(20) < 8
    data = PanelDataset(Y, D, 3)
    res = bootstrap_sc(data, b_boot=100, horizon=0, seed=1)
    assert res.se == pytest.approx(0.0, abs=1e-8)
    assert res.point == pytest.approx(0.0, abs=1e-8)


def test_duplicated_units_keep_point_estimate():
    # exact balance has no n-dependent penalty, so copies change nothing
    data = make_panel(n=40, t0=3, k_post=1, seed=8)
    doubled = data.subset(np.r_[np.arange(40), np.arange(40)])
    a = sc_estimate(data, zeta=0.0).tau_hat
    np.testing.assert_allclose(a, sc_estimate(doubled, zeta=0.0).tau_hat, atol=1e-9)
    # the ridge scales with 1/n: doubling n matches zeta * sqrt(2)
    b = sc_estimate(doubled, zeta=np.sqrt(2.0)).tau_hat
    np.testing.assert_allclose(sc_estimate(data).tau_hat, b, atol=1e-9)


def test_bootstrap_is_reproducible_and_thread_independent():
    data = simulate(DgpSpec("rw", n=120), 0).panel
    a = bootstrap_sc(data, b_boot=100, seed=3)
    b = bootstrap_sc(data, b_boot=100, seed=3, threads=3)
    assert a == b
    assert a.ci_low < a.point < a.ci_high
    c = bootstrap_sc(data, b_boot=100, seed=4)
    assert c.se != a.se


def test_normal_method_is_symmetric():
    data = simulate(DgpSpec("rw", n=120), 0).panel
    res = bootstrap_sc(data, b_boot=100, seed=3, method="normal")
    assert res.point - res.ci_low == pytest.approx(res.ci_high - res.point)


def test_stratified_never_skips():
    data = make_panel(n=12, t0=4, k_post=1, n1=1)
    res = bootstrap_sc(data, b_boot=100, stratified=True, seed=0)
    assert res.skipped == 0


def test_too_many_degenerate_replicates():
    data = make_panel(n=6, t0=4, k_post=1, n1=1)
    with pytest.raises(DegenerateDesignError):
        bootstrap_sc(data, b_boot=100, seed=0)


def test_argument_checks(small_panel):
    with pytest.raises(ValueError):
        bootstrap_sc(small_panel, b_boot=50)
    with pytest.raises(ValueError):
        bootstrap_sc(small_panel, level=1.5)
    with pytest.raises(ValueError):
        bootstrap_sc(small_panel, method="bca")
