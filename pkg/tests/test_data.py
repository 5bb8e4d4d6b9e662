import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scdual import PanelDataset, load_panel_csv, write_panel_csv
from scdual.dgp import DgpSpec, simulate
from scdual.errors import BalanceError, ConsistencyError, PanelIOError, ParseError, RangeError

from conftest import make_panel


def _write(path, text):
    path.write_text(text)
    return path


def test_round_trip_is_bit_exact(tmp_path, small_panel):
    p = tmp_path / "p.csv"
    write_panel_csv(small_panel, p)
    back = load_panel_csv(p, small_panel.t0)
    assert back.equals(small_panel)


def test_round_trip_large_mixture(tmp_path):
    sim = simulate(DgpSpec("mix", n=6000, t0=24, k_post=0), 3)
    p = tmp_path / "mix.csv"
    write_panel_csv(sim.panel, p)
    back = load_panel_csv(p, 24)
    assert back.outcomes.shape == (6000, 25)
    assert np.array_equal(back.outcomes, sim.panel.outcomes)
    assert np.array_equal(back.treated, sim.panel.treated)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 8),
    t0=st.integers(2, 5),
    k=st.integers(0, 3),
    seed=st.integers(0, 2**31),
    scale=st.sampled_from([1e-300, 1e-8, 1.0, 1e12, 1e300]),
)
def test_round_trip_property(tmp_path_factory, n, t0, k, seed, scale):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, t0 + k + 1)) * scale
    D = np.zeros(n, bool)
    D[0] = True
    data = PanelDataset(Y, D, t0, [f"u{i}" for i in range(n)])
    p = tmp_path_factory.mktemp("rt") / "p.csv"
    write_panel_csv(data, p)
    assert load_panel_csv(p, t0).equals(data)


def test_unbalanced_panel(tmp_path):
    p = _write(tmp_path / "b.csv", "unit,time,outcome,treated\nA,1,1,0\nA,3,1,0\nB,1,2,1\nB,2,2,1\nB,3,1,1\n")
    with pytest.raises(BalanceError):
        load_panel_csv(p, 2)


def test_duplicate_cells(tmp_path):
    p = _write(tmp_path / "d.csv", "unit,time,outcome,treated\nA,1,1,0\nA,1,1,0\nB,1,2,1\nB,2,2,1\n")
    with pytest.raises(BalanceError):
        load_panel_csv(p, 1)


def test_missing_outcome(tmp_path):
    p = _write(tmp_path / "m.csv", "unit,time,outcome,treated\nA,1,,0\nA,2,1,0\nA,3,1,0\nB,1,2,1\nB,2,2,1\nB,3,2,1\n")
    with pytest.raises(ParseError):
        load_panel_csv(p, 2)


def test_treated_varies_within_unit(tmp_path):
    p = _write(tmp_path / "v.csv", "unit,time,outcome,treated\nA,1,1,0\nA,2,1,1\nA,3,1,0\nB,1,2,1\nB,2,2,1\nB,3,2,1\n")
    with pytest.raises(ConsistencyError):
        load_panel_csv(p, 2)


def test_missing_file(tmp_path):
    with pytest.raises(PanelIOError):
        load_panel_csv(tmp_path / "nope.csv", 2)


def test_write_to_missing_directory(tmp_path, small_panel):
    with pytest.raises(PanelIOError):
        write_panel_csv(small_panel, tmp_path / "no" / "such" / "dir.csv")


@pytest.mark.parametrize("D", [np.zeros(4, bool), np.ones(4, bool)])
def test_needs_both_groups(D):
    with pytest.raises(BalanceError):
        PanelDataset(np.zeros((4, 4)), D, 2)


def test_nonfinite_cells():
    Y = np.zeros((4, 4))
    Y[1, 2] = np.nan
    with pytest.raises(BalanceError):
        PanelDataset(Y, [1, 0, 0, 0], 2)


@pytest.mark.parametrize("t0", [0, 1, 5])
def test_t0_range(t0):
    with pytest.raises(RangeError):
        PanelDataset(np.zeros((4, 4)), [1, 0, 0, 0], t0)


def test_panel_is_immutable(small_panel):
    with pytest.raises(ValueError):
        small_panel.outcomes[0, 0] = 1.0


def test_truncate_and_subset():
    data = make_panel(n=9, t0=5, k_post=2)
    short = data.truncate(5, 3)
    assert short.n_periods == 5 and short.t0 == 3 and short.k_post == 1
    sub = data.subset([0, 0, 5, 6])
    assert sub.n == 4 and sub.n1 == 2
    assert sub.unit_ids == ("0", "0", "5", "6")
