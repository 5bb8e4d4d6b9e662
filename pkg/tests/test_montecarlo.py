import numpy as np
import pytest

from scdual.dgp import DgpSpec
from scdual.errors import StudyError
from scdual.montecarlo import emit_summary, nearest_rank, pipeline_config, read_summary_csv, run_study, spec_hash

SPEC = DgpSpec("ar", n=80, t0=5, k_post=2)


def test_nearest_rank():
    x = np.arange(1.0, 21.0)
    assert nearest_rank(x, 0.05) == 1.0
    assert nearest_rank(x, 0.95) == 19.0
    assert nearest_rank(x, 0.5) == 10.0


def test_deterministic_given_seed():
    a = run_study(SPEC, B=4, seed=9)
    b = run_study(SPEC, B=4, seed=9)
    assert a.estimates == b.estimates and a.diagnostics == b.diagnostics
    c = run_study(SPEC, B=4, seed=10)
    assert a.estimates != c.estimates


def test_thread_count_does_not_matter():
    a = run_study(SPEC, {"placebo": True}, B=6, seed=2, threads=1)
    b = run_study(SPEC, {"placebo": True}, B=6, seed=2, threads=3)
    for k in a.draws:
        np.testing.assert_array_equal(a.draws[k], b.draws[k])


def test_summary_contents():
    s = run_study(SPEC, B=5, seed=0)
    row = s.estimate("SC", 2)
    assert row.truth == 2.0 and row.q05 <= row.mean <= row.q95
    assert s.estimate("TWFE", -2).truth == 0.0
    with pytest.raises(KeyError):
        s.estimate("TWFE", -1)
    d = s.diagnostic("rho_sc")
    assert d.raw_sd > 0
    assert np.std(s.draws["rho_sc"] / d.raw_sd, ddof=1) == pytest.approx(1.0)


def test_csv_round_trip(tmp_path):
    s = run_study(SPEC, B=3, seed=1)
    csv_path, json_path = emit_summary(s, tmp_path / "mc.csv")
    assert json_path.exists()
    back = read_summary_csv(csv_path)
    assert back.spec_hash == s.spec_hash and back.B == 3
    for e in s.estimates:
        f = back.estimate(e.estimator, e.horizon)
        assert f.mean == e.mean and f.sd == e.sd


def test_spec_hash_tracks_inputs():
    cfg = pipeline_config()
    assert spec_hash(SPEC, cfg) == spec_hash(DgpSpec("ar", n=80, t0=5, k_post=2), pipeline_config())
    assert spec_hash(SPEC, cfg) != spec_hash(SPEC.replace(n=81), cfg)
    assert spec_hash(SPEC, cfg) != spec_hash(SPEC, pipeline_config({"zeta": 2.0}))


def test_config_validation():
    with pytest.raises(ValueError):
        pipeline_config({"estimator": ["SC"]})
    with pytest.raises(ValueError):
        run_study(SPEC, B=1)


def test_failures_above_threshold(monkeypatch):
    from scdual import montecarlo
    from scdual.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("forced")

    monkeypatch.setattr(montecarlo, "run_replication", boom)
    with pytest.raises(StudyError):
        run_study(SPEC, B=3)
