"""Monte Carlo replication engine.

Replication ``r`` of a study with seed ``s`` draws its panel from the random
streams keyed by ``(s, r)``, so results do not depend on how replications
are scheduled across threads. Quantiles use the nearest-rank rule:
``q_p = sorted[ceil(p * B) - 1]``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .balancer import SolverOptions
from .dgp import DgpSpec, simulate
from .diagnostics import autocorr_imbalance, placebo_shift
from .errors import ConvergenceError, ExpOverflowError, PanelIOError, StudyError
from .estimators import fit_sc, twfe_event_study

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.05

DEFAULT_PIPELINE = {
    "zeta": 1.0,
    "features": None,
    "estimators": ["SC", "TWFE"],
    "diagnostics": True,
    "placebo": False,
    "center_autocorr": False,
}


def pipeline_config(config: dict | None = None) -> dict:
    cfg = dict(DEFAULT_PIPELINE)
    if config:
        unknown = set(config) - set(DEFAULT_PIPELINE) - {"solver"}
        if unknown:
            raise ValueError(f"unknown pipeline keys: {sorted(unknown)}")
        cfg.update(config)
    cfg["estimators"] = [e.upper() for e in cfg["estimators"]]
    return cfg


def spec_hash(spec: DgpSpec, config: dict) -> str:
    blob = json.dumps({"dgp": spec.to_dict(), "pipeline": config}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def nearest_rank(x, p: float) -> float:
    s = np.sort(np.asarray(x, dtype=float))
    k = max(math.ceil(p * s.size), 1)
    return float(s[k - 1])


@dataclass
class EstimateRow:
    estimator: str
    horizon: int
    truth: float
    mean: float
    sd: float
    q05: float
    q95: float

    @property
    def bias(self) -> float:
        return self.mean - self.truth


@dataclass
class DiagnosticRow:
    name: str
    mean: float  # normalized
    q05: float
    q95: float
    raw_mean: float
    raw_sd: float


@dataclass
class McSummary:
    estimates: list
    diagnostics: list
    B: int
    n_failed: int
    spec_hash: str
    seed: int
    config: dict = field(default_factory=dict)
    draws: dict = field(default_factory=dict, repr=False)

    @property
    def failure_rate(self) -> float:
        return self.n_failed / self.B

    def estimate(self, estimator: str, horizon: int) -> EstimateRow:
        for row in self.estimates:
            if row.estimator == estimator and row.horizon == horizon:
                return row
        raise KeyError((estimator, horizon))

    def diagnostic(self, name: str) -> DiagnosticRow:
        for row in self.diagnostics:
            if row.name == name:
                return row
        raise KeyError(name)


def _truth(spec: DgpSpec, horizons):
    return np.where(horizons >= 0, spec.tau * horizons, 0.0)


def run_replication(spec: DgpSpec, cfg: dict, seed: int, r: int) -> dict:
    """One simulate -> estimate -> diagnose pass; returns named result vectors."""
    opts = SolverOptions.from_dict(cfg.get("solver", {}))
    sim = simulate(spec, (seed, r))
    data = sim.panel
    out = {}
    sol = None
    if "SC" in cfg["estimators"] or cfg["diagnostics"]:
        path, sol = fit_sc(data, cfg["zeta"], cfg["features"], opts)
        if "SC" in cfg["estimators"]:
            out["SC"] = (path.horizons, path.tau)
    if "TWFE" in cfg["estimators"]:
        tw = twfe_event_study(data)
        out["TWFE"] = (tw.horizons, tw.tau)
    if cfg["diagnostics"] and data.t0 >= 3:
        center = cfg["center_autocorr"]
        out["rho_uniform"] = autocorr_imbalance(data, None, center).rho_hat
        out["rho_sc"] = autocorr_imbalance(data, sol, center).rho_hat
    if cfg["placebo"]:
        for est in ("SC", "TWFE"):
            p = placebo_shift(data, cfg["zeta"], cfg["features"], est, opts)
            out[f"placebo_{est}"] = (p.horizons, p.tau)
    return out


def run_study(spec: DgpSpec, pipeline: dict | None = None, B: int = 200, seed: int = 0, threads: int = 1) -> McSummary:
    if B < 2:
        raise ValueError("B must be at least 2")
    cfg = pipeline_config(pipeline)

    def job(r):
        try:
            return run_replication(spec, cfg, seed, r)
        except (ConvergenceError, ExpOverflowError) as exc:
            log.info("replication %d failed: %s", r, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, range(B)))
    else:
        results = [job(r) for r in range(B)]
    ok = [res for res in results if res is not None]
    n_failed = B - len(ok)
    if n_failed > MAX_FAILURE_RATE * B:
        raise StudyError(f"{n_failed} of {B} replications failed")
    if len(ok) < 2:
        raise StudyError("fewer than two successful replications")
    return summarize(ok, spec, cfg, B, n_failed, seed)


def summarize(results, spec, cfg, B, n_failed, seed) -> McSummary:
    estimates, diagnostics, draws = [], [], {}
    for name in results[0]:
        first = results[0][name]
        if isinstance(first, tuple):
            horizons = first[0]
            M = np.vstack([res[name][1] for res in results])
            draws[name] = M
            truth = _truth(spec, horizons) if not name.startswith("placebo") else np.zeros(len(horizons))
            for j, h in enumerate(horizons):
                col = M[:, j]
                estimates.append(
                    EstimateRow(
                        name, int(h), float(truth[j]), float(col.mean()), float(col.std(ddof=1)),
                        nearest_rank(col, 0.05), nearest_rank(col, 0.95),
                    )
                )
        else:
            raw = np.array([res[name] for res in results], dtype=float)
            draws[name] = raw
            sd = raw.std(ddof=1)
            z = raw / sd if sd > 0 else np.zeros_like(raw)
            diagnostics.append(
                DiagnosticRow(name, float(z.mean()), nearest_rank(z, 0.05), nearest_rank(z, 0.95), float(raw.mean()), float(sd))
            )
    return McSummary(estimates, diagnostics, B, n_failed, spec_hash(spec, cfg), seed, {"dgp": spec.to_dict(), "pipeline": cfg}, draws)


CSV_HEADER = ("kind", "name", "horizon", "statistic", "value")


def emit_summary(summary: McSummary, path) -> tuple[Path, Path]:
    """Write ``<path>`` as CSV (one row per estimator x horizon x statistic)
    and ``<stem>.json`` with the same numbers plus provenance."""
    path = Path(path)
    json_path = path.with_suffix(".json")
    rows = []
    for e in summary.estimates:
        for stat in ("truth", "mean", "sd", "q05", "q95"):
            rows.append(("estimate", e.estimator, e.horizon, stat, getattr(e, stat)))
    for d in summary.diagnostics:
        for stat in ("mean", "q05", "q95", "raw_mean", "raw_sd"):
            rows.append(("diagnostic", d.name, "", stat, getattr(d, stat)))
    meta = [("meta", "B", "", "value", summary.B), ("meta", "n_failed", "", "value", summary.n_failed),
            ("meta", "seed", "", "value", summary.seed), ("meta", "spec_hash", "", "value", summary.spec_hash)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for kind, name, h, stat, v in meta + rows:
                w.writerow((kind, name, h, stat, v if isinstance(v, str) else repr(v)))
        doc = {
            "version": __version__,
            "spec_hash": summary.spec_hash,
            "seed": summary.seed,
            "B": summary.B,
            "n_failed": summary.n_failed,
            "failure_rate": summary.failure_rate,
            "config": summary.config,
            "estimates": [e.__dict__ for e in summary.estimates],
            "diagnostics": [d.__dict__ for d in summary.diagnostics],
        }
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, default=_json_default)
    except OSError as exc:
        raise PanelIOError(str(exc)) from exc
    return path, json_path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def read_summary_csv(path) -> McSummary:
    est, diag, meta = {}, {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kind, name, stat, value = row["kind"], row["name"], row["statistic"], row["value"]
            if kind == "meta":
                meta[name] = value
            elif kind == "estimate":
                est.setdefault((name, int(row["horizon"])), {})[stat] = float(value)
            else:
                diag.setdefault(name, {})[stat] = float(value)
    estimates = [EstimateRow(k[0], k[1], **v) for k, v in est.items()]
    diagnostics = [DiagnosticRow(k, **v) for k, v in diag.items()]
    return McSummary(estimates, diagnostics, int(meta["B"]), int(meta["n_failed"]), meta["spec_hash"], int(meta["seed"]))
