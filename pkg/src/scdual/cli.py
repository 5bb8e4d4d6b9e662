"""Command-line interface.

Exit status: 0 on success, 1 on a domain error (stderr gets one line
``error:<tag> <message>``), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .balancer import SolverOptions, kkt_report
from .data import load_panel_csv, write_panel_csv
from .dgp import DgpSpec, simulate
from .diagnostics import autocorr_imbalance, placebo_shift
from .errors import PanelIOError, ScError
from .estimators import fit_sc, twfe_event_study
from .features import build_features
from .inference import bootstrap_sc

log = logging.getLogger("scdual")

# flag defaults applied after merging a --config file
DEFAULTS = {
    "zeta": 1.0,
    "features": "lags",
    "level": 0.9,
    "bootstrap": 0,
    "ci": "percentile",
    "estimator": "sc",
    "weights": "sc",
    "B": 200,
    "population_n": 200_000,
    "sigma2": 1.0,
    "kappa": 4.0,
    "horizon": 0,
}


def _digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise PanelIOError(str(exc)) from exc


def _merge_config(args) -> dict:
    """Flags override the config file; unset flags fall back to DEFAULTS."""
    file_cfg = _read_json(args.config) if getattr(args, "config", None) else {}
    defaults = {**DEFAULTS, **getattr(args, "cmd_defaults", {})}
    eff = {}
    for key, value in vars(args).items():
        if key in ("func", "config", "cmd_defaults"):
            continue
        if value is None:
            value = file_cfg.get(key, defaults.get(key))
        eff[key] = value
    for key, value in file_cfg.items():
        eff.setdefault(key, value)
    return eff


def _recipe(features):
    if features is None or isinstance(features, (list, dict)):
        return features
    return str(features)


def _solver(cfg):
    return SolverOptions.from_dict(cfg.get("solver") or {})


def _emit(doc: dict, out):
    text = json.dumps(doc, indent=2, default=_json_default)
    if out:
        try:
            Path(out).write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise PanelIOError(str(exc)) from exc
    else:
        print(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def _provenance(cfg: dict) -> dict:
    public = {k: v for k, v in cfg.items() if k not in ("out", "latent", "threads")}
    return {"version": __version__, "config": public, "config_digest": _digest(public)}


def _load_spec(cfg) -> DgpSpec:
    base = {}
    if cfg.get("spec"):
        doc = _read_json(cfg["spec"])
        base = dict(doc.get("dgp", doc))
    for key in ("kind", "n", "t0", "k_post", "tau"):
        if cfg.get(key) is not None:
            base[key] = cfg[key]
    return DgpSpec.from_dict(base)


def _load_panel(cfg):
    if cfg.get("t0") is None:
        raise argparse.ArgumentTypeError("--t0 is required")
    return load_panel_csv(cfg["input"], int(cfg["t0"]))


# -- subcommands ------------------------------------------------------------


def cmd_simulate(cfg):
    spec = _load_spec(cfg)
    sim = simulate(spec, int(cfg["seed"]))
    write_panel_csv(sim.panel, cfg["out"])
    if cfg.get("latent"):
        doc = {"seed": cfg["seed"], "dgp": spec.to_dict(), "latent": sim.latent.to_dict(), **_provenance(cfg)}
        _emit(doc, cfg["latent"])
    print(json.dumps({"out": str(cfg["out"]), "n": spec.n, "n1": sim.panel.n1, "seed": cfg["seed"], "dgp": spec.to_dict(), **_provenance(cfg)}))


def cmd_estimate(cfg):
    data = _load_panel(cfg)
    opts = _solver(cfg)
    path, sol = fit_sc(data, float(cfg["zeta"]), _recipe(cfg["features"]), opts)
    feats = build_features(data, _recipe(cfg["features"]))
    keep = path.horizons >= 0
    doc = {
        "estimator": "SC",
        "horizons": path.horizons[keep],
        "tau_hat": path.tau[keep],
        "n": data.n,
        "n1": data.n1,
        "pi_bar": data.pi_bar,
        "zeta": float(cfg["zeta"]),
        "solver": sol.to_dict(),
        "kkt_max_abs": kkt_report(sol, feats, data.treated).max_abs,
        **_provenance(cfg),
    }
    if int(cfg["bootstrap"]):
        if cfg.get("seed") is None:
            raise argparse.ArgumentTypeError("--seed is required with --bootstrap")
        boot = bootstrap_sc(
            data,
            float(cfg["zeta"]),
            _recipe(cfg["features"]),
            b_boot=int(cfg["bootstrap"]),
            level=float(cfg["level"]),
            seed=int(cfg["seed"]),
            horizon=int(cfg["horizon"]),
            method=cfg["ci"],
            stratified=bool(cfg.get("stratified")),
            threads=int(cfg.get("threads") or 1),
            opts=opts,
        )
        doc["bootstrap"] = boot.to_dict()
    _emit(doc, cfg.get("out"))


def cmd_event_study(cfg):
    data = _load_panel(cfg)
    est = cfg["estimator"].lower()
    if est == "twfe":
        res = twfe_event_study(data)
    else:
        res, _ = fit_sc(data, float(cfg["zeta"]), _recipe(cfg["features"]), _solver(cfg))
    _emit({**res.to_dict(), **_provenance(cfg)}, cfg.get("out"))


def cmd_diagnose(cfg):
    data = _load_panel(cfg)
    sol = None
    if cfg["weights"] == "sc":
        _, sol = fit_sc(data, float(cfg["zeta"]), _recipe(cfg["features"]), _solver(cfg))
    diag = autocorr_imbalance(data, sol, center=bool(cfg.get("center")))
    _emit({**diag.to_dict(), "centered": bool(cfg.get("center")), **_provenance(cfg)}, cfg.get("out"))


def cmd_placebo(cfg):
    data = _load_panel(cfg)
    est = cfg["estimator"].lower()
    names = ["SC", "TWFE"] if est == "both" else [est.upper()]
    out = {}
    for name in names:
        res = placebo_shift(data, float(cfg["zeta"]), _recipe(cfg["features"]), name, _solver(cfg))
        out[name] = res.to_dict()
    _emit({"placebo": out, "zeta": float(cfg["zeta"]), **_provenance(cfg)}, cfg.get("out"))


def cmd_effective_periods(cfg):
    from .theory import effective_periods_two_way, growing_factor_periods, loglog_slope

    grid = [int(x) for x in str(cfg["t0_grid"]).split(",") if x.strip()]
    if cfg.get("spec"):
        spec = _load_spec(cfg)
        kappa = spec.kappa
    else:
        spec, kappa = None, float(cfg["kappa"])
    rows = []
    for t0 in grid:
        if cfg.get("two_way"):
            v = float(cfg.get("v_eta") or 1.0)
            ep = effective_periods_two_way(v, float(cfg["sigma2"]), t0)
        else:
            ep = growing_factor_periods(kappa, t0, float(cfg["sigma2"]), int(cfg.get("seed") or 0))
        rows.append((t0, ep.t_e, ep.approx_error2))
    lines = ["t0,t_e,bound"] + [f"{t},{te!r},{b!r}" for t, te, b in rows]
    text = "\n".join(lines) + "\n"
    if cfg.get("out"):
        try:
            Path(cfg["out"]).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise PanelIOError(str(exc)) from exc
    else:
        sys.stdout.write(text)
    if len(rows) > 1 and all(np.isfinite(r[1]) for r in rows):
        print(json.dumps({"loglog_slope": loglog_slope([r[0] for r in rows], [r[1] for r in rows]), **_provenance(cfg)}), file=sys.stderr)


def cmd_montecarlo(cfg):
    from .montecarlo import emit_summary, run_study

    spec = _load_spec(cfg)
    pipeline = {}
    if cfg.get("spec"):
        pipeline = dict(_read_json(cfg["spec"]).get("pipeline", {}))
    if cfg.get("pipeline"):
        pipeline.update(cfg["pipeline"])
    if cfg.get("zeta_flag") is not None:
        pipeline["zeta"] = cfg["zeta_flag"]
    summary = run_study(spec, pipeline, int(cfg["B"]), int(cfg["seed"]), int(cfg.get("threads") or 1))
    doc = {
        "B": summary.B,
        "n_failed": summary.n_failed,
        "spec_hash": summary.spec_hash,
        "seed": summary.seed,
        "diagnostics": [d.__dict__ for d in summary.diagnostics],
        **_provenance(cfg),
    }
    if cfg.get("out"):
        csv_path, json_path = emit_summary(summary, cfg["out"])
        doc["outputs"] = [str(csv_path), str(json_path)]
    else:
        doc["estimates"] = [e.__dict__ for e in summary.estimates]
    print(json.dumps(doc, indent=2, default=_json_default))


def cmd_oracle(cfg):
    from .theory import fit_population_objects, oracle_bias, oracle_noise_terms

    spec = _load_spec(cfg)
    seed = int(cfg["seed"])
    fit = fit_population_objects(
        spec, _recipe(cfg["features"]), float(cfg["zeta"]), int(cfg["population_n"]), seed=seed + 1, opts=_solver(cfg)
    )
    sim = simulate(spec, seed)
    path, _ = fit_sc(sim.panel, float(cfg["zeta"]), _recipe(cfg["features"]), _solver(cfg))
    first, second = oracle_noise_terms(sim, fit)
    doc = {
        "population": {
            "size": fit.sample_size,
            "e_pi": fit.e_pi,
            "bias": fit.bias,
            "beta_mu": fit.beta_mu,
            "u_mean": fit.u_mean,
            "u_sd": fit.u_sd,
            "foc_residual": fit.foc_residual,
        },
        "sample": {
            "tau_hat": path.at(0),
            "att": float(sim.att()[0]),
            "bias": oracle_bias(sim, fit),
            "noise_first": first,
            "noise_second": second,
        },
        "seed": seed,
        **_provenance(cfg),
    }
    _emit(doc, cfg.get("out"))


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scdual", description="Synthetic control via entropy balancing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default=os.environ.get("SCDUAL_LOG_LEVEL", "WARNING"))
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, panel=True):
        sp.add_argument("--config", help="JSON file with default values for any flag")
        sp.add_argument("--out")
        if panel:
            sp.add_argument("--input", required=True, help="long CSV with unit,time,outcome,treated")
            sp.add_argument("--t0", type=int, help="number of pretreatment periods")
            sp.add_argument("--zeta", type=float)
            sp.add_argument("--features", help="lags | lags+autocorr")

    sp = sub.add_parser("simulate", help="draw a panel from a design")
    common(sp, panel=False)
    sp.add_argument("--spec")
    sp.add_argument("--kind")
    sp.add_argument("--n", type=int)
    sp.add_argument("--t0", type=int)
    sp.add_argument("--k-post", dest="k_post", type=int)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--latent")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="synthetic control effects by horizon")
    common(sp)
    sp.add_argument("--bootstrap", type=int, help="number of bootstrap replicates (0 = none)")
    sp.add_argument("--level", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--ci", choices=["percentile", "normal"])
    sp.add_argument("--stratified", action="store_true", default=None)
    sp.add_argument("--threads", type=int, default=os.cpu_count())
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("event-study", help="full event-time path")
    common(sp)
    sp.add_argument("--estimator", choices=["sc", "twfe"])
    sp.set_defaults(func=cmd_event_study)

    sp = sub.add_parser("diagnose", help="autocorrelation balance diagnostic")
    common(sp)
    sp.add_argument("--weights", choices=["sc", "uniform"])
    sp.add_argument("--center", action="store_true", default=None, help="demean each series first")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("placebo", help="shift adoption to t0-1")
    common(sp)
    sp.add_argument("--estimator", choices=["sc", "twfe", "both"])
    sp.set_defaults(func=cmd_placebo, cmd_defaults={"estimator": "both"})

    sp = sub.add_parser("effective-periods", help="effective number of periods over a t0 grid")
    common(sp, panel=False)
    sp.add_argument("--spec")
    sp.add_argument("--t0-grid", dest="t0_grid", required=True)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--sigma2", type=float)
    sp.add_argument("--two-way", dest="two_way", action="store_true", default=None)
    sp.add_argument("--v-eta", dest="v_eta", type=float)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_effective_periods)

    sp = sub.add_parser("montecarlo", help="replicate a design B times")
    common(sp, panel=False)
    sp.add_argument("--spec")
    sp.add_argument("--kind")
    sp.add_argument("--n", type=int)
    sp.add_argument("--t0", type=int)
    sp.add_argument("--B", type=int)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--zeta", dest="zeta_flag", type=float)
    sp.add_argument("--threads", type=int, default=os.cpu_count())
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("oracle", help="population bias and noise terms for a design")
    common(sp, panel=False)
    sp.add_argument("--spec")
    sp.add_argument("--kind")
    sp.add_argument("--n", type=int)
    sp.add_argument("--t0", type=int)
    sp.add_argument("--zeta", type=float)
    sp.add_argument("--features")
    sp.add_argument("--population-n", dest="population_n", type=int)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), stream=sys.stderr)
    func = args.func
    del args.log_level, args.command
    try:
        cfg = _merge_config(args)
        func(cfg)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"scdual: error: {exc}", file=sys.stderr)
        return 2
    except ScError as exc:
        print(f"error:{exc.tag} {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error:invalid {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error:io {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
