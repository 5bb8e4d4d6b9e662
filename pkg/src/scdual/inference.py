"""Unit-level bootstrap and plug-in variances for the synthetic control estimator."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .balancer import SolverOptions
from .data import PanelDataset
from .errors import ConvergenceError, DegenerateDesignError, EmptyCohortError, ExpOverflowError
from .estimators import fit_sc

SKIP_WARN = 0.05
SKIP_FAIL = 0.20


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    se: float
    ci_low: float
    ci_high: float
    level: float
    b_boot: int
    skipped: int
    method: str
    horizon: int
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Counter-based generator for replicate ``r``; independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(r)])))


def _draw_indices(rng, D, stratified):
    n = D.shape[0]
    if not stratified:
        return rng.integers(0, n, size=n)
    t = np.flatnonzero(D)
    c = np.flatnonzero(~D)
    return np.concatenate([t[rng.integers(0, t.size, t.size)], c[rng.integers(0, c.size, c.size)]])


def bootstrap_sc(
    data: PanelDataset,
    zeta: float = 1.0,
    recipe=None,
    b_boot: int = 1000,
    level: float = 0.9,
    seed: int = 0,
    horizon: int = 0,
    method: str = "percentile",
    stratified: bool = False,
    threads: int = 1,
    opts: SolverOptions = SolverOptions(),
) -> BootstrapResult:
    """Resample units with replacement and re-solve the weights each time.

    Replicates without treated or without control units (or whose weight
    problem fails) are skipped and counted.
    """
    if b_boot < 100:
        raise ValueError("b_boot must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if method not in ("percentile", "normal"):
        raise ValueError("method must be 'percentile' or 'normal'")
    path, _ = fit_sc(data, zeta, recipe, opts)
    point = path.at(horizon)
    D = data.treated

    def one(r):
        idx = _draw_indices(replicate_rng(seed, r), D, stratified)
        n1 = int(D[idx].sum())
        if n1 == 0 or n1 == idx.size:
            return None
        try:
            p, _ = fit_sc(data.subset(idx), zeta, recipe, opts)
        except (ConvergenceError, ExpOverflowError):
            return None
        return p.at(horizon)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            draws = list(ex.map(one, range(b_boot)))
    else:
        draws = [one(r) for r in range(b_boot)]
    est = np.array([d for d in draws if d is not None])
    skipped = b_boot - est.size
    if skipped > SKIP_FAIL * b_boot:
        raise DegenerateDesignError(f"{skipped} of {b_boot} bootstrap replicates were degenerate")
    warning = None
    if skipped >= SKIP_WARN * b_boot:
        warning = f"{skipped} of {b_boot} replicates skipped"
    se = float(est.std(ddof=1)) if est.size > 1 else 0.0
    alpha = 1 - level
    if method == "percentile":
        lo, hi = np.quantile(est, [alpha / 2, 1 - alpha / 2])
    else:
        z = norm.ppf(1 - alpha / 2)
        lo, hi = point - z * se, point + z * se
    return BootstrapResult(point, se, float(lo), float(hi), level, b_boot, skipped, method, horizon, warning)


def _treated_values(data, values):
    v = np.asarray(values, dtype=float)
    if v.shape == (data.n,):
        v = v[data.treated]
    if v.size == 0:
        raise EmptyCohortError("no treated residuals")
    if v.shape != (data.n1,):
        raise ValueError(f"expected {data.n1} treated values or {data.n} unit values, got {v.shape}")
    return v


def plugin_variance_van(data: PanelDataset, residuals) -> float:
    """Variance of the estimator from ``E[eps^2 | D=1] / (pi_bar n)``.

    ``residuals`` are given for the treated units, or for all units in panel
    order (only treated entries are used).
    """
    r = _treated_values(data, residuals)
    return float(np.mean(r**2) / (data.pi_bar * data.n))


def plugin_variance_as(data: PanelDataset, noise_variance, pi) -> float:
    """Variance from ``E[V[eps] / (1 - pi) | D=1] / (pi_bar n)``, the
    non-vanishing treated-share counterpart of :func:`plugin_variance_van`."""
    v = _treated_values(data, noise_variance)
    p = _treated_values(data, pi)
    return float(np.mean(v / (1 - p)) / (data.pi_bar * data.n))


def normal_interval(point: float, variance: float, level: float = 0.9):
    z = norm.ppf(0.5 + level / 2)
    half = z * math.sqrt(max(variance, 0.0))
    return point - half, point + half
