"""Treatment-effect estimators: synthetic control paths, the two-way fixed
effects event study, and the per-period estimator for staggered adoption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .balancer import BalanceSolution, SolverOptions, solve_dual
from .data import EstimateResult, PanelDataset
from .errors import ConsistencyError, EmptyCohortError, RankError, ShapeError
from .features import build_features


@dataclass(frozen=True)
class EventStudyResult:
    horizons: np.ndarray
    tau: np.ndarray
    estimator: str
    normalization: str
    placebo: bool = False

    def __post_init__(self):
        h = np.asarray(self.horizons, dtype=int)
        tau = np.asarray(self.tau, dtype=float)
        if h.shape != tau.shape:
            raise ShapeError("horizons and estimates differ in length")
        if not np.all(np.isfinite(tau)):
            raise ConsistencyError("non-finite event-study estimate")
        object.__setattr__(self, "horizons", h)
        object.__setattr__(self, "tau", tau)

    def at(self, k: int) -> float:
        hit = np.flatnonzero(self.horizons == k)
        if hit.size == 0:
            raise KeyError(f"horizon {k} not estimated by {self.estimator}")
        return float(self.tau[hit[0]])

    @property
    def post(self) -> np.ndarray:
        return self.tau[self.horizons >= 0]

    @property
    def pre(self) -> np.ndarray:
        return self.tau[self.horizons < 0]

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "normalization": self.normalization,
            "placebo": self.placebo,
            "horizons": self.horizons.tolist(),
            "tau": self.tau.tolist(),
        }


def _weights_vector(weights, n):
    w = weights.weights if isinstance(weights, BalanceSolution) else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ShapeError(f"weights have shape {w.shape}, panel has {n} units")
    return w


def sc_effect_path(data: PanelDataset, weights) -> EventStudyResult:
    """``Pn[(D/pi_bar) Y_c] - Pn[w (1-D) Y_c]`` for every period column ``c``.

    Period ``t`` is reported at event time ``t - t0 - 1`` so pretreatment
    columns form a placebo path ending at ``k = -1``.
    """
    n = data.n
    w = _weights_vector(weights, n)
    D = data.treated
    contrast = D / data.pi_bar - np.where(D, 0.0, w)
    tau = contrast @ data.outcomes / n
    horizons = np.arange(data.n_periods) - data.t0
    return EventStudyResult(horizons, tau, "SC", "none; every period reported")


def fit_sc(data: PanelDataset, zeta: float = 1.0, recipe=None, opts: SolverOptions = SolverOptions(), standardize=False):
    """Fit weights on pretreatment features and return ``(path, solution)``."""
    feats = build_features(data, recipe, standardize_columns=standardize)
    sol = solve_dual(feats, data.treated, zeta, opts)
    return sc_effect_path(data, sol), sol


def sc_estimate(data: PanelDataset, zeta: float = 1.0, recipe=None, opts: SolverOptions = SolverOptions()) -> EstimateResult:
    path, sol = fit_sc(data, zeta, recipe, opts)
    keep = path.horizons >= 0
    return EstimateResult(path.tau[keep], path.horizons[keep], data.n1, data.pi_bar, sol)


def twfe_event_study(data: PanelDataset, tol: float = 1e-12) -> EventStudyResult:
    """OLS of ``Y_it`` on unit and period effects plus ``D_i * 1{t - t0 - 1 = k}``
    for every ``k != -1``.

    Outcome and dummies are two-way demeaned, then the dummy coefficients
    come from least squares on the demeaned block.
    """
    n, T, t0 = data.n, data.n_periods, data.t0
    event = np.arange(T) - t0
    keep = event != -1
    horizons = event[keep]
    m = horizons.size
    if m == 0:
        raise RankError("no event-time dummies to estimate")
    X = np.zeros((n, T, m + 1))
    X[:, :, 0] = data.outcomes
    cols = np.flatnonzero(keep)
    rows = np.flatnonzero(data.treated)
    X[rows[:, None], cols[None, :], 1 + np.arange(m)[None, :]] = 1.0
    Xd, _ = _kernels.twoway_demean(X, tol=tol)
    y = Xd[:, :, 0].ravel()
    Z = Xd[:, :, 1:].reshape(n * T, m)
    gram = Z.T @ Z
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 1e-10 * max(ev[-1], 1e-300):
        raise RankError("event-time dummies are collinear with the fixed effects")
    coef = np.linalg.solve(gram, Z.T @ y)
    return EventStudyResult(horizons, coef, "TWFE", "k = -1 omitted (reference period t0)")


@dataclass(frozen=True, eq=False)
class StaggeredPanel:
    """Outcomes with an absorbing adoption matrix ``W`` (units x periods)."""

    outcomes: np.ndarray
    adoption: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.outcomes, dtype=float)
        W = np.asarray(self.adoption).astype(bool)
        if Y.shape != W.shape or Y.ndim != 2:
            raise ShapeError("outcomes and adoption must be matching units x periods matrices")
        if np.any(W[:, :-1] & ~W[:, 1:]):
            raise ConsistencyError("adoption must be nondecreasing over time")
        object.__setattr__(self, "outcomes", Y)
        object.__setattr__(self, "adoption", W)

    @classmethod
    def from_adoption_dates(cls, outcomes, dates):
        """``dates[i]`` is the first treated period (1-based) or 0 for never."""
        Y = np.asarray(outcomes, dtype=float)
        d = np.asarray(dates, dtype=int)
        periods = np.arange(1, Y.shape[1] + 1)
        W = (d[:, None] > 0) & (periods[None, :] >= d[:, None])
        return cls(Y, W)


def staggered_tau_t(
    panel: StaggeredPanel, t: int, zeta: float = 1.0, recipe=None, opts: SolverOptions = SolverOptions()
) -> EstimateResult:
    """Contemporaneous effect for units adopting in period ``t`` (1-based).

    Only units untreated in ``t - 1`` are kept; periods before ``t`` serve as
    pretreatment data and weights are fit from scratch.
    """
    T = panel.outcomes.shape[1]
    if not 3 <= t <= T:
        raise EmptyCohortError(f"period {t} leaves fewer than two pretreatment periods or lies outside 1..{T}")
    at_risk = ~panel.adoption[:, t - 2]
    D = panel.adoption[at_risk, t - 1]
    if not D.any():
        raise EmptyCohortError(f"no units adopt in period {t}")
    if D.all():
        raise EmptyCohortError(f"no not-yet-treated controls in period {t}")
    data = PanelDataset(panel.outcomes[at_risk, :t], D, t - 1)
    path, sol = fit_sc(data, zeta, recipe, opts)
    return EstimateResult(np.array([path.at(0)]), np.array([0]), data.n1, data.pi_bar, sol)


def did_reference(data: PanelDataset) -> np.ndarray:
    """Closed-form event-study coefficients in a balanced block design:
    treated-minus-control mean change relative to period ``t0``."""
    D = data.treated
    gap = data.outcomes[D].mean(axis=0) - data.outcomes[~D].mean(axis=0)
    out = gap - gap[data.t0 - 1]
    keep = np.arange(data.n_periods) - data.t0 != -1
    return out[keep]

