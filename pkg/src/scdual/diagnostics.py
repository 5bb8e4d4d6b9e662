"""Balance diagnostics and placebo checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .balancer import BalanceSolution, SolverOptions, uniform_weights
from .data import PanelDataset
from .errors import RangeError
from .estimators import EventStudyResult, fit_sc, twfe_event_study
from .features import unit_autocorrelation


@dataclass(frozen=True)
class BalanceDiagnostic:
    rho_hat: float
    weight_kind: str
    n_degenerate: int

    def to_dict(self):
        return {"rho_hat": self.rho_hat, "weight_kind": self.weight_kind, "n_degenerate": self.n_degenerate}


def autocorr_imbalance(data: PanelDataset, weights=None, center: bool = False) -> BalanceDiagnostic:
    """Treated-minus-weighted-control gap in unit lag-1 autocorrelations
    over the pretreatment periods.

    ``weights`` is ``None`` (equal control weights), a
    :class:`BalanceSolution`, or a weight vector aligned with the panel.
    The per-unit coefficient is uncentered by default; ``center=True``
    demeans each series first. Returns the raw statistic; normalization
    across simulations is left to the caller.
    """
    if data.t0 < 3:
        raise RangeError(f"t0={data.t0}; the autocorrelation needs at least 3 pretreatment periods")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        feat = unit_autocorrelation(data, center=center)
    rho = feat.values[:, 0]
    if weights is None:
        w, kind = uniform_weights(data.treated), "Uniform"
    else:
        w = weights.weights if isinstance(weights, BalanceSolution) else np.asarray(weights, dtype=float)
        kind = "SC"
    D = data.treated
    stat = ((D / data.pi_bar) @ rho - np.where(D, 0.0, w) @ rho) / data.n
    return BalanceDiagnostic(float(stat), kind, feat.n_degenerate)


def placebo_shift(
    data: PanelDataset,
    zeta: float = 1.0,
    recipe=None,
    estimator: str = "SC",
    opts: SolverOptions = SolverOptions(),
) -> EventStudyResult:
    """Move adoption to period ``t0 - 1``.

    Weights (or the event-study regression) use periods ``1..t0-2`` as
    pretreatment data; the estimates at periods ``t0 - 1`` and ``t0`` are
    reported at placebo horizons 0 and 1. No post-treatment period is read.
    """
    if data.t0 < 4:
        raise RangeError(f"t0={data.t0}; placebo shift needs at least 4 pretreatment periods")
    shifted = data.truncate(data.t0, data.t0 - 2)
    est = estimator.upper()
    if est == "SC":
        path, _ = fit_sc(shifted, zeta, recipe, opts)
    elif est == "TWFE":
        path = twfe_event_study(shifted)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    tau = np.array([path.at(0), path.at(1)])
    return EventStudyResult(np.array([0, 1]), tau, est, f"placebo adoption at period {data.t0 - 1}", placebo=True)
