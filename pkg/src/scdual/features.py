"""Feature maps used to build balancing weights."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .data import PanelDataset
from .errors import RangeError, ShapeError


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    names: tuple
    standardized: bool = False
    centers: np.ndarray = None
    scales: np.ndarray = None
    zero_variance: np.ndarray = None
    n_degenerate: int = 0

    def __post_init__(self):
        X = np.array(self.values, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ShapeError("feature values must be 2-d")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        p = X.shape[1]
        if len(self.names) != p:
            raise ShapeError(f"{len(self.names)} names for {p} columns")
        X.setflags(write=False)
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))
        if self.centers is None:
            object.__setattr__(self, "centers", np.zeros(p))
        if self.scales is None:
            object.__setattr__(self, "scales", np.ones(p))
        if self.zero_variance is None:
            object.__setattr__(self, "zero_variance", X.var(axis=0) < 1e-24 if X.shape[0] else np.zeros(p, bool))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def columns(self, idx) -> "FeatureMatrix":
        idx = list(idx)
        return FeatureMatrix(self.values[:, idx], [self.names[i] for i in idx])

    def rows(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.names, n_degenerate=self.n_degenerate)


def lagged_levels(data: PanelDataset) -> FeatureMatrix:
    """Pretreatment outcome levels, one column per period."""
    return FeatureMatrix(data.pre, [f"y_lag{t}" for t in range(1, data.t0 + 1)])


def unit_autocorrelation(data: PanelDataset, end_period: int | None = None, center: bool = True) -> FeatureMatrix:
    """Lag-1 sample autocorrelation of each unit's periods ``1..end_period``.

    Units whose series has variance below 1e-12 get 0; their count is stored in
    ``n_degenerate`` and reported with a warning. ``center=False`` skips the
    removal of the unit mean (the uncentered coefficient).
    """
    end = data.t0 if end_period is None else int(end_period)
    if end < 3 or end > data.t0:
        raise RangeError(f"end_period={end} must lie in [3, t0={data.t0}]")
    rho, degenerate = _kernels.lag1_autocorr(data.outcomes[:, :end], center=center)
    k = int(degenerate.sum())
    if k:
        warnings.warn(f"{k} unit(s) have zero pretreatment variance; autocorrelation set to 0")
    name = f"autocorr_1_{end}" if center else f"autocorr_raw_1_{end}"
    return FeatureMatrix(rho[:, None], [name], n_degenerate=k)


def concat(features: Sequence[FeatureMatrix]) -> FeatureMatrix:
    if not features:
        raise ShapeError("nothing to concatenate")
    n = features[0].n
    if any(f.n != n for f in features):
        raise ShapeError("feature matrices have different numbers of rows")
    names, seen = [], {}
    for f in features:
        for name in f.names:
            if name in seen:
                seen[name] += 1
                name = f"{name}_{seen[name]}"
            else:
                seen[name] = 0
            names.append(name)
    return FeatureMatrix(
        np.hstack([f.values for f in features]),
        names,
        n_degenerate=sum(f.n_degenerate for f in features),
    )


def standardize(features: FeatureMatrix) -> FeatureMatrix:
    """Center and scale columns; zero-variance columns are only centered.

    Balancing on standardized features is a different estimator: the l2 ball
    is taken over standardized coefficients.
    """
    X = features.values
    centers = X.mean(axis=0)
    sd = X.std(axis=0)
    zero = sd < 1e-12
    scales = np.where(zero, 1.0, sd)
    return FeatureMatrix(
        (X - centers) / scales,
        features.names,
        standardized=True,
        centers=centers,
        scales=scales,
        zero_variance=zero,
        n_degenerate=features.n_degenerate,
    )


def build_features(data: PanelDataset, recipe=None, standardize_columns: bool = False) -> FeatureMatrix:
    """Build features from a JSON-style recipe.

    ``recipe`` is a list like ``[{"kind": "lags"}, {"kind": "autocorr", "end": 8}]``
    or the shorthand strings ``"lags"`` / ``"lags+autocorr"``. ``None`` means
    lagged levels only.
    """
    if recipe is None:
        recipe = [{"kind": "lags"}]
    elif isinstance(recipe, str):
        recipe = [{"kind": k.strip()} for k in recipe.split("+")]
    parts = []
    for item in recipe:
        kind = item.get("kind")
        if kind == "lags":
            parts.append(lagged_levels(data))
        elif kind == "autocorr":
            parts.append(unit_autocorrelation(data, item.get("end"), item.get("center", True)))
        else:
            raise ValueError(f"unknown feature kind {kind!r}")
    out = concat(parts)
    return standardize(out) if standardize_columns else out
