"""Balanced panel container and long-format CSV input/output."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import BalanceError, ConsistencyError, PanelIOError, ParseError, RangeError

CSV_COLUMNS = ("unit", "time", "outcome", "treated")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Units x periods outcome matrix with a block treatment indicator.

    Columns ``0..t0-1`` are pretreatment periods; column ``t0 + k`` is event
    horizon ``k >= 0``.
    """

    outcomes: np.ndarray
    treated: np.ndarray
    t0: int
    unit_ids: Optional[Sequence[str]] = None
    times: Optional[Sequence] = field(default=None)

    def __post_init__(self):
        Y = np.asarray(self.outcomes, dtype=float)
        if Y.ndim != 2:
            raise BalanceError("outcomes must be a units x periods matrix")
        n, T = Y.shape
        if n == 0 or T == 0:
            raise BalanceError("empty panel")
        if not np.all(np.isfinite(Y)):
            raise BalanceError("panel has missing or non-finite cells")
        D = np.asarray(self.treated)
        if D.shape != (n,):
            raise BalanceError(f"treated has shape {D.shape}, expected ({n},)")
        D = D.astype(bool)
        n1 = int(D.sum())
        if n1 == 0 or n1 == n:
            raise BalanceError("need at least one treated and one control unit")
        t0 = int(self.t0)
        if t0 < 2:
            raise RangeError(f"t0={t0}; at least two pretreatment periods are required")
        if t0 > T:
            raise RangeError(f"t0={t0} exceeds the number of periods {T}")
        ids = [str(u) for u in (self.unit_ids if self.unit_ids is not None else range(n))]
        if len(ids) != n:
            raise BalanceError("unit_ids length does not match outcomes")
        times = list(self.times) if self.times is not None else list(range(1, T + 1))
        if len(times) != T:
            raise BalanceError("times length does not match outcomes")
        object.__setattr__(self, "outcomes", _frozen(Y, float))
        object.__setattr__(self, "treated", _frozen(D, bool))
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "unit_ids", tuple(ids))
        object.__setattr__(self, "times", tuple(times))

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[1]

    @property
    def k_post(self) -> int:
        """Largest post-treatment horizon (``-1`` if no post periods)."""
        return self.n_periods - self.t0 - 1

    @property
    def n1(self) -> int:
        return int(self.treated.sum())

    @property
    def pi_bar(self) -> float:
        return self.n1 / self.n

    @property
    def pre(self) -> np.ndarray:
        return self.outcomes[:, : self.t0]

    @property
    def post(self) -> np.ndarray:
        return self.outcomes[:, self.t0 :]

    def subset(self, idx) -> "PanelDataset":
        idx = np.asarray(idx)
        return PanelDataset(
            self.outcomes[idx],
            self.treated[idx],
            self.t0,
            [self.unit_ids[i] for i in (np.flatnonzero(idx) if idx.dtype == bool else idx)],
            self.times,
        )

    def truncate(self, last_period: int, t0: int) -> "PanelDataset":
        """Keep columns ``0..last_period-1`` and relabel the adoption date."""
        return PanelDataset(
            self.outcomes[:, :last_period], self.treated, t0, self.unit_ids, self.times[:last_period]
        )

    def equals(self, other: "PanelDataset") -> bool:
        return (
            self.t0 == other.t0
            and self.unit_ids == other.unit_ids
            and np.array_equal(self.treated, other.treated)
            and np.array_equal(self.outcomes, other.outcomes)
        )


@dataclass(frozen=True)
class EstimateResult:
    tau_hat: np.ndarray
    horizons: np.ndarray
    n1: int
    pi_bar: float
    weights: Optional[object] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.tau_hat)):
            raise ConsistencyError("non-finite treatment effect estimate")


def load_panel_csv(path, t0: int) -> PanelDataset:
    """Read a long-format ``unit,time,outcome,treated`` CSV."""
    try:
        df = pd.read_csv(path, dtype={"unit": str}, keep_default_na=False, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise PanelIOError(str(exc)) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}")
    outcome = pd.to_numeric(df["outcome"], errors="coerce")
    if outcome.isna().any():
        bad = df.loc[outcome.isna(), "outcome"].iloc[0]
        raise ParseError(f"{path}: non-numeric outcome {bad!r}")
    treated = df["treated"].astype(str).str.strip().str.lower()
    mapping = {"1": True, "0": False, "true": True, "false": False, "1.0": True, "0.0": False}
    if not treated.isin(list(mapping)).all():
        raise ParseError(f"{path}: treated must be 0/1")
    df = df.assign(outcome=outcome.astype(float), treated=treated.map(mapping))
    time = pd.to_numeric(df["time"], errors="coerce")
    if time.isna().any():
        raise ParseError(f"{path}: non-numeric time")
    df["time"] = time

    units = list(dict.fromkeys(df["unit"]))
    times = np.sort(df["time"].unique())
    if df.duplicated(["unit", "time"]).any():
        raise BalanceError(f"{path}: duplicated unit/time cells")
    if len(df) != len(units) * len(times):
        raise BalanceError(f"{path}: unbalanced panel ({len(df)} rows for {len(units)} units x {len(times)} periods)")
    if (df.groupby("unit", sort=False)["treated"].nunique() > 1).any():
        raise ConsistencyError(f"{path}: treated varies within unit")

    wide = df.pivot(index="unit", columns="time", values="outcome").loc[units, times]
    D = df.groupby("unit", sort=False)["treated"].first().loc[units].to_numpy()
    times_out = [int(t) if float(t).is_integer() else float(t) for t in times]
    return PanelDataset(wide.to_numpy(), D, t0, units, times_out)


def write_panel_csv(data: PanelDataset, path) -> None:
    """Write long format; floats use ``repr`` so a reload is bit-exact."""
    if data is None or data.n == 0:
        raise BalanceError("refusing to write an empty dataset")
    try:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i, unit in enumerate(data.unit_ids):
                d = int(data.treated[i])
                for s, t in enumerate(data.times):
                    w.writerow((unit, t, repr(float(data.outcomes[i, s])), d))
    except OSError as exc:
        raise PanelIOError(str(exc)) from exc


def write_wide_csv(data: PanelDataset, path) -> None:
    """Debug export: one row per unit."""
    df = pd.DataFrame(data.outcomes, index=list(data.unit_ids), columns=list(data.times))
    df.insert(0, "treated", data.treated.astype(int))
    df.to_csv(path, index_label="unit")
