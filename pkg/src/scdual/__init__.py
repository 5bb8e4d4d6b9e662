"""Synthetic control as entropy balancing, solved through its convex dual."""

__version__ = "0.1.0"

from .balancer import BalanceSolution, SolverOptions, kkt_report, solve_dual, solve_primal_reference
from .data import EstimateResult, PanelDataset, load_panel_csv, write_panel_csv
from .dgp import DgpSpec, SimulatedPanel, simulate, simulate_interactive
from .features import FeatureMatrix, build_features, lagged_levels, unit_autocorrelation

__all__ = [
    "BalanceSolution",
    "DgpSpec",
    "EstimateResult",
    "FeatureMatrix",
    "PanelDataset",
    "SimulatedPanel",
    "SolverOptions",
    "build_features",
    "kkt_report",
    "lagged_levels",
    "load_panel_csv",
    "simulate",
    "simulate_interactive",
    "solve_dual",
    "solve_primal_reference",
    "unit_autocorrelation",
    "write_panel_csv",
]
