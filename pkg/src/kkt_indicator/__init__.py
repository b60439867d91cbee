"""KKT-stationarity convergence indicators for multi-objective approximation sets."""

from kkt_indicator.indicators import IndicatorConfig, h_adap, h_old, indicator_report
from kkt_indicator.problems import get_problem
from kkt_indicator.stationarity import ResidualSet, residual, residuals, solve_min_norm_qp

__all__ = [
    "IndicatorConfig",
    "ResidualSet",
    "get_problem",
    "h_adap",
    "h_old",
    "indicator_report",
    "residual",
    "residuals",
    "solve_min_norm_qp",
]
__version__ = "0.1.0"
