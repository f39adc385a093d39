"""Robust MISO broadcast precoding under average-rate QoS targets with imperfect CSIT."""
from .analysis import BetaFit, beta_fit, gap_estimate, gap_exact, sinr_approx_rate
from .balancing import BalanceOptions, balance, scaled_targets
from .bc_model import BcFilterSet
from .channel import ChannelEnsemble, ChannelModel, build_ensemble
from .duality import bc_to_mac, mac_to_bc
from .errors import BracketFailure, Diverged, MaxIterations, MisoQosError, SolverError
from .feasibility import (FeasibilityReport, FixedPointContext, assess_feasibility,
                          polytope_test, trace_bound)
from .mac_model import MacFilterSet
from .numerics import SeededRng
from .power_min import QosTargets, SolverOptions, solve

__version__ = "0.1.0"

__all__ = [
    "BalanceOptions", "BcFilterSet", "BetaFit", "BracketFailure", "ChannelEnsemble",
    "ChannelModel", "Diverged", "FeasibilityReport", "FixedPointContext", "MacFilterSet",
    "MaxIterations", "MisoQosError", "QosTargets", "SeededRng", "SolverError", "SolverOptions",
    "assess_feasibility", "balance", "bc_to_mac", "beta_fit", "build_ensemble", "gap_estimate",
    "gap_exact", "mac_to_bc", "polytope_test", "scaled_targets", "sinr_approx_rate", "solve",
    "trace_bound",
]
