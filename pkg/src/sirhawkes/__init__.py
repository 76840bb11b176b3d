"""Generalised stochastic SIR models and their HawkesN counterparts."""
from .cascades import Cascade, SirRealization, load_cascades, load_realizations
from .fit import FitConfig, FitResult, fit_cascade, fit_joint, fit_sir
from .kernels import Family, KernelSpec, RecoveryDistribution, SirSpec, branching_factor, to_kernel, to_sir
from .likelihood import HawkesNParams, hawkesn_loglik, holdout_loglik, sir_loglik

__version__ = "0.1.0"

__all__ = [
    "Cascade",
    "SirRealization",
    "load_cascades",
    "load_realizations",
    "FitConfig",
    "FitResult",
    "fit_cascade",
    "fit_joint",
    "fit_sir",
    "Family",
    "KernelSpec",
    "RecoveryDistribution",
    "SirSpec",
    "branching_factor",
    "to_kernel",
    "to_sir",
    "HawkesNParams",
    "hawkesn_loglik",
    "holdout_loglik",
    "sir_loglik",
]
