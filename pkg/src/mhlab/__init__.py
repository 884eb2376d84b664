"""Exact Metropolis-Hastings kernels on finite spaces and their convergence."""

__version__ = "0.1.0"

from .measure_space import (Density, SpaceMismatchError, StateSpace, build_grid_space,
                            counting_space, integrate, l1_norm, normalize, point_mass,
                            probability_density, target_density, tv_distance)
from .kernel import (KernelPower, MHKernel, ProposalFamily, acceptance, build_kernel,
                     check_detailed_balance, check_positivity_condition, compose,
                     independence_proposal, kernel_power, random_walk_proposal,
                     stationarity_check, subkernel_power, uniform_proposal)
from .spectral import (Direction, HypothesisError, OperatorView, apply_K, apply_K_hat,
                       fixed_point_constancy, inner_product_pi, norm_pi, spectral_gap,
                       spectrum)
from .convergence import ConvergenceReport, evolve, tv_trace
from .sampler import run_chain, run_ensemble

__all__ = [
    "Density", "SpaceMismatchError", "StateSpace", "build_grid_space", "counting_space",
    "integrate", "l1_norm", "normalize", "point_mass", "probability_density",
    "target_density", "tv_distance",
    "KernelPower", "MHKernel", "ProposalFamily", "acceptance", "build_kernel",
    "check_detailed_balance", "check_positivity_condition", "compose",
    "independence_proposal", "kernel_power", "random_walk_proposal", "stationarity_check",
    "subkernel_power", "uniform_proposal",
    "Direction", "HypothesisError", "OperatorView", "apply_K", "apply_K_hat",
    "fixed_point_constancy", "inner_product_pi", "norm_pi", "spectral_gap", "spectrum",
    "ConvergenceReport", "evolve", "tv_trace", "run_chain", "run_ensemble",
]
