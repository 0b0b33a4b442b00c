"""Lattice random-walk approximations of space-time fractional diffusion.

The package builds explicit non-Markovian schemes for
``D_*^beta u = int D_0^alpha u d rho(alpha)`` (and distributed-order
variants in time), simulates the matching walkers, and compares both with
Mittag-Leffler reference solutions.
"""

from .coefficients import (CoefficientTable, caputo_apply, distributed_coefficients,
                           gl_coefficients, liu_coefficients, make_coefficients)
from .errors import (AliasingError, ConfigError, CTRWError, HistoryMissing, NumericGuardError,
                     StabilityViolation, TailError, TruncationTooCoarse)
from .experiments import (ConvergenceReport, ExperimentConfig, run_convergence,
                          run_distributed_order, run_memoryless)
from .kernel import (LatticeKernel, build_kernel, jump_cf, kernel_cf, lattice_Q,
                     markov_probabilities, p_hat, stability_bound)
from .measures import (SpectralMeasure, TimeMeasure, load_measure, make_atomic_measure,
                       make_density_measure, symbol_psi)
from .reference import (discrete_laplace_cf, exact_cf, frac_density, green_function_beta1,
                        laplace_symbol, spectral_solution)
from .sampler import WalkerEnsemble, advance_walker, empirical_cf, sample_ensemble
from .scheme import GridLayerHistory, cf_recursion, grid_cf, init_grid, run, solve, step
from .special import MLEvalConfig, b_alpha, mittag_leffler

__version__ = "0.1.0"

__all__ = [
    "AliasingError", "CTRWError", "CoefficientTable", "ConfigError", "ConvergenceReport",
    "ExperimentConfig", "GridLayerHistory", "HistoryMissing", "LatticeKernel", "MLEvalConfig",
    "NumericGuardError", "SpectralMeasure", "StabilityViolation", "TailError", "TimeMeasure",
    "TruncationTooCoarse", "WalkerEnsemble", "advance_walker", "b_alpha", "build_kernel",
    "caputo_apply", "cf_recursion", "discrete_laplace_cf", "distributed_coefficients",
    "empirical_cf", "exact_cf", "frac_density", "gl_coefficients", "green_function_beta1",
    "grid_cf", "init_grid", "jump_cf", "kernel_cf", "laplace_symbol", "lattice_Q",
    "liu_coefficients", "load_measure", "make_atomic_measure", "make_coefficients",
    "make_density_measure", "markov_probabilities", "mittag_leffler", "p_hat", "run",
    "run_convergence", "run_distributed_order", "run_memoryless", "sample_ensemble", "solve",
    "spectral_solution", "stability_bound", "step", "symbol_psi",
]
