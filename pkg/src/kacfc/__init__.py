"""Simulation and variational diagnostics for a two-speed kinetic system on
the unit circle and its damped-wave / heat limits."""

from .errors import (CflViolationError, ConeViolationError,
                     ContinuityViolationError, DegenerateStateError,
                     IllPreparedError, MassMismatchError)
from .functionals import (DiffusiveLimitReport, FunctionalReport,
                          MomentumTrajectory, ProjectedFirTerms,
                          StructureBlocks, TestFunctionGrid, dual_pairing,
                          entropy_vs_uniform, fir_check, fisher_info,
                          generalized_fi, generalized_fir_terms, hamiltonian,
                          kinetic_rel_entropy, lagrangian,
                          limit_functional_diffusive,
                          limit_functional_hyperbolic, mollify_trajectory,
                          momentum_residuals, pregeneric_blocks,
                          project_trajectory, projected_fir_terms,
                          projected_functional, rate_cumulative,
                          rate_functional, rate_functional_rescaled,
                          rel_entropy, rho_entropy_vs_lebesgue,
                          test_function_bank)
from .measures import (DensityFluxPair, FluxPair, GridMeasure, KineticState,
                       ModelParams, TorusGrid, heat_kernel_weights,
                       is_atomlike, kinetic_distance, lift_pi, load_measure_csv,
                       load_measure_binary, load_state, make_bump, make_dirac,
                       make_step, make_uniform, mollify, mollify_state,
                       project_pi, save_measure_csv, save_measure_binary,
                       save_state, tv_norm, wasserstein1, INITIAL_STATES)
from .solver import (SolverConfig, Trajectory, admissible_dt, heat_reference,
                     mode_propagator, solve, step_spectral, step_strang,
                     wave_reference)

__version__ = "0.1.0"
