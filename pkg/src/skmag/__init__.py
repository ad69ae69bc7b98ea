"""Small-mass limit simulator for damped magnetic stochastic wave systems."""
from .dynamics import (
    apply_S_mu_eps,
    apply_T0,
    apply_T_eps,
    duhamel_first_component,
    duhamel_first_order,
    exp_j_scaled,
    second_order_propagator,
)
from .errors import InstabilityError, InvalidArgument, PreconditionViolation, RefinementRequired, UndefinedFit
from .experiments import (
    ExperimentConfig,
    RateFit,
    SweepTable,
    counterexample_variance,
    eps_sweep_first_order,
    eps_sweep_second_order,
    failure_floor,
    mu_sweep,
    rate_fit,
)
from .noise import DiffusionSpec, DriftSpec, NoiseSpec, PathSeed, brownian_increments
from .sde import SimGrid, coupled_sup_error, simulate_first_order, simulate_second_order, step_covariance
from .spectral import (
    EigenSequence,
    PhasePoint,
    SpectralField,
    analyze,
    dirichlet_eigens,
    explicit_eigens,
    phase_norm,
    power_law_eigens,
    project,
    sobolev_norm,
    synthesize,
    weighted_phase_norm,
)

__version__ = "0.1.0"
