"""Drift estimation for discretely observed scalar diffusions.

The package implements the expected-maximum-likelihood (EML) one-step
estimator for unit-volatility diffusions whose drift is linear in its
coefficients, together with the machinery around it: Lamperti volatility
rescaling, modified Brownian bridge sampling, simulated-maximum-likelihood
and Girsanov-representation transition-density estimators, Radon-Nikodym
bridge diagnostics, and a CLI for simulation studies and likelihood
profiling.
"""

from .bridge import (
    BridgeConfig,
    BridgeLattice,
    bb_marginal_moments,
    build_lattice,
    mbb_step,
    ou_bridge_moments,
    sample_bridge_path,
    sample_bridge_paths,
    sample_ou_bridge_paths,
)
from .diagnostics import (
    BridgeFunctional,
    DriftEnvelope,
    RadonNikodymSample,
    check_expectation_bound,
    drift_envelope,
    envelope_bound,
    rn_samples,
    standard_functionals,
)
from .estimator import (
    EstimationResult,
    NormalEquations,
    SingularBasisError,
    accumulate_normal_equations,
    eml_estimate,
    regression_estimate,
    solve_theta,
)
from .likelihood import (
    DensityEstimate,
    EstimationError,
    LikelihoodProfile,
    euler_loglik_gap,
    euler_transition_density,
    ou_exact_loglik,
    ou_ml_fit,
    profile_likelihood,
    rogers_density,
    sml_series_loglik,
    sml_transition_density,
)
from .models import (
    BasisFunction,
    DomainExitError,
    LampertiTransform,
    ObservationSeries,
    UnitDiffusionModel,
    VolatilityModel,
    ait_sahalia_volatility,
    cir_unit_model,
    cir_unit_params,
    cir_volatility,
    euler_simulate,
    lamperti_transform,
    ou_exact_sample,
    ou_exact_transition,
    ou_model,
    quadratic_model,
)

__version__ = "0.1.0"
