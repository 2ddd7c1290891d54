"""Simulation and estimation laboratory for planar isotropic Brownian flows.

The package is organised around five layers:

``covariance``
    Finite cosine mode-sum models of the velocity covariance tensor,
    their spectral moduli and symmetry diagnostics.
``flow``
    Euler-Maruyama integration of particle ensembles, Jacobians and
    material curves driven by a shared mode-noise draw per step.
``geometry``
    Discrete path geometry: diameters, sup-distances, distance to the
    cone of Lipschitz paths via convex reachability, Lipschitz nets and
    two-sided Hausdorff estimates.
``estimators``
    Monte Carlo estimators: one-point diffusivity, Lyapunov exponents by
    QR renormalisation, first-passage based stable-norm estimation,
    shape, diameter-persistence and support experiments.
``cli``
    JSON-config driven command line front end with deterministic CSV
    output.
"""

__version__ = "0.1.0"

from .covariance import (
    CovarianceSummary,
    Mode,
    ModeSet,
    SpectralModel,
    build_mode_set,
    check_kappa_bound,
    covariance_at,
    default_spectral_model,
    isotropy_defect,
    longitudinal_normal,
    lyapunov_exponents,
    moduli,
)
from .flow import (
    CurveImage,
    Ensemble,
    HitResult,
    NoiseDraw,
    PathBundle,
    ResolutionError,
    evolve_curve,
    jacobian_increment,
    run_until_hit,
    simulate_paths,
    step,
    velocity_increment,
)
from .geometry import (
    ConvexRegion,
    DiscretePath,
    LipNet,
    build_lip_net,
    diameter,
    dist_to_lip,
    dist_to_lip_1d,
    hausdorff_estimate,
    sup_distance,
)
from .estimators import (
    EstimateResult,
    LyapunovEstimate,
    PersistenceResult,
    ScalingReport,
    ShapeReport,
    StableNormEstimate,
    SupportReport,
    diameter_persistence,
    estimate_lyapunov,
    estimate_stable_norm,
    one_point_diffusivity,
    scaled_mode_set,
    scaling_check,
    shape_experiment,
    support_experiment,
)

__all__ = [
    "__version__",
    # covariance
    "SpectralModel", "Mode", "ModeSet", "CovarianceSummary",
    "build_mode_set", "covariance_at", "longitudinal_normal", "moduli",
    "lyapunov_exponents", "check_kappa_bound", "isotropy_defect",
    "default_spectral_model",
    # flow
    "Ensemble", "NoiseDraw", "CurveImage", "PathBundle", "HitResult",
    "ResolutionError", "velocity_increment", "jacobian_increment", "step",
    "simulate_paths", "evolve_curve", "run_until_hit",
    # geometry
    "DiscretePath", "ConvexRegion", "LipNet", "diameter", "sup_distance",
    "dist_to_lip", "dist_to_lip_1d", "build_lip_net", "hausdorff_estimate",
    # estimators
    "EstimateResult", "LyapunovEstimate", "StableNormEstimate",
    "ShapeReport", "PersistenceResult", "SupportReport", "ScalingReport",
    "one_point_diffusivity", "estimate_lyapunov", "estimate_stable_norm",
    "shape_experiment", "diameter_persistence", "support_experiment",
    "scaled_mode_set", "scaling_check",
]
