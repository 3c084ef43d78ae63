"""Activation-weighted quadratic loss toolkit for real phase retrieval.

Recovers x from m Gaussian quadratic measurements y_k = (a_k^T x)^2 by
gradient descent on a loss whose terms are gated by a plateau-to-cutoff
activation, and verifies the loss landscape region by region (curvature
at the truth, saddle slab, sign-definite radial slopes elsewhere).
"""

from .activation import (
    ActivationProfile,
    evaluate,
    junction_report,
    profile_from_spec,
    sup_norms,
)
from .descent import (
    SolveConfig,
    TrialRecord,
    descend,
    dist,
    success_curve,
)
from .ensemble import (
    EnsembleFormatError,
    EnsembleValidationError,
    MeasurementEnsemble,
    RngSpec,
    generate,
    load,
    mean_energy_check,
    save,
)
from .landscape import (
    BoundCheck,
    RegionLabel,
    TheoremReport,
    classify,
    min_eigenpair,
    min_eigenvalue,
    moment_identity_check,
    sample_point,
    sample_region,
    verify_point,
)
from .loss import (
    LossEval,
    PerTermSample,
    SingularityError,
    fd_check,
    gradient,
    hessian,
    per_term_samples,
    radial_derivative,
    value,
    vanilla_value_grad,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationProfile",
    "BoundCheck",
    "EnsembleFormatError",
    "EnsembleValidationError",
    "LossEval",
    "MeasurementEnsemble",
    "PerTermSample",
    "RegionLabel",
    "RngSpec",
    "SingularityError",
    "SolveConfig",
    "TheoremReport",
    "TrialRecord",
    "classify",
    "descend",
    "dist",
    "evaluate",
    "fd_check",
    "generate",
    "gradient",
    "hessian",
    "junction_report",
    "load",
    "mean_energy_check",
    "min_eigenpair",
    "min_eigenvalue",
    "moment_identity_check",
    "per_term_samples",
    "profile_from_spec",
    "radial_derivative",
    "sample_point",
    "sample_region",
    "save",
    "success_curve",
    "sup_norms",
    "value",
    "vanilla_value_grad",
]
