"""Certified local robustness bounds via tight linear relaxation.

Pipeline: load a small feed-forward classifier (dense, conv, batchnorm,
maxpool, relu/sigmoid/tanh/arctan), normalise it to affine + nonlinear
layers, propagate symbolic bounds with backsubstitution, and binary-search
the largest perturbation radius whose output bounds still prove the label.
"""

from .certify import (
    CertificationConfig,
    CertificationReport,
    certified_radius,
    is_robust,
    parse_norm,
)
from .maxpool import (
    PoolRelaxation,
    endpoint_ordering,
    maxpool_lower,
    maxpool_upper,
    relax_pool,
    verify_plane_sound,
)
from .model import (
    Activation,
    Affine,
    BatchNorm,
    Conv2D,
    InputFormatError,
    MaxPool,
    Network,
    NetworkFormatError,
    Tensor,
    conv_to_affine,
    fold_batchnorm,
    forward,
    forward_all,
    load_inputs,
    load_network,
    normalize,
    pool_windows,
    save_network,
)
from .oracle import (
    OracleConfig,
    affine_box_integral,
    empirical_attack_radius,
    prediction_check,
    relaxation_area,
    sample_ball,
    soundness_check,
)
from .propagate import (
    LayerBounds,
    LinearMap,
    PerturbationBall,
    RelaxationCache,
    compute_all_bounds,
    dual_norm_row,
    global_interval,
    substitute_affine,
    substitute_nonlinear,
)
from .relaxation import (
    AnchorPolicy,
    NoTangentPointError,
    ScalarLine,
    ScalarRelaxation,
    act_slope,
    act_value,
    relax,
    relu_bounds,
    sshape_bounds,
    tangent_lower_anchor,
    tangent_upper_anchor,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "Affine",
    "AnchorPolicy",
    "BatchNorm",
    "CertificationConfig",
    "CertificationReport",
    "Conv2D",
    "InputFormatError",
    "LayerBounds",
    "LinearMap",
    "MaxPool",
    "Network",
    "NetworkFormatError",
    "NoTangentPointError",
    "OracleConfig",
    "PerturbationBall",
    "PoolRelaxation",
    "RelaxationCache",
    "ScalarLine",
    "ScalarRelaxation",
    "Tensor",
    "act_slope",
    "act_value",
    "affine_box_integral",
    "certified_radius",
    "compute_all_bounds",
    "conv_to_affine",
    "dual_norm_row",
    "empirical_attack_radius",
    "prediction_check",
    "endpoint_ordering",
    "fold_batchnorm",
    "forward",
    "forward_all",
    "global_interval",
    "is_robust",
    "load_inputs",
    "load_network",
    "maxpool_lower",
    "maxpool_upper",
    "normalize",
    "parse_norm",
    "pool_windows",
    "relax",
    "relax_pool",
    "relaxation_area",
    "relu_bounds",
    "sample_ball",
    "save_network",
    "soundness_check",
    "sshape_bounds",
    "substitute_affine",
    "substitute_nonlinear",
    "tangent_lower_anchor",
    "tangent_upper_anchor",
    "verify_plane_sound",
    "__version__",
]
