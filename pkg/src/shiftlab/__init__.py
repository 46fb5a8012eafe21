"""Exact analysis of out-of-distribution error under selection bias.

The package enumerates small discrete joints for a colored-digit dataset
family, computes the information quantities that govern train/test error
decompositions, verifies the associated inequalities numerically, and
optimizes stochastic encoders against bottleneck, independence, sufficiency
and separation criteria.
"""

from .analysis import (
    BaselineKind,
    ErrorDecomposition,
    baseline,
    baseline_table,
    cross_entropy,
    decompose_test_error,
    induced_model,
    optimal_latent_classifier,
    prior_shift_correct,
    write_decomposition_csv,
)
from .core import Channel, JointTable, VariableSchema, conditional_channel, make_joint
from .datasets import (
    DatasetVariant,
    SampleRecord,
    build_joint,
    export_records,
    measurement_table,
    read_records,
    sample,
    sufficient_statistic_view,
    xhat_channel,
)
from .encoder import (
    CriterionKind,
    EncoderParams,
    OptimizationResult,
    OptimizerConfig,
    Trajectory,
    TrajectoryPoint,
    default_lambda_grid,
    derive_seed,
    gradient,
    init_params,
    materialize,
    objective,
    optimize,
    sweep,
    write_trajectory_csv,
)
from .errors import ShiftLabError
from .infotheory import (
    FuzzReport,
    PropositionReport,
    ShiftDecomposition,
    check_propositions,
    entropy,
    fuzz_propositions,
    jsd,
    kl_conditional,
    kl_divergence,
    mutual_information,
    pinsker_latent_bound,
    shift_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineKind",
    "Channel",
    "CriterionKind",
    "DatasetVariant",
    "EncoderParams",
    "ErrorDecomposition",
    "FuzzReport",
    "JointTable",
    "OptimizationResult",
    "OptimizerConfig",
    "PropositionReport",
    "SampleRecord",
    "ShiftDecomposition",
    "ShiftLabError",
    "Trajectory",
    "TrajectoryPoint",
    "VariableSchema",
    "baseline",
    "baseline_table",
    "build_joint",
    "check_propositions",
    "conditional_channel",
    "cross_entropy",
    "decompose_test_error",
    "default_lambda_grid",
    "derive_seed",
    "entropy",
    "export_records",
    "fuzz_propositions",
    "gradient",
    "induced_model",
    "init_params",
    "jsd",
    "kl_conditional",
    "kl_divergence",
    "make_joint",
    "materialize",
    "measurement_table",
    "mutual_information",
    "objective",
    "optimal_latent_classifier",
    "optimize",
    "pinsker_latent_bound",
    "prior_shift_correct",
    "read_records",
    "sample",
    "shift_decomposition",
    "sufficient_statistic_view",
    "sweep",
    "write_decomposition_csv",
    "write_trajectory_csv",
    "xhat_channel",
]
