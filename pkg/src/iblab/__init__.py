"""Implicit-bias lab: what gradient descent converges to on separable data.

The package computes the dual convex program behind the limiting direction
of gradient descent for a family of convex losses, compares it against
minimum-norm interpolation, and verifies the equivalence (exact and
approximate) empirically: closed forms on identity/diagonal Grams, a Newton
solver for general Grams, multiclass extensions, adjusted-label converses,
and a seeded experiment harness.
"""

from .data import (
    Dataset,
    EffectiveDims,
    effective_dims,
    encode_multiclass,
    gen_diagonal_gram,
    gen_orthogonal,
    gen_subgaussian,
    load_dataset,
    save_dataset,
)
from .dual import (
    AdjustedLabels,
    CEDualSolution,
    DualSolution,
    adjusted_labels,
    ce_candidate,
    primal_from_dual,
    solve_diagonal,
    solve_identity,
    solve_multiclass_general,
    solve_relaxed,
)
from .errors import (
    DegenerateDataError,
    DomainError,
    DomainViolationError,
    IblabError,
    InvalidConfigurationError,
    InvalidDatasetError,
    InvalidParameterError,
    LossOverflowError,
    NormalizationViolationError,
    NotApplicableError,
    SingularGramError,
    SolverFailureError,
    TrainingOverflowError,
)
from .interpolation import (
    GramSummary,
    SvpReport,
    direction_distance,
    eps_alpha,
    gram_summary,
    mni,
    svp_check,
)
from .losses import (
    Binary,
    LossSpec,
    MulticlassCE,
    MulticlassEncoding,
    MulticlassGeneral,
    build_encoding,
    dual_map,
    generalized_sum,
    h_map,
    make_loss,
    multiclass_dual_map,
    multiclass_generalized_sum,
    smoothness_bound,
    smoothness_is_estimated,
)
from .train import (
    IWConfig,
    MarginReport,
    StepSchedule,
    StopRule,
    Trajectory,
    train_binary,
    train_importance_weighted,
    train_multiclass,
)

__version__ = "0.1.0"
