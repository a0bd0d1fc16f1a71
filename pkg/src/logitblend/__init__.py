"""Subset logistic regression ensembles blended on the probability simplex."""

from .baseline import (
    BaseModel,
    BaselinePipeline,
    BinEncoding,
    BinningSpec,
    bin_equal_frequency,
    collapse_adjacent_bins,
    encode_log_odds,
    explicit_cutpoints,
    train_base_model,
)
from .dataset import (
    Dataset,
    ImputePolicy,
    Schema,
    SplitSpec,
    SynthConfig,
    apply_fills,
    filter_prior_defaulters,
    generate_synthetic,
    impute_missing,
    load_csv,
    save_csv,
    split,
)
from .ensemble import (
    ModelPool,
    PoolConfig,
    PoolMember,
    PredictionMatrix,
    build_prediction_matrix,
    sample_feature_subsets,
    train_pool,
)
from .errors import ConfigError, DataError, LogitblendError, NumericalError
from .interpret import (
    DeltaP,
    EnsembleModel,
    ReasonCode,
    SensitivityReport,
    assemble,
    delta_p,
    reason_codes,
    reference_row,
    score,
    score_dataset,
    sensitivity,
    sensitivity_report,
)
from .logit import (
    FitInfo,
    FitOptions,
    LogitModel,
    backward_eliminate,
    fit,
    odds_multiplier,
    predict_proba,
)
from .metrics import (
    Concordance,
    DecileRow,
    EvaluationReport,
    PeriodKs,
    concordance,
    decile_table,
    evaluate,
    evaluate_over_time,
    ks_statistic,
)
from .simplex_qp import (
    GramSystem,
    KktReport,
    SolverOptions,
    WeightSolution,
    build_gram,
    check_kkt,
    project_to_simplex,
    solve_simplex_qp,
)

__version__ = "0.1.0"
