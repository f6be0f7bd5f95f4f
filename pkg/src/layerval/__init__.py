"""Online data valuation for MLP training.

Gradient inner-product influence estimators (full IP, layerwise Ghost,
layer-aware LAI, last-layer LLI), a Monte-Carlo Shapley reference for
fidelity checks, and batch-curation training policies.
"""

from .data import DatasetBundle, Sample
from .influence import (
    Estimator,
    InfluenceScore,
    PairSimilarities,
    Preconditioner,
    SignConvention,
    aggregate_over_validation,
    ghost_influence,
    ip_influence,
    lai_influence,
    lli_influence,
    pair_similarities,
    preconditioned_score,
)
from .network import (
    MLP,
    Activation,
    LayerSpec,
    ParamGrads,
    SampleTaps,
    backward_taps,
    evaluate_sample,
    forward,
    loss_and_output_grad,
    param_grads,
)
from .oracle import ShapleyEstimate, UtilityFn, loo_influence, shapley_exact, shapley_mc
from .trainer import (
    CostLedger,
    CurationDecision,
    CurationMode,
    TrainerConfig,
    TrainingReport,
    ValidationCache,
    build_validation_cache,
    curate_batch,
    ledger_compare,
    self_influence_curate,
    sgd_step,
    train,
)

__version__ = "0.1.0"
