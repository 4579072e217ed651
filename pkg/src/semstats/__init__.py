"""semstats: predict class feature statistics from text embeddings.

Small mapping networks learn to predict each class's visual-feature mean
and diagonal covariance from its text embedding; the predictions are
blended with few-shot empirical estimates and plugged into Mahalanobis
one-class and multi-class classifiers, evaluated under episodic protocols.
"""

from .adapt import (
    AdaptConfig,
    HyperGrid,
    default_grid,
    interpolate_mean,
    select_hyperparams,
    shrink_cov,
)
from .classify import (
    ClassModel,
    classify,
    mahalanobis_sq,
    multiclass_posterior,
    oneclass_log_likelihood,
    oneclass_score,
)
from .core import (
    ClassStats,
    StandardizationParams,
    empirical_class_stats,
    zscore_apply,
    zscore_fit,
    zscore_invert,
)
from .errors import ConfigError, DataError, NumericalError, SemstatsError
from .io import read_dataset, write_dataset
from .mapper import (
    MapperBundle,
    MapperParams,
    TrainConfig,
    TrainReport,
    baseline_predictor,
    load_bundle,
    mapper_forward,
    mapper_gradient,
    mapper_loss,
    predict_class_stats,
    save_bundle,
    train_mapper,
)
from .metrics import accuracy, auroc, confidence_interval, mse
from .synth import SynthConfig, generate_world
from .tasks import (
    BASELINE,
    COV_FROM_TEXT,
    MEAN_AND_COV,
    MEAN_FROM_TEXT,
    DatasetClass,
    Episode,
    FewShotDataset,
    MethodVariant,
    ProtocolConfig,
    ProtocolReport,
    build_models,
    run_protocol,
    sample_multiclass_episode,
    sample_oneclass_episode,
    score_episode,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
