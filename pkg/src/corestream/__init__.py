"""Streaming coreset tree with hierarchical sampling for trainable trackers."""

from .blocks import (
    CoresetBlock,
    DataBlock,
    ReductionParams,
    concat_blocks,
    dist_sq,
    measure_epsilon,
    random_orthonormal,
    reduce_block,
    svd_truncate,
)
from .tree import (
    CoresetNode,
    CoresetTree,
    MergeReport,
    StreamStats,
    TreeView,
    collapse,
    validate_view,
)
from .sampling import (
    RAW_LEVEL,
    RowTag,
    SampleSet,
    hierarchical_sample,
    random_sample,
    root_sample,
    subsample,
)
from .svm import (
    LinearModel,
    TrainParams,
    decision,
    decisions,
    objective,
    train_binary,
    train_one_class,
)
from .kalman import (
    KalmanState,
    NoiseParams,
    em_fit,
    em_fit_detailed,
    kalman_predict,
    kalman_update,
)
from .tracking import (
    DetectParams,
    Detection,
    Frame,
    FrameRecord,
    SyntheticStreamConfig,
    TrackRun,
    TrackerParams,
    detect,
    evaluate,
    generate_stream,
    suppress,
    track_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CoresetBlock",
    "CoresetNode",
    "CoresetTree",
    "DataBlock",
    "DetectParams",
    "Detection",
    "Frame",
    "FrameRecord",
    "KalmanState",
    "LinearModel",
    "MergeReport",
    "NoiseParams",
    "RAW_LEVEL",
    "ReductionParams",
    "RowTag",
    "SampleSet",
    "StreamStats",
    "SyntheticStreamConfig",
    "TrackRun",
    "TrackerParams",
    "TrainParams",
    "TreeView",
    "collapse",
    "concat_blocks",
    "decision",
    "decisions",
    "detect",
    "dist_sq",
    "em_fit",
    "em_fit_detailed",
    "evaluate",
    "generate_stream",
    "hierarchical_sample",
    "kalman_predict",
    "kalman_update",
    "measure_epsilon",
    "objective",
    "random_orthonormal",
    "random_sample",
    "reduce_block",
    "root_sample",
    "subsample",
    "suppress",
    "svd_truncate",
    "track_stream",
    "train_binary",
    "train_one_class",
    "validate_view",
]
