"""Training-free saliency-guided RoI selection and precise event-spotting utilities."""

from .core import (
    Event,
    EventSet,
    FeatureSequence,
    FeatureVolume,
    FrameGeometry,
    RoispotError,
    SaliencyVolume,
    ScoreSequence,
    Stage,
    ValidationError,
)
from .evaluation import (
    ApReport,
    EvalConfig,
    average_precision,
    cost_ratio,
    evaluate,
    gflops_estimate,
    match_detections,
)
from .pipeline import PipelineConfig, clip_rois
from .roi import GridRect, RoiConfig, RoiTrack, crop_resize, grid_to_frame, min_mass_rect, select_rois
from .saliency import SaliencyConfig, build_saliency
from .spotting import (
    LossConfig,
    NmsConfig,
    NmsMode,
    aggregate_clips,
    combined_loss,
    extract_detections,
    fuse_max,
    hard_nms_1d,
    soft_nms_1d,
    weighted_cross_entropy,
)

__version__ = "0.1.0"
