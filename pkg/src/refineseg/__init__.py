"""Interactive seed-guided refinement segmentation for low-contrast grayscale images."""

from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import RefineSegmenter
from .evaluator import MetricsRecord, evaluate_volume, metrics, slice_metrics
from .imgcore import (
    SeedChannels,
    SeedSet,
    dilate,
    dilation_boundary,
    mask_to_points,
    render_seeds,
    skeletonize,
    subtraction_mask,
)
from .nets import (
    MultiScaleSeg,
    NetConfig,
    RefineNet,
    backbone_forward,
    binarize,
    build_model,
    difficulty_map,
    model_from_params,
    model_params,
    refine_forward,
)
from .phantoms import make_dataset, make_phantom, make_phantom_volume
from .propagator import PropagateConfig, propagate
from .seedgen import generate_training_seeds, seeds_from_reference_slice, subsample_seeds
from .trainer import TrainConfig, TrainingDivergedError, evaluate_with_oracle_seeds, fit, train_step

__version__ = "0.1.0"

__all__ = [
    "MetricsRecord",
    "MultiScaleSeg",
    "NetConfig",
    "PropagateConfig",
    "RefineNet",
    "RefineSegmenter",
    "SeedChannels",
    "SeedSet",
    "TrainConfig",
    "TrainingDivergedError",
    "backbone_forward",
    "binarize",
    "build_model",
    "difficulty_map",
    "dilate",
    "dilation_boundary",
    "evaluate_volume",
    "evaluate_with_oracle_seeds",
    "fit",
    "generate_training_seeds",
    "load_checkpoint",
    "make_dataset",
    "make_phantom",
    "make_phantom_volume",
    "mask_to_points",
    "metrics",
    "model_from_params",
    "model_params",
    "propagate",
    "refine_forward",
    "render_seeds",
    "save_checkpoint",
    "seeds_from_reference_slice",
    "skeletonize",
    "slice_metrics",
    "subsample_seeds",
    "subtraction_mask",
    "train_step",
    "__version__",
]
