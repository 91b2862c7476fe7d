"""Semi-automatic slice-by-slice volume segmentation from one reference slice."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import render_seeds
from .nets import RefineNet, backbone_forward, binarize, refine_forward
from .seedgen import (
    DEFAULT_DILATION_RADIUS,
    DEFAULT_MAX_SEEDS_PER_CLASS,
    seeds_from_reference_slice,
    subsample_seeds,
)
from .validation import check_binary_mask, check_volume


@dataclass(frozen=True)
class PropagateConfig:
    sigma: float = 5.0
    dilation_radius: int = DEFAULT_DILATION_RADIUS
    threshold: float = 0.5
    max_seeds_per_class: int = DEFAULT_MAX_SEEDS_PER_CLASS
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.dilation_radius < 1:
            raise ValueError(f"dilation_radius must be >= 1, got {self.dilation_radius}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")


def _segment_slice(model, image, prev_mask, config) -> np.ndarray:
    seeds = seeds_from_reference_slice(prev_mask, config.dilation_radius)
    seeds = subsample_seeds(seeds, config.max_seeds_per_class, rng_seed=config.rng_seed)
    channels = render_seeds(seeds, image.shape[0], image.shape[1], config.sigma)
    seg = backbone_forward(model, image)
    return binarize(refine_forward(model, seg, channels), config.threshold)


def propagate(
    model: RefineNet,
    volume,
    ref_index: int,
    ref_mask,
    config: PropagateConfig = PropagateConfig(),
) -> np.ndarray:
    """Segment every slice, chaining seeds outward from the reference slice.

    The reference mask is copied through untouched. Walking away from it in
    both directions, each new slice is refined with seeds generated from the
    previous slice's result (skeleton as foreground, dilation ring as
    background). A direction stops as soon as it produces an empty mask; the
    remaining slices on that side stay empty.
    """
    volume = check_volume(volume, "volume", kind="image")
    ref_mask = check_binary_mask(ref_mask, "ref_mask")
    n_slices = volume.shape[0]
    if not 0 <= ref_index < n_slices:
        raise IndexError(f"ref_index {ref_index} out of range for {n_slices} slices")
    if ref_mask.shape != volume.shape[1:]:
        raise ValueError(
            f"ref_mask shape {ref_mask.shape} does not match slice shape {volume.shape[1:]}"
        )
    result = np.zeros(volume.shape, dtype=bool)
    result[ref_index] = ref_mask
    for direction in (-1, 1):
        j = ref_index + direction
        while 0 <= j < n_slices:
            prev = result[j - direction]
            if not prev.any():
                break
            result[j] = _segment_slice(model, volume[j], prev, config)
            j += direction
    return result
