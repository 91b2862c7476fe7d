"""Synthetic low-contrast phantoms: a target blob adjacent to a near-equal-intensity distractor.

Each phantom pairs a target ellipse (the labeled object) with a distractor
ellipse whose mean intensity differs by at most MAX_CONTRAST_GAP, over a
noisy background. Intensity alone cannot separate the two blobs, which is
what makes seed-guided refinement measurable on this data.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

BACKGROUND_LEVEL = 0.2
NOISE_SIGMA = 0.05
MAX_CONTRAST_GAP = 0.08
EDGE_BLUR_SIGMA = 0.7


def _ellipse_mask(size: int, center, axes, angle: float) -> np.ndarray:
    rows = np.arange(size, dtype=np.float64)[:, None]
    cols = np.arange(size, dtype=np.float64)[None, :]
    dr = rows - center[0]
    dc = cols - center[1]
    cos, sin = np.cos(angle), np.sin(angle)
    u = (dc * cos + dr * sin) / axes[0]
    v = (-dc * sin + dr * cos) / axes[1]
    return u * u + v * v <= 1.0


def _sample_blob(rng: np.random.Generator, size: int, min_axis: float = 0.14) -> dict:
    return {
        "center": np.array(
            [
                size / 2 + rng.uniform(-size / 8, size / 8),
                size / 2 + rng.uniform(-size / 8, size / 8),
            ]
        ),
        "axes": rng.uniform(min_axis * size, 0.28 * size, size=2),
        "angle": rng.uniform(0.0, np.pi),
    }


def _place_distractor(
    rng: np.random.Generator, size: int, target: dict, min_axis: float = 0.14
) -> dict:
    blob = {
        "axes": rng.uniform(min_axis * size, 0.28 * size, size=2),
        "angle": rng.uniform(0.0, np.pi),
    }
    reach = float(np.mean(target["axes"]) + np.mean(blob["axes"]))
    theta = rng.uniform(0.0, 2 * np.pi)
    offset = reach * rng.uniform(0.95, 1.15)
    center = target["center"] + offset * np.array([np.sin(theta), np.cos(theta)])
    margin = float(np.max(blob["axes"]))
    blob["center"] = np.clip(center, margin, size - 1 - margin)
    return blob


def _compose(rng, size, target, distractor, mu_t, mu_d):
    clean = np.full((size, size), BACKGROUND_LEVEL, dtype=np.float64)
    clean[_ellipse_mask(size, distractor["center"], distractor["axes"], distractor["angle"])] = mu_d
    target_mask = _ellipse_mask(size, target["center"], target["axes"], target["angle"])
    clean[target_mask] = mu_t
    blurred = ndimage.gaussian_filter(clean, sigma=EDGE_BLUR_SIGMA)
    noisy = blurred + rng.normal(0.0, NOISE_SIGMA, size=clean.shape)
    return np.clip(noisy, 0.0, 1.0).astype(np.float32), target_mask


def _sample_intensities(rng: np.random.Generator) -> tuple[float, float]:
    mu_t = rng.uniform(0.55, 0.7)
    gap = rng.uniform(0.02, MAX_CONTRAST_GAP) * rng.choice((-1.0, 1.0))
    return mu_t, mu_t + gap


def make_phantom(rng_seed: int, size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic phantom image and target mask for one seed."""
    if size % 4 != 0 or size < 8:
        raise ValueError(f"size must be >= 8 and divisible by 4, got {size}")
    rng = np.random.default_rng(rng_seed)
    target = _sample_blob(rng, size)
    distractor = _place_distractor(rng, size, target)
    mu_t, mu_d = _sample_intensities(rng)
    return _compose(rng, size, target, distractor, mu_t, mu_d)


def make_phantom_volume(
    rng_seed: int, size: int = 64, n_slices: int = 21
) -> tuple[np.ndarray, np.ndarray]:
    """Coherent slice stack: blobs drift by at most ~2 px per slice."""
    if size % 4 != 0 or size < 8:
        raise ValueError(f"size must be >= 8 and divisible by 4, got {size}")
    if n_slices < 3:
        raise ValueError(f"n_slices must be >= 3, got {n_slices}")
    rng = np.random.default_rng(rng_seed)
    # Volume targets skip the smallest sizes so every slice stays well
    # above the noise floor; the 2D generator keeps the full range.
    target = _sample_blob(rng, size, min_axis=0.17)
    distractor = _place_distractor(rng, size, target, min_axis=0.17)
    _keep_apart(target, distractor, size)
    mu_t, mu_d = _sample_intensities(rng)
    images = np.empty((n_slices, size, size), dtype=np.float32)
    masks = np.empty((n_slices, size, size), dtype=bool)
    for i in range(n_slices):
        images[i], masks[i] = _compose(rng, size, target, distractor, mu_t, mu_d)
        for blob in (target, distractor):
            blob["center"] = np.clip(
                blob["center"] + rng.uniform(-1.0, 1.0, size=2), size / 6, 5 * size / 6
            )
            blob["axes"] = np.clip(
                blob["axes"] + rng.uniform(-0.5, 0.5, size=2), 0.17 * size, 0.28 * size
            )
            blob["angle"] += rng.uniform(-0.05, 0.05)
        _keep_apart(target, distractor, size)
    return images, masks


def _keep_apart(target: dict, distractor: dict, size: int, min_sep: float = 1.05) -> None:
    # Blob walks must not merge target and distractor, or slices stop
    # being segmentable even with perfect seeds.
    reach = float(np.mean(target["axes"]) + np.mean(distractor["axes"]))
    gap = distractor["center"] - target["center"]
    dist = float(np.hypot(*gap))
    if dist < min_sep * reach:
        direction = gap / dist if dist > 1e-9 else np.array([0.0, 1.0])
        distractor["center"] = target["center"] + direction * min_sep * reach
        margin = float(np.max(distractor["axes"]))
        distractor["center"] = np.clip(distractor["center"], margin, size - 1 - margin)


def make_dataset(rng_seed: int, count: int, size: int = 64) -> list[tuple[np.ndarray, np.ndarray]]:
    """`count` phantoms with per-sample seeds rng_seed, rng_seed+1, ..."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [make_phantom(rng_seed + i, size) for i in range(count)]
