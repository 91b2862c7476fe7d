"""Pure 2D raster primitives: signed masks, morphology, thinning, seed rendering."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .validation import check_binary_mask, check_points_in_bounds, check_same_shape

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
_SQUARE3 = np.ones((3, 3), dtype=bool)


@dataclass
class SeedSet:
    """Foreground and background seed coordinates, as (row, col) pairs."""

    foreground: list[tuple[int, int]] = field(default_factory=list)
    background: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.foreground = [(int(r), int(c)) for r, c in self.foreground]
        self.background = [(int(r), int(c)) for r, c in self.background]
        overlap = set(self.foreground) & set(self.background)
        if overlap:
            raise ValueError(f"seeds present in both classes: {sorted(overlap)[:8]}")

    def is_empty(self) -> bool:
        return not self.foreground and not self.background

    def to_json(self) -> dict:
        """Wire format: {"fg": [[r, c], ...], "bg": [[r, c], ...]}."""
        return {
            "fg": [[r, c] for r, c in self.foreground],
            "bg": [[r, c] for r, c in self.background],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeedSet":
        return cls(
            foreground=[(int(p[0]), int(p[1])) for p in obj.get("fg", [])],
            background=[(int(p[0]), int(p[1])) for p in obj.get("bg", [])],
        )


@dataclass
class SeedChannels:
    """Per-class Gaussian response maps rendered from a SeedSet."""

    fg_channel: np.ndarray
    bg_channel: np.ndarray
    sigma: float


def subtraction_mask(pred, gt) -> np.ndarray:
    """Pointwise prediction minus ground truth, valued in {-1, 0, +1}.

    +1 pixels are the over-segmentation region, -1 pixels the
    under-segmentation region.
    """
    pred = check_binary_mask(pred, "pred")
    gt = check_binary_mask(gt, "gt")
    check_same_shape(pred, gt, "pred", "gt")
    return pred.astype(np.int8) - gt.astype(np.int8)


def skeletonize(mask) -> np.ndarray:
    """Thin a binary mask to a 1-pixel-wide medial line.

    Two-subiteration parallel thinning (Zhang-Suen) on 8-connectivity:
    per subiteration every foreground pixel with 2..6 neighbors, exactly
    one 0->1 transition around its ring, and the subiteration's
    directional conditions is deleted, until no pixel changes. Output is
    always a subset of the input and the operation is idempotent.
    """
    mask = check_binary_mask(mask, "mask")
    img = np.pad(mask, 1)
    while True:
        removed_any = False
        for phase in (0, 1):
            p2 = img[:-2, 1:-1]
            p3 = img[:-2, 2:]
            p4 = img[1:-1, 2:]
            p5 = img[2:, 2:]
            p6 = img[2:, 1:-1]
            p7 = img[2:, :-2]
            p8 = img[1:-1, :-2]
            p9 = img[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9)
            neighbors = np.zeros(p2.shape, dtype=np.int8)
            for q in ring:
                neighbors += q
            transitions = np.zeros(p2.shape, dtype=np.int8)
            for k in range(8):
                transitions += ~ring[k] & ring[(k + 1) % 8]
            if phase == 0:
                directional = ~(p2 & p4 & p6) & ~(p4 & p6 & p8)
            else:
                directional = ~(p2 & p4 & p8) & ~(p2 & p6 & p8)
            remove = (
                img[1:-1, 1:-1]
                & (neighbors >= 2)
                & (neighbors <= 6)
                & (transitions == 1)
                & directional
            )
            if remove.any():
                img[1:-1, 1:-1] &= ~remove
                removed_any = True
        if not removed_any:
            return img[1:-1, 1:-1].copy()


def dilate(mask, radius: int) -> np.ndarray:
    """Dilate with a 3x3 square element applied `radius` times."""
    mask = check_binary_mask(mask, "mask")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    return ndimage.binary_dilation(mask, structure=_SQUARE3, iterations=int(radius))


def dilation_boundary(mask, radius: int) -> np.ndarray:
    """Ring of pixels gained by the `radius`-th dilation step; disjoint from the input."""
    mask = check_binary_mask(mask, "mask")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    inner = mask if radius == 1 else dilate(mask, radius - 1)
    return dilate(mask, radius) & ~inner


def render_seeds(seeds: SeedSet, height: int, width: int, sigma: float) -> SeedChannels:
    """Render seed points as per-class 2D Gaussian response maps.

    Each channel is the pointwise maximum over its seeds of
    exp(-((r - r0)^2 + (c - c0)^2) / (2 sigma^2)), so the value at a seed
    pixel is exactly 1.0 and multiple seeds never push a pixel above 1.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    fg = check_points_in_bounds(seeds.foreground, (height, width), "foreground seed")
    bg = check_points_in_bounds(seeds.background, (height, width), "background seed")
    return SeedChannels(
        fg_channel=_gaussian_channel(fg, height, width, sigma),
        bg_channel=_gaussian_channel(bg, height, width, sigma),
        sigma=float(sigma),
    )


def _gaussian_channel(points, height, width, sigma) -> np.ndarray:
    channel = np.zeros((height, width), dtype=np.float32)
    if not points:
        return channel
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    inv = 1.0 / (2.0 * sigma * sigma)
    for r0, c0 in points:
        d2 = (rows - r0) ** 2 + (cols - c0) ** 2
        np.maximum(channel, np.exp(-d2 * inv).astype(np.float32), out=channel)
    return channel


def mask_to_points(mask) -> list[tuple[int, int]]:
    """Foreground coordinates in row-major order."""
    mask = check_binary_mask(mask, "mask")
    return [(int(r), int(c)) for r, c in np.argwhere(mask)]


def label_components(mask) -> tuple[np.ndarray, int]:
    """8-connected component labeling; returns (labels, count)."""
    mask = check_binary_mask(mask, "mask")
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    return labels, int(count)
