"""Input validation helpers shared across the package."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MIN_SIDE = 8


def check_image(arr, name: str = "image") -> np.ndarray:
    """Validate a 2D grayscale image with intensities in [0, 1]."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    h, w = arr.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise ValueError(f"{name} must be at least {MIN_SIDE}x{MIN_SIDE}, got {h}x{w}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"{name} intensities must lie in [0, 1], got range "
            f"[{arr.min():.4g}, {arr.max():.4g}]"
        )
    return arr


def check_binary_mask(arr, name: str = "mask") -> np.ndarray:
    """Validate a 2D binary mask and return it as a bool array."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr
    uniq = np.unique(arr)
    if not np.isin(uniq, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values, got {uniq[:8]}")
    return arr.astype(bool)


def check_same_shape(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if a.shape != b.shape:
        raise ValueError(
            f"{name_a} and {name_b} shapes differ: {a.shape} vs {b.shape}"
        )


def check_points_in_bounds(
    points: Iterable[Sequence[int]], shape: tuple[int, int], name: str = "seeds"
) -> list[tuple[int, int]]:
    """Validate (row, col) coordinates against an image shape."""
    h, w = shape
    out = []
    for p in points:
        r, c = int(p[0]), int(p[1])
        if not (0 <= r < h and 0 <= c < w):
            raise ValueError(
                f"{name} coordinate ({r}, {c}) is out of bounds for shape {h}x{w}"
            )
        out.append((r, c))
    return out


def check_volume(vol, name: str = "volume", kind: str = "image") -> np.ndarray:
    """Validate a stack of slices shaped (n_slices, H, W)."""
    if isinstance(vol, (list, tuple)):
        vol = np.stack([np.asarray(s) for s in vol], axis=0)
    else:
        vol = np.asarray(vol)
    if vol.ndim != 3 or vol.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty stack of 2D slices, got shape {vol.shape}")
    if kind == "image":
        for i in range(vol.shape[0]):
            check_image(vol[i], f"{name}[{i}]")
        return vol.astype(np.float32) if not np.issubdtype(vol.dtype, np.floating) else vol
    out = np.empty(vol.shape, dtype=bool)
    for i in range(vol.shape[0]):
        out[i] = check_binary_mask(vol[i], f"{name}[{i}]")
    return out
