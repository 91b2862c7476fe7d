"""Overlap metrics (Dice, sensitivity, positive predictive value) over pixel counts."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .validation import check_binary_mask, check_same_shape, check_volume


@dataclass(frozen=True)
class MetricsRecord:
    dice: float
    sen: float
    ppv: float

    def as_dict(self) -> dict:
        return asdict(self)


def _from_counts(tp: int, fp: int, fn: int) -> MetricsRecord:
    # Both masks empty: perfect agreement by convention. A zero
    # denominator with any disagreement scores 0.
    if tp + fp + fn == 0:
        return MetricsRecord(1.0, 1.0, 1.0)
    dice = 2.0 * tp / (2.0 * tp + fp + fn)
    sen = tp / (tp + fn) if tp + fn else 0.0
    ppv = tp / (tp + fp) if tp + fp else 0.0
    return MetricsRecord(dice, sen, ppv)


def metrics(pred, gt) -> MetricsRecord:
    """Pixel-count Dice, SEN and PPV of a predicted mask against ground truth."""
    pred = check_binary_mask(pred, "pred")
    gt = check_binary_mask(gt, "gt")
    check_same_shape(pred, gt, "pred", "gt")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return _from_counts(tp, fp, fn)


def evaluate_volume(pred_vol, gt_vol) -> MetricsRecord:
    """Metrics over all voxels of a slice stack, pooled into one count set."""
    pred_vol = check_volume(pred_vol, "pred", kind="mask")
    gt_vol = check_volume(gt_vol, "gt", kind="mask")
    if pred_vol.shape != gt_vol.shape:
        raise ValueError(
            f"pred and gt volume shapes differ: {pred_vol.shape} vs {gt_vol.shape}"
        )
    tp = int(np.count_nonzero(pred_vol & gt_vol))
    fp = int(np.count_nonzero(pred_vol & ~gt_vol))
    fn = int(np.count_nonzero(~pred_vol & gt_vol))
    return _from_counts(tp, fp, fn)


def slice_metrics(pred_vol, gt_vol) -> list[MetricsRecord]:
    """Per-slice metrics of two mask volumes."""
    pred_vol = check_volume(pred_vol, "pred", kind="mask")
    gt_vol = check_volume(gt_vol, "gt", kind="mask")
    if pred_vol.shape != gt_vol.shape:
        raise ValueError(
            f"pred and gt volume shapes differ: {pred_vol.shape} vs {gt_vol.shape}"
        )
    return [metrics(p, g) for p, g in zip(pred_vol, gt_vol)]
