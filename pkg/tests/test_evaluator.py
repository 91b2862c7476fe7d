import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra import numpy as hnp

from refineseg.evaluator import evaluate_volume, metrics, slice_metrics

masks_8x8 = hnp.arrays(dtype=bool, shape=(8, 8))


def test_identical_nonempty_masks_score_one():
    m = np.zeros((8, 8), bool)
    m[2:5, 2:5] = True
    rec = metrics(m, m)
    assert rec.dice == 1.0 and rec.sen == 1.0 and rec.ppv == 1.0


def test_disjoint_nonempty_masks_score_zero():
    a = np.zeros((8, 8), bool)
    b = np.zeros((8, 8), bool)
    a[0, 0] = True
    b[7, 7] = True
    rec = metrics(a, b)
    assert rec.dice == 0.0 and rec.sen == 0.0 and rec.ppv == 0.0


def test_half_overlap_fixture():
    # gt is a 4-pixel square; pred covers 2 of them plus 2 outside:
    # TP=2, FP=2, FN=2.
    gt = np.zeros((8, 8), bool)
    gt[2:4, 2:4] = True
    pred = np.zeros((8, 8), bool)
    pred[2, 2] = pred[2, 3] = True
    pred[6, 6] = pred[6, 7] = True
    rec = metrics(pred, gt)
    assert rec.dice == pytest.approx(0.5, abs=1e-12)
    assert rec.sen == pytest.approx(0.5, abs=1e-12)
    assert rec.ppv == pytest.approx(0.5, abs=1e-12)


def test_both_empty_convention():
    z = np.zeros((8, 8), bool)
    rec = metrics(z, z)
    assert (rec.dice, rec.sen, rec.ppv) == (1.0, 1.0, 1.0)


def test_empty_pred_nonempty_gt_convention():
    z = np.zeros((8, 8), bool)
    gt = z.copy()
    gt[1, 1] = True
    rec = metrics(z, gt)
    assert (rec.dice, rec.sen, rec.ppv) == (0.0, 0.0, 0.0)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="differ"):
        metrics(np.zeros((4, 4), bool), np.zeros((5, 4), bool))


@given(a=masks_8x8, b=masks_8x8)
@settings(max_examples=80, deadline=None)
def test_symmetry_properties(a, b):
    ab = metrics(a, b)
    ba = metrics(b, a)
    assert ab.dice == ba.dice
    assert ab.sen == ba.ppv
    assert ab.ppv == ba.sen


def test_volume_identical_is_one():
    vol = np.zeros((3, 8, 8), bool)
    vol[:, 2:4, 2:4] = True
    rec = evaluate_volume(vol, vol)
    assert (rec.dice, rec.sen, rec.ppv) == (1.0, 1.0, 1.0)


def test_single_slice_volume_equals_slice_metric():
    rng = np.random.default_rng(1)
    pred = rng.random((8, 8)) > 0.5
    gt = rng.random((8, 8)) > 0.5
    assert evaluate_volume(pred[None], gt[None]) == metrics(pred, gt)


def test_two_slice_pooled_dice_two_thirds():
    # One perfect slice plus one empty-pred slice of equal gt area:
    # pooled TP equals FN so dice = 2TP / (2TP + FN) = 2/3.
    gt_slice = np.zeros((8, 8), bool)
    gt_slice[2:4, 2:4] = True
    gt = np.stack([gt_slice, gt_slice])
    pred = np.stack([gt_slice, np.zeros((8, 8), bool)])
    rec = evaluate_volume(pred, gt)
    assert rec.dice == pytest.approx(2 / 3, abs=1e-12)


def test_pooled_equals_slice_metric_when_slices_identical():
    rng = np.random.default_rng(2)
    pred = rng.random((8, 8)) > 0.4
    gt = rng.random((8, 8)) > 0.6
    pooled = evaluate_volume(np.stack([pred] * 4), np.stack([gt] * 4))
    single = metrics(pred, gt)
    assert pooled.dice == pytest.approx(single.dice, abs=1e-12)
    assert pooled.sen == pytest.approx(single.sen, abs=1e-12)
    assert pooled.ppv == pytest.approx(single.ppv, abs=1e-12)


def test_slice_metrics_length_and_values():
    gt_slice = np.zeros((8, 8), bool)
    gt_slice[1:3, 1:3] = True
    gt = np.stack([gt_slice, gt_slice])
    pred = np.stack([gt_slice, np.zeros((8, 8), bool)])
    per_slice = slice_metrics(pred, gt)
    assert len(per_slice) == 2
    assert per_slice[0].dice == 1.0
    assert per_slice[1].dice == 0.0


def test_volume_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="differ"):
        evaluate_volume(np.zeros((2, 8, 8), bool), np.zeros((3, 8, 8), bool))
