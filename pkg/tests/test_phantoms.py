import numpy as np
import pytest

from refineseg.evaluator import metrics
from refineseg.phantoms import (
    MAX_CONTRAST_GAP,
    _sample_intensities,
    make_dataset,
    make_phantom,
    make_phantom_volume,
)


def test_same_seed_is_deterministic():
    a_img, a_mask = make_phantom(123)
    b_img, b_mask = make_phantom(123)
    assert np.array_equal(a_img, b_img)
    assert np.array_equal(a_mask, b_mask)


def test_different_seeds_differ():
    a_img, _ = make_phantom(1)
    b_img, _ = make_phantom(2)
    assert not np.array_equal(a_img, b_img)


def test_intensities_clamped_to_unit_interval():
    for seed in range(20):
        img, _ = make_phantom(seed)
        assert img.min() >= 0.0 and img.max() <= 1.0


def test_mask_fraction_sweep():
    # The generator must always label between 5% and 40% of pixels.
    for seed in range(1000):
        _, mask = make_phantom(seed)
        frac = mask.mean()
        assert 0.05 <= frac <= 0.40, f"seed {seed}: fraction {frac:.3f}"


def test_contrast_gap_bounded():
    for seed in range(200):
        rng = np.random.default_rng(seed)
        mu_t, mu_d = _sample_intensities(rng)
        assert abs(mu_t - mu_d) <= MAX_CONTRAST_GAP + 1e-12


def test_invalid_size_rejected():
    with pytest.raises(ValueError, match="divisible by 4"):
        make_phantom(0, size=63)


def test_volume_determinism_and_shape():
    vol_a, masks_a = make_phantom_volume(5, 64, 5)
    vol_b, masks_b = make_phantom_volume(5, 64, 5)
    assert vol_a.shape == (5, 64, 64)
    assert masks_a.shape == (5, 64, 64)
    assert np.array_equal(vol_a, vol_b)
    assert np.array_equal(masks_a, masks_b)


def test_volume_minimum_three_slices():
    vol, masks = make_phantom_volume(9, 64, 3)
    assert vol.shape[0] == 3
    with pytest.raises(ValueError, match="n_slices"):
        make_phantom_volume(9, 64, 2)


def test_adjacent_slices_are_coherent():
    for seed in (0, 1, 2, 3, 4):
        _, masks = make_phantom_volume(seed, 64, 9)
        for j in range(1, masks.shape[0]):
            dice = metrics(masks[j - 1], masks[j]).dice
            assert dice >= 0.8, f"seed {seed}, slice {j}: adjacent dice {dice:.3f}"


def test_dataset_uses_consecutive_seeds():
    data = make_dataset(10, 3)
    img1, _ = make_phantom(11)
    assert np.array_equal(data[1][0], img1)
