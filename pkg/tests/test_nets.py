import numpy as np
import pytest
import torch

from refineseg import layers
from refineseg.imgcore import SeedSet, render_seeds
from refineseg.nets import (
    NetConfig,
    backbone_forward,
    binarize,
    build_model,
    config_from_params,
    difficulty_map,
    model_from_params,
    model_params,
    refine_forward,
)


def _image(size=64, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((size, size), dtype=np.float32)


class TestNetConfig:
    def test_defaults_valid(self):
        cfg = NetConfig()
        assert cfg.backbone_kind == "unet"
        assert cfg.base_channels == 8
        assert cfg.depth == 3
        assert cfg.input_size == 64

    def test_unknown_backbone_rejected(self):
        with pytest.raises(ValueError, match="backbone_kind"):
            NetConfig(backbone_kind="resnet")

    def test_small_base_channels_rejected(self):
        with pytest.raises(ValueError, match="base_channels"):
            NetConfig(base_channels=1)

    def test_shallow_depth_rejected(self):
        with pytest.raises(ValueError, match="depth"):
            NetConfig(depth=2)

    def test_input_size_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            NetConfig(input_size=62)
        with pytest.raises(ValueError, match="divisible"):
            NetConfig(depth=4, input_size=68)


@pytest.mark.parametrize("kind", ["unet", "fcn"])
class TestBackboneForward:
    def test_scale_ladder_64(self, kind):
        model = build_model(NetConfig(backbone_kind=kind), rng_seed=0)
        seg = backbone_forward(model, _image(64))
        assert seg.p_full.shape == (64, 64)
        assert seg.p_half.shape == (32, 32)
        assert seg.p_quarter.shape == (16, 16)

    def test_outputs_in_unit_interval(self, kind):
        model = build_model(NetConfig(backbone_kind=kind), rng_seed=1)
        seg = backbone_forward(model, _image(64, seed=5))
        for p in (seg.p_full, seg.p_half, seg.p_quarter):
            assert p.min() >= 0.0 and p.max() <= 1.0

    def test_repeat_calls_identical(self, kind):
        model = build_model(NetConfig(backbone_kind=kind), rng_seed=2)
        img = _image(64, seed=6)
        a = backbone_forward(model, img)
        b = backbone_forward(model, img)
        assert np.array_equal(a.p_full, b.p_full)
        assert np.array_equal(a.p_half, b.p_half)
        assert np.array_equal(a.p_quarter, b.p_quarter)

    def test_size_mismatch_rejected(self, kind):
        model = build_model(NetConfig(backbone_kind=kind), rng_seed=0)
        with pytest.raises(ValueError, match="input size"):
            backbone_forward(model, _image(32))

    def test_other_valid_input_size(self, kind):
        model = build_model(NetConfig(backbone_kind=kind, input_size=32), rng_seed=0)
        seg = backbone_forward(model, _image(32, seed=7))
        assert seg.p_full.shape == (32, 32)
        assert seg.p_quarter.shape == (8, 8)


class TestRefineForward:
    def test_output_matches_input_size(self):
        model = build_model(NetConfig(), rng_seed=3)
        seg = backbone_forward(model, _image(64, seed=8))
        channels = render_seeds(SeedSet(foreground=[(10, 10)]), 64, 64, 5.0)
        refined = refine_forward(model, seg, channels)
        assert refined.shape == (64, 64)
        assert refined.min() >= 0.0 and refined.max() <= 1.0

    def test_zero_seed_channels_still_valid(self):
        model = build_model(NetConfig(), rng_seed=3)
        seg = backbone_forward(model, _image(64, seed=9))
        channels = render_seeds(SeedSet(), 64, 64, 5.0)
        refined = refine_forward(model, seg, channels)
        assert refined.shape == (64, 64)
        assert np.isfinite(refined).all()

    def test_shape_mismatch_rejected(self):
        model = build_model(NetConfig(), rng_seed=3)
        seg = backbone_forward(model, _image(64, seed=10))
        bad = render_seeds(SeedSet(), 32, 32, 5.0)
        with pytest.raises(ValueError, match="fg_channel"):
            refine_forward(model, seg, bad)

    def test_gradient_reaches_backbone_parameters(self):
        # Joint-training connectivity: the refined loss must move the backbone.
        model = build_model(NetConfig(input_size=16), rng_seed=4)
        x = torch.rand(1, 1, 16, 16, generator=torch.Generator().manual_seed(0))
        gt = (torch.rand(1, 1, 16, 16, generator=torch.Generator().manual_seed(1)) > 0.5).float()
        fg = torch.zeros(1, 1, 16, 16)
        bg = torch.zeros(1, 1, 16, 16)
        refined, _ = model(x, fg, bg)
        loss = layers.bce_loss(refined, gt)
        loss.backward()
        grads = [
            p.grad.abs().sum().item()
            for name, p in model.named_parameters()
            if name.startswith("backbone.")
        ]
        assert any(g > 0 for g in grads)


class TestBinarize:
    def test_high_map_is_all_ones(self):
        assert binarize(np.full((4, 4), 0.9), 0.5).all()

    def test_low_map_is_all_zeros(self):
        assert not binarize(np.full((4, 4), 0.1), 0.5).any()

    def test_tie_counts_as_foreground(self):
        assert binarize(np.full((2, 2), 0.5), 0.5).all()

    def test_threshold_range_enforced(self):
        with pytest.raises(ValueError, match="threshold"):
            binarize(np.zeros((2, 2)), 1.0)
        with pytest.raises(ValueError, match="threshold"):
            binarize(np.zeros((2, 2)), 0.0)


class TestDifficultyMap:
    def test_maximal_at_half(self):
        assert (difficulty_map(np.full((3, 3), 0.5)) == 1.0).all()

    def test_zero_at_confident_pixels(self):
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert (difficulty_map(p) == 0.0).all()

    def test_formula_value(self):
        assert difficulty_map(np.array([[0.75]]))[0, 0] == pytest.approx(0.5)


class TestParamsRoundTrip:
    @pytest.mark.parametrize("kind", ["unet", "fcn"])
    def test_config_inferred_from_params(self, kind):
        cfg = NetConfig(backbone_kind=kind, base_channels=4, depth=3, input_size=32)
        params = model_params(build_model(cfg, rng_seed=5))
        inferred = config_from_params(params, input_size=32)
        assert inferred == cfg

    def test_forward_identical_after_round_trip(self):
        model = build_model(NetConfig(input_size=32), rng_seed=6)
        rebuilt = model_from_params(model_params(model), input_size=32)
        img = _image(32, seed=11)
        a = backbone_forward(model, img)
        b = backbone_forward(rebuilt, img)
        assert np.array_equal(a.p_full, b.p_full)

    def test_depth_four_ladder(self):
        model = build_model(NetConfig(depth=4, input_size=64), rng_seed=7)
        seg = backbone_forward(model, _image(64, seed=12))
        assert seg.p_full.shape == (64, 64)
        assert seg.p_half.shape == (32, 32)
        assert seg.p_quarter.shape == (16, 16)

    def test_same_seed_same_init(self):
        a = model_params(build_model(NetConfig(), rng_seed=9))
        b = model_params(build_model(NetConfig(), rng_seed=9))
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_different_seed_different_init(self):
        a = model_params(build_model(NetConfig(), rng_seed=9))
        b = model_params(build_model(NetConfig(), rng_seed=10))
        assert any(not np.array_equal(a[k], b[k]) for k in a)
