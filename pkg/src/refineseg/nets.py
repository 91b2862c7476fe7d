"""Two-part refinement network: a multi-scale segmentation backbone and a seed-guided fusion head.

The backbone (small U-Net, or an FCN variant without skip connections)
emits sigmoid side outputs at 1x, 0.5x and 0.25x of the input size. The
refinement head concatenates each side output with the seed channels
resized to that scale, then merges coarse to fine with stride-2
transposed convolutions back to full resolution.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import torch
from torch import nn

from . import layers
from .imgcore import SeedChannels
from .validation import check_image

BACKBONE_KINDS = ("unet", "fcn")


@dataclass(frozen=True)
class NetConfig:
    backbone_kind: str = "unet"
    base_channels: int = 8
    depth: int = 3
    input_size: int = 64

    def __post_init__(self):
        if self.backbone_kind not in BACKBONE_KINDS:
            raise ValueError(
                f"backbone_kind must be one of {BACKBONE_KINDS}, got {self.backbone_kind!r}"
            )
        if self.base_channels < 2:
            raise ValueError(f"base_channels must be >= 2, got {self.base_channels}")
        if self.depth < 3:
            raise ValueError(f"depth must be >= 3 for the three-scale ladder, got {self.depth}")
        stride = 2 ** (self.depth - 1)
        if self.input_size % 4 != 0 or self.input_size % stride != 0 or self.input_size < 8:
            raise ValueError(
                f"input_size must be >= 8 and divisible by 4 and by {stride}, "
                f"got {self.input_size}"
            )


@dataclass
class MultiScaleSeg:
    """Initial segmentation pyramid: probability maps at 1x, 0.5x and 0.25x."""

    p_full: np.ndarray
    p_half: np.ndarray
    p_quarter: np.ndarray


class _ConvBlock(nn.Module):
    """3x3 convolution (padding 1) followed by ReLU."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)

    def forward(self, x):
        return layers.relu(self.conv(x))


class _DoubleConvBlock(nn.Module):
    """Two 3x3 conv + ReLU stages, the backbone's encoder/decoder unit."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1)

    def forward(self, x):
        return layers.relu(self.conv2(layers.relu(self.conv1(x))))


def _check_backbone_input(x: torch.Tensor, depth: int) -> None:
    if x.dim() != 4 or x.shape[1] != 1:
        raise ValueError(f"backbone input must be (N, 1, H, W), got {tuple(x.shape)}")
    stride = 2 ** (depth - 1)
    h, w = int(x.shape[2]), int(x.shape[3])
    if h % stride or w % stride or h < 8 or w < 8:
        raise ValueError(
            f"backbone input size {h}x{w} must be >= 8 and divisible by {stride}"
        )


class UNetBackbone(nn.Module):
    """Encoder-decoder with skip concatenations and three scale side outputs."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.depth = config.depth
        c = config.base_channels
        chans = [c * 2**k for k in range(config.depth)]
        self.enc = nn.ModuleList(
            [_DoubleConvBlock(1 if k == 0 else chans[k - 1], chans[k]) for k in range(config.depth)]
        )
        self.up = nn.ModuleList(
            [
                nn.ConvTranspose2d(chans[k + 1], chans[k], kernel_size=2, stride=2)
                for k in reversed(range(config.depth - 1))
            ]
        )
        self.dec = nn.ModuleList(
            [_DoubleConvBlock(2 * chans[k], chans[k]) for k in reversed(range(config.depth - 1))]
        )
        self.side_quarter = nn.Conv2d(chans[2], 1, kernel_size=1)
        self.side_half = nn.Conv2d(chans[1], 1, kernel_size=1)
        self.side_full = nn.Conv2d(chans[0], 1, kernel_size=1)

    def forward(self, x):
        _check_backbone_input(x, self.depth)
        skips = []
        feat = x
        for k, block in enumerate(self.enc):
            feat = block(feat)
            skips.append(feat)
            if k < self.depth - 1:
                feat = layers.maxpool2(feat)
        scale_feats = {self.depth - 1: feat}
        for step, (up, dec) in enumerate(zip(self.up, self.dec)):
            k = self.depth - 2 - step
            feat = dec(layers.concat_channels(up(feat), skips[k]))
            scale_feats[k] = feat
        p_quarter = layers.sigmoid(self.side_quarter(scale_feats[2]))
        p_half = layers.sigmoid(self.side_half(scale_feats[1]))
        p_full = layers.sigmoid(self.side_full(scale_feats[0]))
        return p_full, p_half, p_quarter


class FCNBackbone(nn.Module):
    """Same encoder as the U-Net variant; decoder of plain stride-2 upconvolutions."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.depth = config.depth
        c = config.base_channels
        chans = [c * 2**k for k in range(config.depth)]
        self.enc = nn.ModuleList(
            [_DoubleConvBlock(1 if k == 0 else chans[k - 1], chans[k]) for k in range(config.depth)]
        )
        self.up = nn.ModuleList(
            [
                nn.ConvTranspose2d(chans[k + 1], chans[k], kernel_size=2, stride=2)
                for k in reversed(range(config.depth - 1))
            ]
        )
        self.side_quarter = nn.Conv2d(chans[2], 1, kernel_size=1)
        self.side_half = nn.Conv2d(chans[1], 1, kernel_size=1)
        self.side_full = nn.Conv2d(chans[0], 1, kernel_size=1)

    def forward(self, x):
        _check_backbone_input(x, self.depth)
        feat = x
        for k, block in enumerate(self.enc):
            feat = block(feat)
            if k < self.depth - 1:
                feat = layers.maxpool2(feat)
        scale_feats = {self.depth - 1: feat}
        for step, up in enumerate(self.up):
            k = self.depth - 2 - step
            feat = layers.relu(up(feat))
            scale_feats[k] = feat
        p_quarter = layers.sigmoid(self.side_quarter(scale_feats[2]))
        p_half = layers.sigmoid(self.side_half(scale_feats[1]))
        p_full = layers.sigmoid(self.side_full(scale_feats[0]))
        return p_full, p_half, p_quarter


class RefinementHead(nn.Module):
    """Fuses (initial segmentation, seed channels) per scale, merges coarse to fine.

    The output is a residual correction: the final 1x1 convolution produces
    a logit offset added to the initial full-scale segmentation's logit, so
    with no seed evidence the refinement reduces to (approximately) the
    initial segmentation instead of having to relearn it.
    """

    def __init__(self, config: NetConfig):
        super().__init__()
        c = config.base_channels
        self.fuse_quarter = _ConvBlock(3, c)
        self.fuse_half = _ConvBlock(3, c)
        self.fuse_full = _ConvBlock(3, c)
        self.up_quarter_to_half = nn.ConvTranspose2d(c, c, kernel_size=2, stride=2)
        self.merge_half = _ConvBlock(2 * c, c)
        self.up_half_to_full = nn.ConvTranspose2d(c, c, kernel_size=2, stride=2)
        self.merge_full = _ConvBlock(2 * c, c)
        self.head = nn.Conv2d(c, 1, kernel_size=1)

    def forward(self, p_full, p_half, p_quarter, seed_fg, seed_bg):
        for name, t in (("p_full", p_full), ("seed_fg", seed_fg), ("seed_bg", seed_bg)):
            if t.shape != p_full.shape:
                raise ValueError(
                    f"{name} shape {tuple(t.shape)} does not match {tuple(p_full.shape)}"
                )
        h, w = int(p_full.shape[2]), int(p_full.shape[3])
        fused = []
        for p_s, (hs, ws) in (
            (p_full, (h, w)),
            (p_half, (h // 2, w // 2)),
            (p_quarter, (h // 4, w // 4)),
        ):
            if p_s.shape[2:] != (hs, ws):
                raise ValueError(
                    f"scale map shape {tuple(p_s.shape[2:])} does not match expected {(hs, ws)}"
                )
            fg_s = layers.bilinear_resize(seed_fg, hs, ws)
            bg_s = layers.bilinear_resize(seed_bg, hs, ws)
            fused.append(layers.concat_channels(layers.concat_channels(p_s, fg_s), bg_s))
        f_full = self.fuse_full(fused[0])
        f_half = self.fuse_half(fused[1])
        f_quarter = self.fuse_quarter(fused[2])
        m = self.up_quarter_to_half(f_quarter)
        m = self.merge_half(layers.concat_channels(m, f_half))
        m = self.up_half_to_full(m)
        m = self.merge_full(layers.concat_channels(m, f_full))
        base = torch.logit(p_full, eps=layers.BCE_EPS)
        return layers.sigmoid(self.head(m) + base)


class RefineNet(nn.Module):
    """Backbone and refinement head, jointly trainable."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        self.backbone = (
            UNetBackbone(config) if config.backbone_kind == "unet" else FCNBackbone(config)
        )
        self.refiner = RefinementHead(config)

    def forward_backbone(self, x):
        return self.backbone(x)

    def forward_refine(self, p_full, p_half, p_quarter, seed_fg, seed_bg):
        return self.refiner(p_full, p_half, p_quarter, seed_fg, seed_bg)

    def forward(self, x, seed_fg, seed_bg):
        p_full, p_half, p_quarter = self.forward_backbone(x)
        refined = self.forward_refine(p_full, p_half, p_quarter, seed_fg, seed_bg)
        return refined, (p_full, p_half, p_quarter)


def _init_parameters(model: nn.Module, rng_seed: int) -> None:
    # Kaiming-uniform fan-in weights, zero biases, from a private generator
    # so two builds with the same seed are bitwise identical.
    gen = torch.Generator().manual_seed(int(rng_seed))
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            fan_in = module.weight.shape[1] * module.weight.shape[2] * module.weight.shape[3]
        elif isinstance(module, nn.ConvTranspose2d):
            fan_in = module.weight.shape[0] * module.weight.shape[2] * module.weight.shape[3]
        else:
            continue
        bound = math.sqrt(6.0 / fan_in)
        with torch.no_grad():
            sample = torch.rand(module.weight.shape, generator=gen, dtype=torch.float32)
            module.weight.copy_((sample * 2.0 - 1.0) * bound)
            if module.bias is not None:
                module.bias.zero_()


def build_model(config: NetConfig, rng_seed: int = 0) -> RefineNet:
    """Construct a RefineNet with deterministic seeded initialization."""
    model = RefineNet(config)
    _init_parameters(model, rng_seed)
    return model


def image_to_tensor(image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(image)).to(dtype).unsqueeze(0).unsqueeze(0)


def backbone_forward(model: RefineNet, image) -> MultiScaleSeg:
    """Initial segmentation pyramid for one image at the configured size."""
    image = check_image(image)
    s = model.config.input_size
    if image.shape != (s, s):
        raise ValueError(f"image shape {image.shape} does not match model input size {s}x{s}")
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        p_full, p_half, p_quarter = model.forward_backbone(image_to_tensor(image, dtype))
    return MultiScaleSeg(
        p_full=p_full[0, 0].numpy().astype(np.float32),
        p_half=p_half[0, 0].numpy().astype(np.float32),
        p_quarter=p_quarter[0, 0].numpy().astype(np.float32),
    )


def refine_forward(model: RefineNet, seg: MultiScaleSeg, channels: SeedChannels) -> np.ndarray:
    """Refined probability map at the input image size."""
    s = model.config.input_size
    expected = {
        "p_full": (s, s),
        "p_half": (s // 2, s // 2),
        "p_quarter": (s // 4, s // 4),
        "fg_channel": (s, s),
        "bg_channel": (s, s),
    }
    arrays = {
        "p_full": seg.p_full,
        "p_half": seg.p_half,
        "p_quarter": seg.p_quarter,
        "fg_channel": channels.fg_channel,
        "bg_channel": channels.bg_channel,
    }
    for name, arr in arrays.items():
        if np.asarray(arr).shape != expected[name]:
            raise ValueError(
                f"{name} shape {np.asarray(arr).shape} does not match expected {expected[name]}"
            )
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        refined = model.forward_refine(
            image_to_tensor(seg.p_full, dtype),
            image_to_tensor(seg.p_half, dtype),
            image_to_tensor(seg.p_quarter, dtype),
            image_to_tensor(channels.fg_channel, dtype),
            image_to_tensor(channels.bg_channel, dtype),
        )
    return refined[0, 0].numpy().astype(np.float32)


def binarize(p, threshold: float = 0.5) -> np.ndarray:
    """Threshold a probability map; ties (p == threshold) count as foreground."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    p = np.asarray(p)
    return p >= threshold


def difficulty_map(p) -> np.ndarray:
    """Per-pixel uncertainty 1 - |2p - 1|: 1 at p = 0.5, 0 at confident pixels."""
    p = np.asarray(p, dtype=np.float32)
    return 1.0 - np.abs(2.0 * p - 1.0)


def model_params(model: RefineNet) -> "OrderedDict[str, np.ndarray]":
    """Named parameter map in stable registration order, as float32 arrays."""
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, tensor in model.state_dict().items():
        out[name] = tensor.detach().cpu().numpy().astype(np.float32)
    return out


def config_from_params(params: Mapping[str, np.ndarray], input_size: int = 64) -> NetConfig:
    """Recover the architecture from parameter names and shapes."""
    kind = "unet" if any(k.startswith("backbone.dec.") for k in params) else "fcn"
    enc_indices = [
        int(k.split(".")[2]) for k in params if k.startswith("backbone.enc.") and k.endswith(".conv1.weight")
    ]
    if not enc_indices or "backbone.enc.0.conv1.weight" not in params:
        raise ValueError("parameter map does not contain a recognizable backbone")
    depth = max(enc_indices) + 1
    base_channels = int(params["backbone.enc.0.conv1.weight"].shape[0])
    return NetConfig(
        backbone_kind=kind, base_channels=base_channels, depth=depth, input_size=input_size
    )


def model_from_params(params: Mapping[str, np.ndarray], input_size: int = 64) -> RefineNet:
    """Rebuild a model from a named parameter map (e.g. a loaded checkpoint)."""
    config = config_from_params(params, input_size)
    model = RefineNet(config)
    state = {k: torch.from_numpy(np.ascontiguousarray(v)) for k, v in params.items()}
    model.load_state_dict(state)
    return model
