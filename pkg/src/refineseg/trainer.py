"""Joint training of backbone and refinement head with per-step automatic seeds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from . import layers
from .evaluator import metrics
from .imgcore import SeedSet, render_seeds
from .nets import (
    NetConfig,
    RefineNet,
    backbone_forward,
    binarize,
    build_model,
    refine_forward,
)
from .seedgen import generate_training_seeds, subsample_seeds
from .validation import check_binary_mask, check_image

_STEP_SEED_STRIDE = 100003


class TrainingDivergedError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr: float = 1e-3
    sigma: float = 5.0
    supervision_weight: float = 0.5
    threshold: float = 0.5
    rng_seed: int = 0
    backbone_kind: str = "unet"
    base_channels: int = 8
    depth: int = 3
    min_region: int = 4
    max_seeds_per_class: int = 32
    eval_seeds_per_class: int = 8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.supervision_weight < 0:
            raise ValueError(
                f"supervision_weight must be >= 0, got {self.supervision_weight}"
            )
        if self.eval_seeds_per_class < 1:
            raise ValueError(
                f"eval_seeds_per_class must be >= 1, got {self.eval_seeds_per_class}"
            )


def _as_batch(images, gts) -> tuple[np.ndarray, np.ndarray]:
    images = np.asarray(images)
    gts = np.asarray(gts)
    if images.ndim == 2:
        images = images[None]
        gts = gts[None]
    if images.ndim != 3 or images.shape != gts.shape:
        raise ValueError(
            f"need matching (N, H, W) images and masks, got {images.shape} vs {gts.shape}"
        )
    return images, gts


def training_loss(model: RefineNet, x, gt, seed_fg, seed_bg, supervision_weight: float):
    """Refined-output BCE plus weighted side-output BCE at each scale.

    Ground truth for the coarser scales is obtained by repeated 2x block
    max-pooling, which keeps thin structures present at reduced size.
    """
    p_full, p_half, p_quarter = model.forward_backbone(x)
    refined = model.forward_refine(p_full, p_half, p_quarter, seed_fg, seed_bg)
    gt_half = layers.maxpool2(gt)
    gt_quarter = layers.maxpool2(gt_half)
    side = (
        layers.bce_loss(p_full, gt)
        + layers.bce_loss(p_half, gt_half)
        + layers.bce_loss(p_quarter, gt_quarter)
    )
    return layers.bce_loss(refined, gt) + supervision_weight * side


def train_step(
    model: RefineNet,
    optimizer: torch.optim.Optimizer,
    images,
    gts,
    config: TrainConfig,
    step_index: int = 0,
) -> tuple[float, list[SeedSet]]:
    """One joint optimizer update from a (batch of) image/mask pair(s).

    The backbone's full-scale output is binarized and compared with ground
    truth to auto-generate this step's seeds; seed construction is pure
    input preparation and carries no gradient. The update then descends the
    combined refined + side-output loss through all parameters at once.
    """
    images, gts = _as_batch(images, gts)
    size = images.shape[1]
    x = torch.from_numpy(np.ascontiguousarray(images)).float().unsqueeze(1)
    gt_t = torch.from_numpy(gts.astype(np.float32)).unsqueeze(1)

    with torch.no_grad():
        p_full_frozen, _, _ = model.forward_backbone(x)

    seeds_used: list[SeedSet] = []
    fg = np.zeros((len(images), 1, size, size), dtype=np.float32)
    bg = np.zeros_like(fg)
    for i in range(len(images)):
        pred = binarize(p_full_frozen[i, 0].numpy(), config.threshold)
        seeds = generate_training_seeds(pred, gts[i].astype(bool), config.min_region)
        seeds = subsample_seeds(
            seeds,
            config.max_seeds_per_class,
            rng_seed=config.rng_seed + _STEP_SEED_STRIDE * step_index + i,
        )
        channels = render_seeds(seeds, size, size, config.sigma)
        fg[i, 0] = channels.fg_channel
        bg[i, 0] = channels.bg_channel
        seeds_used.append(seeds)

    loss = training_loss(
        model, x, gt_t, torch.from_numpy(fg), torch.from_numpy(bg), config.supervision_weight
    )
    if not torch.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss at step {step_index}: {loss.item()}")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item()), seeds_used


def evaluate_with_oracle_seeds(
    model: RefineNet, pairs: Sequence[tuple[np.ndarray, np.ndarray]], config: TrainConfig
) -> tuple[list[float], list[float]]:
    """Backbone-only and seed-refined Dice per pair, seeding from ground truth.

    Mirrors the training-time seed path: disagreement between the
    binarized initial segmentation and ground truth produces the seeds
    handed to the refinement head. Seeds are capped per class at
    config.eval_seeds_per_class, a deliberately small budget modeling the
    correction effort a user would realistically spend.
    """
    dice_backbone: list[float] = []
    dice_refined: list[float] = []
    for i, (image, gt) in enumerate(pairs):
        gt = check_binary_mask(gt, "gt")
        seg = backbone_forward(model, image)
        pred = binarize(seg.p_full, config.threshold)
        seeds = generate_training_seeds(pred, gt, config.min_region)
        seeds = subsample_seeds(seeds, config.eval_seeds_per_class, rng_seed=i)
        channels = render_seeds(seeds, gt.shape[0], gt.shape[1], config.sigma)
        refined = binarize(refine_forward(model, seg, channels), config.threshold)
        dice_backbone.append(metrics(pred, gt).dice)
        dice_refined.append(metrics(refined, gt).dice)
    return dice_backbone, dice_refined


def fit(
    dataset: Sequence[tuple[np.ndarray, np.ndarray]],
    config: TrainConfig = TrainConfig(),
    val_dataset: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
) -> tuple[RefineNet, list[dict]]:
    """Train on (image, mask) pairs; returns the model and per-epoch history.

    History entries carry the epoch's mean step loss and validation Dice of
    the backbone alone versus the seed-refined output (on `val_dataset`, or
    on the training set when no validation split is given). The whole run
    is deterministic for a fixed config.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must not be empty")
    first = check_image(dataset[0][0], "dataset[0] image")
    if first.shape[0] != first.shape[1]:
        raise ValueError(f"training images must be square, got {first.shape}")
    size = first.shape[0]
    for i, (image, gt) in enumerate(dataset):
        image = check_image(image, f"dataset[{i}] image")
        gt = check_binary_mask(gt, f"dataset[{i}] mask")
        if image.shape != (size, size) or gt.shape != (size, size):
            raise ValueError(
                f"dataset[{i}] shape {image.shape}/{gt.shape} does not match {size}x{size}"
            )

    net_config = NetConfig(
        backbone_kind=config.backbone_kind,
        base_channels=config.base_channels,
        depth=config.depth,
        input_size=size,
    )
    model = build_model(net_config, config.rng_seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr, betas=(0.9, 0.999), eps=1e-8
    )
    order_rng = np.random.default_rng(config.rng_seed)
    eval_pairs = dataset if val_dataset is None else val_dataset

    history: list[dict] = []
    step_index = 0
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        order = order_rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            images = np.stack([np.asarray(dataset[j][0], dtype=np.float32) for j in batch])
            gts = np.stack([np.asarray(dataset[j][1], dtype=bool) for j in batch])
            loss, _ = train_step(model, optimizer, images, gts, config, step_index)
            losses.append(loss)
            step_index += 1
        dice_backbone, dice_refined = evaluate_with_oracle_seeds(model, eval_pairs, config)
        history.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "dice_backbone": float(np.mean(dice_backbone)),
                "dice_refined": float(np.mean(dice_refined)),
            }
        )
    return model, history
