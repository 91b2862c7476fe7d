"""Scikit-learn style wrapper around the training and inference pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .checkpoint import load_checkpoint, save_checkpoint
from .evaluator import metrics
from .imgcore import SeedSet, render_seeds
from .nets import backbone_forward, binarize, model_from_params, model_params, refine_forward
from .trainer import TrainConfig, fit
from .validation import check_image


class RefineSegmenter(BaseEstimator):
    """Seed-guided refinement segmenter for low-contrast grayscale images.

    fit(X, y) trains the backbone and refinement head jointly on a stack of
    images X (n, H, W) with binary masks y. predict(X) returns the automatic
    (backbone-only) masks; refine(X, seeds) returns seed-guided refinements.

    Parameters mirror TrainConfig; random_state pins initialization, data
    order and seed subsampling, so identical fits are bitwise reproducible.
    """

    def __init__(
        self,
        backbone: str = "unet",
        base_channels: int = 8,
        depth: int = 3,
        epochs: int = 20,
        batch_size: int = 8,
        lr: float = 1e-3,
        sigma: float = 5.0,
        supervision_weight: float = 0.5,
        threshold: float = 0.5,
        min_region: int = 4,
        max_seeds_per_class: int = 32,
        random_state: int = 0,
    ):
        self.backbone = backbone
        self.base_channels = base_channels
        self.depth = depth
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.sigma = sigma
        self.supervision_weight = supervision_weight
        self.threshold = threshold
        self.min_region = min_region
        self.max_seeds_per_class = max_seeds_per_class
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            sigma=self.sigma,
            supervision_weight=self.supervision_weight,
            threshold=self.threshold,
            rng_seed=self.random_state,
            backbone_kind=self.backbone,
            base_channels=self.base_channels,
            depth=self.depth,
            min_region=self.min_region,
            max_seeds_per_class=self.max_seeds_per_class,
        )

    def fit(self, X, y, val=None):
        X = np.asarray(X)
        y = np.asarray(y)
        if X.ndim != 3 or X.shape != y.shape:
            raise ValueError(
                f"X and y must be matching (n, H, W) stacks, got {X.shape} vs {y.shape}"
            )
        pairs = list(zip(X, y))
        self.model_, self.history_ = fit(pairs, self._train_config(), val_dataset=val)
        self.input_size_ = X.shape[1]
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this RefineSegmenter instance is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        """Backbone foreground probability per image, shape (n, H, W)."""
        self._require_fitted()
        X = np.asarray(X)
        if X.ndim == 2:
            X = X[None]
        return np.stack([backbone_forward(self.model_, img).p_full for img in X])

    def predict(self, X) -> np.ndarray:
        """Automatic (backbone-only) binary masks."""
        return binarize(self.predict_proba(X), self.threshold)

    def refine_proba(self, X, seeds: list[SeedSet]) -> np.ndarray:
        """Seed-guided refined probability per image."""
        self._require_fitted()
        X = np.asarray(X)
        if X.ndim == 2:
            X = X[None]
        if len(seeds) != len(X):
            raise ValueError(f"need one SeedSet per image, got {len(seeds)} for {len(X)}")
        out = []
        for img, seed_set in zip(X, seeds):
            img = check_image(img)
            seg = backbone_forward(self.model_, img)
            channels = render_seeds(seed_set, img.shape[0], img.shape[1], self.sigma)
            out.append(refine_forward(self.model_, seg, channels))
        return np.stack(out)

    def refine(self, X, seeds: list[SeedSet]) -> np.ndarray:
        return binarize(self.refine_proba(X, seeds), self.threshold)

    def score(self, X, y) -> float:
        """Mean Dice of the automatic masks against ground truth."""
        pred = self.predict(X)
        y = np.asarray(y)
        return float(np.mean([metrics(p, g).dice for p, g in zip(pred, y)]))

    def save(self, path) -> None:
        self._require_fitted()
        save_checkpoint(path, model_params(self.model_))

    @classmethod
    def from_checkpoint(cls, path, input_size: int = 64, **params) -> "RefineSegmenter":
        """Rebuild a fitted segmenter from a checkpoint file."""
        model = model_from_params(load_checkpoint(path), input_size)
        est = cls(
            backbone=model.config.backbone_kind,
            base_channels=model.config.base_channels,
            depth=model.config.depth,
            **params,
        )
        est.model_ = model
        est.history_ = []
        est.input_size_ = input_size
        return est
