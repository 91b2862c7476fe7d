"""Differentiable layer ops with shape validation, and a finite-difference gradient checker.

Thin validated wrappers over torch functional kernels. All activations are
NCHW; the transposed convolution follows a fixed 2x2-kernel stride-2
convention so it exactly doubles spatial extent.
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import torch
import torch.nn.functional as F

BCE_EPS = 1e-7


def _check_nchw(x: torch.Tensor, name: str) -> None:
    if x.dim() != 4:
        raise ValueError(f"{name} must be NCHW, got shape {tuple(x.shape)}")


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> torch.Tensor:
    """Cross-correlation; output side = floor((H + 2*padding - kH)/stride) + 1."""
    _check_nchw(x, "input")
    _check_nchw(weight, "weight")
    if stride < 1 or padding < 0:
        raise ValueError(f"need stride >= 1 and padding >= 0, got {stride}, {padding}")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(
            f"input channels {x.shape[1]} do not match weight in-channels {weight.shape[1]}"
        )
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ValueError(
            f"bias shape {tuple(bias.shape)} does not match out-channels {weight.shape[0]}"
        )
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def transposed_conv2d(x, weight, bias=None, stride: int = 2) -> torch.Tensor:
    """Adjoint of conv2d; weight is (in, out, kH, kW). With kernel = stride and
    no padding the spatial extent is multiplied exactly by the stride."""
    _check_nchw(x, "input")
    _check_nchw(weight, "weight")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if x.shape[1] != weight.shape[0]:
        raise ValueError(
            f"input channels {x.shape[1]} do not match weight in-channels {weight.shape[0]}"
        )
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ValueError(
            f"bias shape {tuple(bias.shape)} does not match out-channels {weight.shape[1]}"
        )
    return F.conv_transpose2d(x, weight, bias, stride=stride)


def maxpool2(x) -> torch.Tensor:
    """2x2 max pooling with stride 2."""
    _check_nchw(x, "input")
    return F.max_pool2d(x, kernel_size=2)


def relu(x) -> torch.Tensor:
    return F.relu(x)


def sigmoid(x) -> torch.Tensor:
    return torch.sigmoid(x)


def concat_channels(a, b) -> torch.Tensor:
    _check_nchw(a, "a")
    _check_nchw(b, "b")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(
            f"cannot concat channels of shapes {tuple(a.shape)} and {tuple(b.shape)}"
        )
    return torch.cat((a, b), dim=1)


def bilinear_resize(x, height: int, width: int) -> torch.Tensor:
    _check_nchw(x, "input")
    if height < 1 or width < 1:
        raise ValueError(f"target size must be positive, got {height}x{width}")
    if x.shape[2] == height and x.shape[3] == width:
        return x
    return F.interpolate(x, size=(height, width), mode="bilinear", align_corners=False)


def bce_loss(pred, target) -> torch.Tensor:
    """Mean binary cross-entropy with predictions clamped to [eps, 1 - eps]."""
    if pred.shape != target.shape:
        raise ValueError(
            f"pred and target shapes differ: {tuple(pred.shape)} vs {tuple(target.shape)}"
        )
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log1p(-p)).mean()


def grad_check(
    f: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    probes: int = 50,
    step: float = 1e-5,
    rng_seed: int = 0,
) -> float:
    """Max relative error between analytic gradients and central differences.

    `f` must recompute the scalar loss from the current values of `params`,
    whose tensors must be float64 leaves with requires_grad. `probes`
    coordinates are sampled uniformly over all parameter entries; each is
    perturbed by +-step for the two-sided difference. Relative error uses a
    small denominator floor so near-zero gradient pairs compare absolutely.

    The default step balances float64 truncation/roundoff (~1e-8 combined)
    against the chance of straddling a ReLU or max-pool kink, which inflates
    the estimate by orders of magnitude when it happens.
    """
    if probes < 1:
        raise ValueError(f"probes must be >= 1, got {probes}")
    names = list(params)
    tensors = [params[n] for n in names]
    for n, t in zip(names, tensors):
        if t.dtype != torch.float64:
            raise ValueError(f"gradient check requires float64 params, {n} is {t.dtype}")
        if not t.requires_grad:
            raise ValueError(f"parameter {n} does not require grad")
        if t.grad is not None:
            t.grad = None
    loss = f()
    loss.backward()
    grads = []
    for n, t in zip(names, tensors):
        g = torch.zeros_like(t) if t.grad is None else t.grad.detach().clone()
        if not torch.isfinite(g).all():
            raise ValueError(f"non-finite analytic gradient in parameter {n}")
        grads.append(g)

    sizes = np.array([t.numel() for t in tensors])
    total = int(sizes.sum())
    rng = np.random.default_rng(rng_seed)
    flat_indices = rng.choice(total, size=min(probes, total), replace=False)
    offsets = np.cumsum(sizes) - sizes

    worst = 0.0
    with torch.no_grad():
        for flat in flat_indices:
            which = int(np.searchsorted(offsets, flat, side="right") - 1)
            local = int(flat - offsets[which])
            t = tensors[which]
            view = t.view(-1)
            original = view[local].item()
            view[local] = original + step
            f_plus = float(f())
            view[local] = original - step
            f_minus = float(f())
            view[local] = original
            fd = (f_plus - f_minus) / (2.0 * step)
            an = float(grads[which].view(-1)[local])
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-3)
            worst = max(worst, rel)
    return worst
