"""Command line interface: gen-data, train, eval, propagate, serve."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .evaluator import evaluate_volume, slice_metrics
from .fileio import read_raster, read_volume, write_raster, write_volume
from .nets import model_from_params, model_params
from .phantoms import make_dataset, make_phantom_volume
from .propagator import PropagateConfig, propagate
from .trainer import TrainConfig, fit


def _load_pairs(data_dir: Path) -> list[tuple[np.ndarray, np.ndarray]]:
    images_dir = data_dir / "images"
    masks_dir = data_dir / "masks"
    if not images_dir.is_dir() or not masks_dir.is_dir():
        raise FileNotFoundError(f"{data_dir} must contain images/ and masks/ directories")
    pairs = []
    for img_path in sorted(images_dir.glob("*.img")):
        mask_path = masks_dir / (img_path.stem + ".msk")
        if not mask_path.exists():
            raise FileNotFoundError(f"no mask for {img_path.name}: expected {mask_path}")
        pairs.append((read_raster(img_path), read_raster(mask_path)))
    if not pairs:
        raise FileNotFoundError(f"no .img files found in {images_dir}")
    return pairs


def _cmd_gen_data(args) -> int:
    out = Path(args.out)
    if args.slices > 0:
        for i in range(args.count):
            vol, masks = make_phantom_volume(args.seed + i, args.size, args.slices)
            write_volume(out / "volumes" / f"vol_{i:04d}", vol)
            write_volume(out / "labels" / f"vol_{i:04d}", masks)
        print(f"wrote {args.count} volumes of {args.slices} slices to {out}")
    else:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "masks").mkdir(parents=True, exist_ok=True)
        for i, (image, mask) in enumerate(make_dataset(args.seed, args.count, args.size)):
            write_raster(out / "images" / f"sample_{i:04d}.img", image)
            write_raster(out / "masks" / f"sample_{i:04d}.msk", mask)
        print(f"wrote {args.count} image/mask pairs to {out}")
    return 0


def _cmd_train(args) -> int:
    pairs = _load_pairs(Path(args.data))
    val = _load_pairs(Path(args.val_data)) if args.val_data else None
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        sigma=args.sigma,
        supervision_weight=args.supervision_weight,
        threshold=args.threshold,
        rng_seed=args.seed,
        backbone_kind=args.backbone,
        base_channels=args.base_channels,
        depth=args.depth,
    )
    model, history = fit(pairs, config, val_dataset=val)
    for entry in history:
        print(json.dumps(entry))
    save_checkpoint(args.out, model_params(model))
    print(f"saved checkpoint to {args.out}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    pred = read_volume(args.pred)
    gt = read_volume(args.gt)
    pooled = evaluate_volume(pred, gt)
    per_slice = [m.as_dict() for m in slice_metrics(pred, gt)]
    report = {**pooled.as_dict(), "per_slice": per_slice}
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(pooled.as_dict()))
    return 0


def _cmd_propagate(args) -> int:
    volume = read_volume(args.volume)
    ref_mask = read_raster(args.ref_mask)
    if ref_mask.dtype != bool:
        raise ValueError(f"{args.ref_mask} is not a mask raster")
    model = model_from_params(load_checkpoint(args.ckpt), input_size=volume.shape[1])
    config = PropagateConfig(
        sigma=args.sigma,
        dilation_radius=args.radius,
        threshold=args.threshold,
    )
    result = propagate(model, volume, args.ref_index, ref_mask, config)
    write_volume(args.out, result)
    print(f"wrote {result.shape[0]} mask slices to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = model_from_params(load_checkpoint(args.ckpt), input_size=args.input_size)
    app = create_app(model, sigma=args.sigma, threshold=args.threshold)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refineseg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic phantom data")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--slices", type=int, default=0, help="if > 0, generate volumes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train on an images/masks directory")
    p.add_argument("--data", required=True)
    p.add_argument("--val-data", default=None)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--backbone", choices=("unet", "fcn"), default="unet")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--supervision-weight", type=float, default=0.5)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--base-channels", type=int, default=8)
    p.add_argument("--depth", type=int, default=3)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True, help="metrics JSON output path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("propagate", help="slice-by-slice volume segmentation")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--volume", required=True)
    p.add_argument("--ref-index", type=int, required=True)
    p.add_argument("--ref-mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--radius", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--input-size", type=int, default=64)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
