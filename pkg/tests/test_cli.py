import json

import numpy as np
import pytest

from refineseg.checkpoint import load_checkpoint
from refineseg.cli import main
from refineseg.fileio import read_raster, read_volume, write_raster
from refineseg.nets import model_from_params


def test_gen_data_writes_pairs(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen-data", "--out", str(out), "--count", "3", "--size", "32"]) == 0
    assert sorted(p.name for p in (out / "images").iterdir()) == [
        "sample_0000.img",
        "sample_0001.img",
        "sample_0002.img",
    ]
    img = read_raster(out / "images" / "sample_0000.img")
    mask = read_raster(out / "masks" / "sample_0000.msk")
    assert img.shape == (32, 32) and mask.dtype == bool


def test_gen_data_volumes_mode(tmp_path):
    out = tmp_path / "vols"
    assert main(
        ["gen-data", "--out", str(out), "--count", "2", "--size", "32", "--slices", "4"]
    ) == 0
    vol = read_volume(out / "volumes" / "vol_0001")
    labels = read_volume(out / "labels" / "vol_0001")
    assert vol.shape == (4, 32, 32)
    assert labels.dtype == bool


def test_train_eval_propagate_round_trip(tmp_path, capsys):
    data = tmp_path / "data"
    main(["gen-data", "--out", str(data), "--count", "6", "--size", "32", "--seed", "5"])
    ckpt = tmp_path / "model.ckpt"
    assert main(
        [
            "train",
            "--data", str(data),
            "--out", str(ckpt),
            "--epochs", "1",
            "--batch-size", "3",
            "--seed", "0",
        ]
    ) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("{")]
    history = [json.loads(l) for l in lines]
    assert len(history) == 1
    assert set(history[0]) == {"epoch", "loss", "dice_backbone", "dice_refined"}

    model = model_from_params(load_checkpoint(ckpt), input_size=32)
    assert model.config.backbone_kind == "unet"

    vols = tmp_path / "vols"
    main(["gen-data", "--out", str(vols), "--count", "1", "--size", "32", "--slices", "5"])
    ref_mask_path = tmp_path / "ref.msk"
    labels = read_volume(vols / "labels" / "vol_0000")
    write_raster(ref_mask_path, labels[2])

    pred_dir = tmp_path / "pred"
    assert main(
        [
            "propagate",
            "--ckpt", str(ckpt),
            "--volume", str(vols / "volumes" / "vol_0000"),
            "--ref-index", "2",
            "--ref-mask", str(ref_mask_path),
            "--out", str(pred_dir),
        ]
    ) == 0
    pred = read_volume(pred_dir)
    assert pred.shape == (5, 32, 32)
    assert np.array_equal(pred[2], labels[2])

    metrics_path = tmp_path / "metrics.json"
    assert main(
        [
            "eval",
            "--pred", str(pred_dir),
            "--gt", str(vols / "labels" / "vol_0000"),
            "--out", str(metrics_path),
        ]
    ) == 0
    report = json.loads(metrics_path.read_text())
    assert set(report) == {"dice", "sen", "ppv", "per_slice"}
    assert len(report["per_slice"]) == 5
    assert report["per_slice"][2]["dice"] == 1.0


def test_train_rejects_missing_data_dir(tmp_path):
    with pytest.raises(FileNotFoundError, match="images/"):
        main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "m.ckpt")])


def test_unknown_command_exits_nonzero():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
