import pytest
import torch

from refineseg.phantoms import make_dataset
from refineseg.trainer import TrainConfig, fit

# Small CPU runs only; keep thread scheduling out of timing noise.
torch.set_num_threads(max(1, torch.get_num_threads()))


@pytest.fixture(scope="session")
def quick_config() -> TrainConfig:
    return TrainConfig(epochs=14, batch_size=8, rng_seed=1)


@pytest.fixture(scope="session")
def quick_fit(quick_config):
    """A briefly trained 32x32 model (with history) shared across tests."""
    data = make_dataset(500, 32, 32)
    return fit(data, quick_config)


@pytest.fixture(scope="session")
def quick_model(quick_fit):
    return quick_fit[0]


@pytest.fixture(scope="session")
def acceptance_setup():
    """The full-scale training run exercised by the acceptance suite.

    Both backbones are trained on the same 200-phantom split with the
    default config and a fixed seed, then judged on 50 held-out phantoms.
    """
    import time

    train = make_dataset(0, 200, 64)
    held = make_dataset(10_000, 50, 64)
    config = TrainConfig(epochs=20, batch_size=8, rng_seed=0)
    models = {}
    train_seconds = {}
    for kind in ("unet", "fcn"):
        cfg = TrainConfig(
            epochs=config.epochs,
            batch_size=config.batch_size,
            rng_seed=config.rng_seed,
            backbone_kind=kind,
        )
        t0 = time.perf_counter()
        models[kind], _ = fit(train, cfg, val_dataset=held)
        train_seconds[kind] = time.perf_counter() - t0
    return {
        "models": models,
        "held_out": held,
        "config": config,
        "train_seconds": train_seconds,
    }


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full-scale acceptance criteria (slower, trains models)"
    )
