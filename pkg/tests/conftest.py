import json

import numpy as np
import pytest

from pmc.synthdata import BenchmarkSpec, ModalityBenchmark, generate_benchmark
from pmc.trainers import TrainConfig


def small_spec(seed: int = 0, rotation: float = 35.0, translation: float = 1.5) -> BenchmarkSpec:
    return BenchmarkSpec(
        name="tiny", n_classes=3, noise=0.5, n_source=60, n_target=48, seed=seed,
        modalities=(
            ModalityBenchmark("A", dim=4, informativeness=3.0, rotation_deg=rotation, translation=translation),
            ModalityBenchmark("B", dim=4, informativeness=1.0, rotation_deg=rotation, translation=translation,
                              derived_from="A", noise=0.2),
        ))


@pytest.fixture
def tiny_spec():
    return small_spec()


@pytest.fixture
def tiny_dataset(tiny_spec):
    return generate_benchmark(tiny_spec)


@pytest.fixture
def tiny_config():
    return TrainConfig(epochs=3, warmup_epochs=2, batch_size=8, feature_hidden=(8,), feature_dim=6,
                       domain_hidden=(4,), latent_dim=4, generator_epochs=3, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def finite_difference(f, params, eps=1e-6):
    """Central differences of the scalar ``f()`` with respect to every entry of every array in ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            up = f()
            p[idx] = old - eps
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def rel_error(a, b):
    a, b = np.concatenate([x.ravel() for x in a]), np.concatenate([x.ravel() for x in b])
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


TINY_TRAIN = {"epochs": 2, "warmup_epochs": 1, "batch_size": 8, "feature_hidden": [8], "feature_dim": 6,
              "domain_hidden": [4], "latent_dim": 4, "generator_epochs": 2}


def write_experiment(path, output_dir, **overrides) -> str:
    """Experiment file over the tiny benchmark; JSON is a subset of YAML."""
    train = {**TINY_TRAIN, **overrides.pop("train", {})}
    conf = {"benchmark": small_spec().to_dict(), "output_dir": str(output_dir), "seeds": [1, 2], "train": train}
    conf.update(overrides)
    with open(path, "w") as out_IO:
        json.dump(conf, out_IO)
    return str(path)
