import numpy as np
import pytest

from asp_snn.classes import (DataConfig, ImageSet, LifParams, NetworkParams, PresentationParams, RunConfig,
                             ScheduleSpec)
from asp_snn.dataio import write_idx

BLOCK = 5


def digit_image(cls: int, rng: np.random.Generator) -> np.ndarray:
    """A bright 5x5 block whose position encodes the class, plus a few stray pixels."""
    image = np.zeros((28, 28), dtype=np.uint8)
    row = 2 + (cls // 5) * 13
    col = 1 + (cls % 5) * 5
    image[row:row + BLOCK, col:col + BLOCK] = 255
    stray = rng.integers(0, 28, size=(3, 2))
    image[stray[:, 0], stray[:, 1]] = 128
    return image


def make_digit_set(per_class: int, classes=range(10), seed: int = 0) -> ImageSet:
    rng = np.random.default_rng(seed)
    labels = np.array([c for _ in range(per_class) for c in classes], dtype=np.uint8)
    images = np.stack([digit_image(int(c), rng) for c in labels])
    return ImageSet(images, labels)


@pytest.fixture
def digit_set() -> ImageSet:
    return make_digit_set(per_class=12)


@pytest.fixture
def mnist_like_files(tmp_path):
    train = make_digit_set(per_class=12, seed=1)
    test = make_digit_set(per_class=4, seed=2)
    paths = {
        "train_images": tmp_path / "train-images-idx3-ubyte",
        "train_labels": tmp_path / "train-labels-idx1-ubyte",
        "test_images": tmp_path / "t10k-images-idx3-ubyte",
        "test_labels": tmp_path / "t10k-labels-idx1-ubyte",
    }
    write_idx(train, paths["train_images"], paths["train_labels"])
    write_idx(test, paths["test_images"], paths["test_labels"])
    return paths


def fast_config(**data_paths) -> RunConfig:
    """Four neurons, short presentations and fast membranes, so tests finish in seconds."""
    return RunConfig(
        seed=3,
        snapshot_every=4,
        network=NetworkParams(n_exc=4),
        exc=LifParams(tau_mem=10.0, r_mem=20.0),
        presentation=PresentationParams(duration=20.0, rest=5.0, max_retries=2),
        schedule=ScheduleSpec(classes=[0, 1, 2], per_class_count=3),
        data=DataConfig(label_count=6, test_count=6, **{k: str(v) for k, v in data_paths.items()}),
    )


@pytest.fixture
def small_config(mnist_like_files, tmp_path) -> RunConfig:
    config = fast_config(**mnist_like_files)
    config.output_dir = str(tmp_path / "run")
    return config
