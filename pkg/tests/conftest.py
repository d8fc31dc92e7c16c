import numpy as np
import pytest

from gcart import data


def make_synthetic_cifar(dirpath, n_train=2400, n_test=600, seed=123):
    """Write CIFAR-10-format binary batches with class-dependent content.

    Each class gets a fixed template plus pixel noise, so a classifier has
    real structure to learn while the files exercise the exact on-disk
    layout of the production dataset.
    """
    rng = np.random.default_rng(seed)
    templates = rng.uniform(0.15, 0.85, size=(10, 32, 32, 3))

    def gen(n):
        labels = rng.integers(0, 10, size=n)
        imgs = templates[labels] + rng.normal(0.0, 0.06, size=(n, 32, 32, 3))
        u8 = np.clip(np.floor(imgs * 255.0 + 0.5), 0, 255).astype(np.uint8)
        return u8, labels.astype(np.int64)

    train_u8, train_y = gen(n_train)
    test_u8, test_y = gen(n_test)
    data.save_cifar10_batch(str(dirpath / "data_batch_1.bin"), train_u8, train_y)
    data.save_cifar10_batch(str(dirpath / "test_batch.bin"), test_u8, test_y)
    return dirpath


@pytest.fixture(scope="session")
def cifar_dir(tmp_path_factory):
    return make_synthetic_cifar(tmp_path_factory.mktemp("cifar"))
