import struct

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_idx_images(path, images: np.ndarray) -> None:
    """images: (count, rows, cols) uint8"""
    count, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, count, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())


def clustered_dataset(seed, n_classes=3, dim=12, per_class=40):
    """Samples in [0, 1] scattered around one prototype per class."""
    rng = np.random.default_rng(seed)
    protos = rng.random((dim, n_classes))
    cols, labels = [], []
    for c in range(n_classes):
        noise = 0.08 * rng.standard_normal((dim, per_class))
        cols.append(np.clip(protos[:, [c]] + noise, 0.0, 1.0))
        labels += [c] * per_class
    X = np.hstack(cols)
    y = np.array(labels)
    order = rng.permutation(X.shape[1])
    return X[:, order], y[order]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
