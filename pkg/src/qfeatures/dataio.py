"""MNIST IDX loading, binary task extraction, chi-squared selection and splits."""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RawDataset:
    images: np.ndarray  # N x 784, uint8
    labels: np.ndarray  # N digits

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image and label counts differ")

    def __len__(self):
        return self.labels.shape[0]


@dataclass(frozen=True, eq=False)
class TaskDataset:
    F: np.ndarray  # d x N, columns are points
    labels: np.ndarray  # N values in {-1, +1}
    selected: np.ndarray  # d feature indices into the 784 pixels
    split_seed: int | None = None

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "TaskDataset":
        return TaskDataset(self.F[:, idx], self.labels[idx], self.selected, self.split_seed)


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _parse(data: bytes, magic: int, ndim: int, path) -> np.ndarray:
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{path}: truncated header")
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise IdxFormatError(f"{path}: bad magic 0x{got:08x} at offset 0 (expected 0x{magic:08x})")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = math.prod(dims)
    if len(data) - header < count:
        raise IdxFormatError(f"{path}: truncated data at offset {len(data)}, need {header + count} bytes")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> RawDataset:
    """Read an IDX image file and its label file (either may be gzipped)."""
    images = _parse(_read_bytes(images_path), IMAGES_MAGIC, 3, images_path)
    labels = _parse(_read_bytes(labels_path), LABELS_MAGIC, 1, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images_path}: {images.shape[0]} images but {labels.shape[0]} labels")
    return RawDataset(images.reshape(images.shape[0], -1), labels)


def write_idx(images, labels, images_path, labels_path) -> None:
    """Write images (N x rows x cols, uint8) and labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def concat(*parts: RawDataset) -> RawDataset:
    return RawDataset(np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts]))


def extract_binary_task(raw: RawDataset, digit_a: int = 3, digit_b: int = 5) -> RawDataset:
    if digit_a == digit_b:
        raise ValueError("digits must differ")
    keep = (raw.labels == digit_a) | (raw.labels == digit_b)
    return RawDataset(raw.images[keep], raw.labels[keep])


def chi2_scores(X, labels) -> np.ndarray:
    """Per-feature sum over classes of (O - E)^2 / E.

    ``O`` is the feature's total value within a class and ``E`` its overall
    total times the class frequency. Features summing to zero score 0.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if np.any(X < 0):
        raise ValueError("chi-squared selection needs non-negative features")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need both classes for chi-squared selection")
    total = X.sum(axis=0)
    scores = np.zeros(X.shape[1])
    n = labels.shape[0]
    for c in classes:
        mask = labels == c
        observed = X[mask].sum(axis=0)
        expected = total * (mask.sum() / n)
        nz = expected > 0
        scores[nz] += (observed[nz] - expected[nz]) ** 2 / expected[nz]
    return scores


def chi2_select(X, labels, k: int = 128) -> np.ndarray:
    """Indices of the ``k`` highest chi-squared scores, ascending; ties go to the lower index."""
    X = np.asarray(X)
    if k > X.shape[1]:
        raise ValueError(f"cannot select {k} of {X.shape[1]} features")
    scores = chi2_scores(X, labels)
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:k])


def split_indices(n: int, seed: int, ratio=(6, 1)) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle; the first ceil(n * a / (a + b)) positions train."""
    a, b = ratio
    if n < a + b:
        raise ValueError(f"need at least {a + b} points to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = -(-n * a // (a + b))
    return perm[:n_train], perm[n_train:]


def split(task: TaskDataset, seed: int, ratio=(6, 1)) -> tuple[TaskDataset, TaskDataset]:
    tr, te = split_indices(len(task), seed, ratio)
    train, test = task.subset(tr), task.subset(te)
    return (TaskDataset(train.F, train.labels, train.selected, seed),
            TaskDataset(test.F, test.labels, test.selected, seed))


def binary_labels(digits, digit_a: int = 3, digit_b: int = 5) -> np.ndarray:
    """``digit_a`` -> -1, ``digit_b`` -> +1."""
    digits = np.asarray(digits)
    out = np.where(digits == digit_b, 1, -1)
    if not np.all((digits == digit_a) | (digits == digit_b)):
        raise ValueError("labels outside the selected digit pair")
    return out


def to_feature_matrix(raw: RawDataset, indices, digit_a: int = 3, digit_b: int = 5,
                      pixel_scale: float = 255.0) -> TaskDataset:
    """Select pixel columns, divide by ``pixel_scale`` and lay points out as columns."""
    indices = np.asarray(indices, dtype=np.intp)
    F = np.ascontiguousarray(raw.images[:, indices].T, dtype=np.float64) / pixel_scale
    return TaskDataset(F, binary_labels(raw.labels, digit_a, digit_b), indices)
