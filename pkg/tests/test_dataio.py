import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfeatures import dataio
from qfeatures.dataio import IdxFormatError, RawDataset


def write_fixture(tmp_path, images, labels, name="fx"):
    ip, lp = tmp_path / f"{name}-images", tmp_path / f"{name}-labels"
    dataio.write_idx(images, labels, ip, lp)
    return ip, lp


def test_idx_roundtrip(tmp_path):
    images = np.arange(2 * 28 * 28, dtype=np.uint32).reshape(2, 28, 28) % 256
    ip, lp = write_fixture(tmp_path, images, [3, 5])
    raw = dataio.load_idx(ip, lp)
    assert raw.images.shape == (2, 784)
    assert np.array_equal(raw.images, images.reshape(2, -1).astype(np.uint8))
    assert list(raw.labels) == [3, 5]


def test_idx_handcrafted_bytes(tmp_path):
    ip, lp = tmp_path / "i", tmp_path / "l"
    ip.write_bytes(struct.pack(">4I", 0x803, 2, 1, 2) + bytes([0, 255, 7, 9]))
    lp.write_bytes(struct.pack(">2I", 0x801, 2) + bytes([3, 5]))
    raw = dataio.load_idx(ip, lp)
    assert raw.images.tolist() == [[0, 255], [7, 9]]


def test_idx_gzip(tmp_path):
    images = np.random.default_rng(0).integers(0, 256, size=(3, 4, 4))
    ip, lp = write_fixture(tmp_path, images, [1, 2, 3])
    for p in (ip, lp):
        p.with_suffix(".gz").write_bytes(gzip.compress(p.read_bytes()))
    raw = dataio.load_idx(ip.with_suffix(".gz"), lp.with_suffix(".gz"))
    assert np.array_equal(raw.images, images.reshape(3, -1))


def test_bad_magic_names_offset(tmp_path):
    ip, lp = write_fixture(tmp_path, np.zeros((1, 2, 2)), [3])
    data = bytearray(ip.read_bytes())
    data[3] = 0x01
    ip.write_bytes(bytes(data))
    with pytest.raises(IdxFormatError, match="offset 0"):
        dataio.load_idx(ip, lp)


def test_truncated(tmp_path):
    ip, lp = write_fixture(tmp_path, np.zeros((2, 2, 2)), [3, 5])
    ip.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(IdxFormatError, match="truncated"):
        dataio.load_idx(ip, lp)
    ip.write_bytes(b"\x00\x00")
    with pytest.raises(IdxFormatError, match="truncated"):
        dataio.load_idx(ip, lp)


def test_count_mismatch(tmp_path):
    ip, _ = write_fixture(tmp_path, np.zeros((2, 2, 2)), [3, 5])
    _, lp = write_fixture(tmp_path, np.zeros((3, 2, 2)), [3, 5, 5], name="other")
    with pytest.raises(IdxFormatError):
        dataio.load_idx(ip, lp)


def test_extract_counts():
    labels = np.array([0, 3, 5, 5, 3, 9, 5, 1])
    raw = RawDataset(np.arange(8 * 4).reshape(8, 4), labels)
    task = dataio.extract_binary_task(raw)
    assert len(task) == 5
    assert np.count_nonzero(task.labels == 3) == 2 and np.count_nonzero(task.labels == 5) == 3
    assert np.array_equal(task.images[:, 0], [4, 8, 12, 16, 24])


def test_extract_no_matches():
    raw = RawDataset(np.zeros((3, 4)), np.array([0, 1, 2]))
    assert len(dataio.extract_binary_task(raw)) == 0
    with pytest.raises(ValueError):
        dataio.extract_binary_task(raw, 3, 3)


def brute_chi2(X, labels):
    """Contingency oracle: per feature, class totals vs their expectation."""
    n, m = X.shape
    classes = sorted(set(labels.tolist()))
    out = []
    for j in range(m):
        total = sum(X[i, j] for i in range(n))
        s = 0.0
        for c in classes:
            members = [i for i in range(n) if labels[i] == c]
            observed = sum(X[i, j] for i in members)
            expected = total * len(members) / n
            if expected > 0:
                s += (observed - expected) ** 2 / expected
        out.append(s)
    return np.array(out)


def test_chi2_four_point_oracle():
    X = np.array([[4.0, 1.0, 0.0, 2.0],
                  [2.0, 1.0, 0.0, 0.0],
                  [0.0, 1.0, 0.0, 5.0],
                  [0.0, 1.0, 0.0, 1.0]])
    labels = np.array([3, 3, 5, 5])
    scores = dataio.chi2_scores(X, labels)
    assert np.allclose(scores, brute_chi2(X, labels), atol=1e-12)
    # feature 0 lives only in class 3: O=(6,0), E=(3,3) -> 3 + 3
    assert scores[0] == pytest.approx(6.0)
    assert scores[1] == 0.0  # identical across classes
    assert scores[2] == 0.0  # constant zero


def test_chi2_matches_reference_implementation():
    from sklearn.feature_selection import chi2

    rng = np.random.default_rng(5)
    X = rng.integers(0, 256, size=(60, 30)).astype(float)
    X[:, 4] = 0
    labels = rng.choice([3, 5], size=60)
    ref, _ = chi2(X, labels)
    ref = np.nan_to_num(ref)
    assert np.allclose(dataio.chi2_scores(X, labels), ref, rtol=1e-10)


def test_chi2_zero_feature_never_beats_positive():
    X = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0], [0.0, 3.0, 0.0], [0.0, 0.0, 1.0]])
    labels = np.array([3, 5, 3, 5])
    assert list(dataio.chi2_select(X, labels, 2)) == [1, 2]


def test_chi2_ties_take_lower_index():
    X = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
    labels = np.array([3, 5])
    assert list(dataio.chi2_select(X, labels, 2)) == [0, 1]


def test_chi2_errors():
    with pytest.raises(ValueError):
        dataio.chi2_scores(np.array([[-1.0], [1.0]]), np.array([3, 5]))
    with pytest.raises(ValueError):
        dataio.chi2_scores(np.ones((2, 2)), np.array([3, 3]))
    with pytest.raises(ValueError):
        dataio.chi2_select(np.ones((2, 2)), np.array([3, 5]), 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_chi2_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(20, 12)).astype(float)
    labels = np.where(np.arange(20) < 9, 3, 5)
    perm = rng.permutation(20)
    assert np.array_equal(dataio.chi2_select(X, labels, 5), dataio.chi2_select(X[perm], labels[perm], 5))


def test_split_sizes():
    tr, te = dataio.split_indices(13454, seed=0)
    assert (len(tr), len(te)) == (11532, 1922)
    tr, te = dataio.split_indices(7, seed=0)
    assert (len(tr), len(te)) == (6, 1)
    with pytest.raises(ValueError):
        dataio.split_indices(6, seed=0)


def test_split_deterministic_partition():
    a = dataio.split_indices(100, seed=9)
    b = dataio.split_indices(100, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    tr, te = a
    assert set(tr).isdisjoint(te)
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(100))
    assert not np.array_equal(dataio.split_indices(100, seed=10)[0], tr)


def test_split_task_dataset():
    task = dataio.TaskDataset(np.arange(14.0).reshape(1, 14), np.tile([-1, 1], 7), np.array([0]))
    train, test = dataio.split(task, seed=2)
    assert len(train) == 12 and len(test) == 2
    assert train.split_seed == 2
    assert sorted(np.concatenate([train.F[0], test.F[0]])) == list(range(14))


def test_binary_labels():
    assert list(dataio.binary_labels([3, 5, 5, 3])) == [-1, 1, 1, -1]
    with pytest.raises(ValueError):
        dataio.binary_labels([3, 4])


def test_to_feature_matrix():
    images = np.zeros((2, 784), dtype=np.uint8)
    images[0, [10, 20]] = [255, 51]
    images[1, 20] = 0
    raw = RawDataset(images, np.array([3, 5]))
    task = dataio.to_feature_matrix(raw, [10, 20, 30])
    assert task.F.shape == (3, 2)
    assert task.F[:, 0].tolist() == [1.0, 0.2, 0.0]
    assert task.F[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert task.labels.tolist() == [-1, 1]
    unscaled = dataio.to_feature_matrix(raw, [10], pixel_scale=1.0)
    assert unscaled.F[0, 0] == 255.0
