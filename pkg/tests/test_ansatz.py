import math

import numpy as np
import pytest

from qfeatures import qsim
from qfeatures.ansatz import AnsatzParams, FeatureBasis, sample_basis, sample_circuit, substream
from qfeatures.qsim import Cnot, RotationY


def test_initial_layer_only():
    c = sample_circuit(AnsatzParams(qubits=3, layers=0), np.random.default_rng(0))
    assert len(c) == 3
    assert [g.qubit for g in c.gates] == [1, 2, 3]
    assert all(isinstance(g, RotationY) for g in c.gates)


def test_layer_structure():
    c = sample_circuit(AnsatzParams(qubits=3, layers=3), np.random.default_rng(1))
    assert len(c) == 3 + 9
    for layer in range(3):
        rt, rc, cx = c.gates[3 + 3 * layer: 6 + 3 * layer]
        assert isinstance(cx, Cnot) and cx.control != cx.target
        assert rt.qubit == cx.target and rc.qubit == cx.control


def test_zero_angles_give_zero_state_row():
    p = AnsatzParams(qubits=3, layers=4, rotation_mean=0.0, rotation_std=0.0, basis_size=3)
    basis = sample_basis(p)
    for g in basis.circuits[0].gates:
        if isinstance(g, RotationY):
            assert g.angle == 0.0
    assert np.array_equal(basis.directions, np.tile(qsim.zero_state(3), (3, 1)))


def test_single_qubit_with_layers_rejected():
    with pytest.raises(ValueError):
        AnsatzParams(qubits=1, layers=1)


@pytest.mark.parametrize("bad", [dict(qubits=0), dict(basis_size=0), dict(rotation_std=-1.0),
                                 dict(weight_std=-0.1), dict(layers=-1)])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        AnsatzParams(**bad)


def test_trivial_basis():
    basis = sample_basis(AnsatzParams(qubits=2, layers=0, rotation_mean=0, rotation_std=0,
                                      weight_std=0, basis_size=1))
    assert np.array_equal(basis.vectors, [[1.0, 0.0, 0.0, 0.0]])
    assert basis.weights[0] == 1.0


def test_cnot_pairs_cover_all_ordered_pairs():
    p = AnsatzParams(qubits=3, layers=300)
    c = sample_circuit(p, np.random.default_rng(2))
    pairs = {(g.control, g.target) for g in c.gates if isinstance(g, Cnot)}
    assert pairs == {(a, b) for a in range(1, 4) for b in range(1, 4) if a != b}


def test_directions_are_circuit_first_rows(backend):
    p = AnsatzParams(qubits=3, layers=5, basis_size=20, master_seed=9)
    basis = sample_basis(p)
    for u, c in zip(basis.directions, basis.circuits):
        assert np.max(np.abs(u - qsim.dense_unitary(c)[0])) <= 1e-12
    assert np.allclose(basis.vectors, basis.weights[:, None] * basis.directions)


def test_unit_rows_and_structure():
    p = AnsatzParams(qubits=7, layers=14, basis_size=200, master_seed=3)
    basis = sample_basis(p)
    assert np.all(np.abs(np.linalg.norm(basis.directions, axis=1) - 1.0) <= 1e-9)
    for c in basis.circuits:
        assert len(c) == 7 + 3 * 14
        assert all(g.control != g.target for g in c.gates if isinstance(g, Cnot))


def test_weight_mean():
    p = AnsatzParams(qubits=3, layers=6, rotation_mean=math.pi / 2, rotation_std=0.1,
                     weight_std=1.0, basis_size=100, master_seed=42)
    basis = sample_basis(p)
    assert abs(basis.weights.mean() - 1.0) <= 3 * 1.0 / math.sqrt(100)


def test_direction_components_centered_for_wide_angles():
    p = AnsatzParams(qubits=4, layers=8, rotation_mean=0.0, rotation_std=50.0, basis_size=2000,
                     master_seed=5)
    basis = sample_basis(p, keep_circuits=False)
    assert abs(basis.directions.mean()) <= 3 / math.sqrt(2000 * 16)


def test_reproducible_and_order_independent():
    p = AnsatzParams(qubits=5, layers=10, basis_size=64, master_seed=2024)
    a = sample_basis(p)
    b = sample_basis(p, workers=4)
    c = sample_basis(p, workers=3, keep_circuits=False)
    assert np.array_equal(a.directions, b.directions) and np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.directions, c.directions) and np.array_equal(a.weights, c.weights)
    assert a.circuits == b.circuits
    # element i depends only on (seed, i)
    p_small = AnsatzParams(qubits=5, layers=10, basis_size=10, master_seed=2024)
    assert np.array_equal(sample_basis(p_small).directions, a.directions[:10])


def test_different_seeds_differ():
    a = sample_basis(AnsatzParams(qubits=3, layers=2, basis_size=5, master_seed=0))
    b = sample_basis(AnsatzParams(qubits=3, layers=2, basis_size=5, master_seed=1))
    assert a.fingerprint() != b.fingerprint()


def test_substreams_independent_of_each_other():
    x = substream(7, 0).normal(size=5)
    y = substream(7, 1).normal(size=5)
    assert not np.array_equal(x, y)
    assert np.array_equal(x, substream(7, 0).normal(size=5))


def test_save_load_roundtrip(tmp_path):
    p = AnsatzParams(qubits=3, layers=2, basis_size=7, master_seed=11)
    basis = sample_basis(p)
    path = tmp_path / "basis.npz"
    basis.save(path)
    loaded = FeatureBasis.load(path)
    assert np.array_equal(loaded.directions, basis.directions)
    assert np.array_equal(loaded.weights, basis.weights)
    assert loaded.params == p
    assert loaded.fingerprint() == basis.fingerprint()


def test_load_rejects_tampered_file(tmp_path):
    basis = sample_basis(AnsatzParams(qubits=2, layers=1, basis_size=3))
    path = tmp_path / "b.npz"
    basis.save(path)
    with np.load(path) as z:
        header, d, w = z["header"], z["directions"], z["weights"]
    np.savez(path, header=header, directions=d, weights=w + 1.0)
    with pytest.raises(ValueError, match="fingerprint"):
        FeatureBasis.load(path)
