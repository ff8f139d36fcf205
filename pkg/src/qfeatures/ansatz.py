"""Random circuit sampling and the feature basis built from it.

A circuit starts with one Ry rotation on every qubit, then each of ``L``
layers rotates a target and a control qubit and applies CNOT(control,
target). All angles are i.i.d. Gaussian(m, sigma). Basis vector ``i`` is the
first row of circuit ``i``'s unitary scaled by a weight drawn from
Gaussian(1, sigma_w).
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .qsim import Circuit, Cnot, RotationY, zero_state

BASIS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AnsatzParams:
    qubits: int = 7
    layers: int = 14
    rotation_mean: float = 0.5 * math.pi
    rotation_std: float = 0.1
    weight_std: float = 1.0
    basis_size: int = 8000
    master_seed: int = 0

    def __post_init__(self):
        if self.qubits < 1:
            raise ValueError("qubits must be >= 1")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.basis_size < 1:
            raise ValueError("basis_size must be >= 1")
        if self.rotation_std < 0 or self.weight_std < 0:
            raise ValueError("standard deviations must be >= 0")
        if self.layers >= 1 and self.qubits < 2:
            raise ValueError("CNOT layers need at least two qubits")

    @property
    def dim(self) -> int:
        return 1 << self.qubits


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for basis element ``index``.

    Derived from (master_seed, index) alone, so results do not depend on the
    order or grouping in which elements are sampled.
    """
    seq = np.random.SeedSequence(int(master_seed) % 2**64, spawn_key=(int(index),))
    return np.random.default_rng(seq)


def sample_circuit(params: AnsatzParams, rng: np.random.Generator) -> Circuit:
    k, L = params.qubits, params.layers
    if L >= 1 and k < 2:
        raise ValueError("CNOT layers need at least two qubits")
    angles = rng.normal(params.rotation_mean, params.rotation_std, size=k + 2 * L)
    controls = rng.integers(0, k, size=L)
    targets = rng.integers(0, k - 1, size=L) if L else np.zeros(0, dtype=int)
    targets = targets + (targets >= controls)  # uniform over ordered pairs, c != t

    gates = [RotationY(float(angles[j]), j + 1) for j in range(k)]
    for layer in range(L):
        c, t = int(controls[layer]) + 1, int(targets[layer]) + 1
        gates.append(RotationY(float(angles[k + 2 * layer]), t))
        gates.append(RotationY(float(angles[k + 2 * layer + 1]), c))
        gates.append(Cnot(c, t))
    return Circuit(k, tuple(gates))


@dataclass(frozen=True, eq=False)
class FeatureBasis:
    """``D`` unit directions ``u_i`` and weights ``w_i``; vectors are ``w_i u_i``."""

    directions: np.ndarray
    weights: np.ndarray
    params: AnsatzParams | None = None
    circuits: tuple[Circuit, ...] | None = None
    source: str = "quantum"

    @property
    def vectors(self) -> np.ndarray:
        return self.weights[:, None] * self.directions

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.directions, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def save(self, path) -> None:
        header = {
            "format": "qfeatures-basis",
            "version": BASIS_FORMAT_VERSION,
            "source": self.source,
            "params": asdict(self.params) if self.params else None,
            "fingerprint": self.fingerprint(),
        }
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)),
                     directions=self.directions, weights=self.weights)

    @classmethod
    def load(cls, path) -> "FeatureBasis":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != "qfeatures-basis":
                raise ValueError(f"{path}: not a feature basis file")
            if header["version"] > BASIS_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported basis version {header['version']}")
            params = AnsatzParams(**header["params"]) if header["params"] else None
            basis = cls(z["directions"], z["weights"], params, None, header["source"])
        if basis.fingerprint() != header["fingerprint"]:
            raise ValueError(f"{path}: fingerprint mismatch")
        return basis


def _sample_range(params: AnsatzParams, start: int, stop: int, out_u, out_w, circuits):
    z = zero_state(params.qubits)
    for i in range(start, stop):
        rng = substream(params.master_seed, i)
        circuit = sample_circuit(params, rng)
        out_w[i] = rng.normal(1.0, params.weight_std)
        out_u[i] = z
        kernels.run_gates(out_u[i:i + 1], params.qubits, *circuit.adjoint().arrays)
        if circuits is not None:
            circuits[i] = circuit


def sample_basis(params: AnsatzParams, workers: int = 1, keep_circuits: bool = True) -> FeatureBasis:
    """Sample ``D`` circuits and weights; deterministic for any ``workers``."""
    D, d = params.basis_size, params.dim
    directions = np.empty((D, d))
    weights = np.empty(D)
    circuits = [None] * D if keep_circuits else None
    if workers <= 1:
        _sample_range(params, 0, D, directions, weights, circuits)
    else:
        bounds = np.linspace(0, D, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            futures = [pool.submit(_sample_range, params, int(a), int(b), directions, weights, circuits)
                       for a, b in zip(bounds[:-1], bounds[1:])]
            for f in futures:
                f.result()
    return FeatureBasis(directions, weights, params,
                        tuple(circuits) if keep_circuits else None, "quantum")
