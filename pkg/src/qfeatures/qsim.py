"""Real-amplitude statevector simulation for circuits built from Ry and CNOT.

Qubits are numbered 1..k with qubit 1 the most significant bit of the
basis-state index, so ``Ry`` on qubit ``j`` acts as
``I(2^(j-1)) (x) Ry (x) I(2^(k-j))``. The rotation matrix is

    [[ cos a, sin a],
     [-sin a, cos a]]

and CNOT flips the target bit when the control bit is 1. Every gate matrix
is real, so states are stored as float64 arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels

MAX_DENSE_QUBITS = 12


class InvalidGateError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class RotationY:
    angle: float
    qubit: int


@dataclass(frozen=True)
class Cnot:
    control: int
    target: int


Gate = RotationY | Cnot


def check_gate(gate: Gate, k: int) -> None:
    if isinstance(gate, RotationY):
        if not 1 <= gate.qubit <= k:
            raise InvalidGateError(f"qubit {gate.qubit} outside 1..{k}")
        if not math.isfinite(gate.angle):
            raise InvalidGateError("rotation angle must be finite")
    elif isinstance(gate, Cnot):
        for q in (gate.control, gate.target):
            if not 1 <= q <= k:
                raise InvalidGateError(f"qubit {q} outside 1..{k}")
        if gate.control == gate.target:
            raise InvalidGateError("CNOT control equals target")
    else:
        raise InvalidGateError(f"unknown gate {gate!r}")


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list on ``k`` qubits; the first gate acts first."""

    k: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.k < 1:
            raise InvalidGateError("need at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            check_gate(g, self.k)

    def __len__(self):
        return len(self.gates)

    @cached_property
    def arrays(self):
        """Gate list packed as (kinds, q1, q2, angles) for the kernels."""
        n = len(self.gates)
        kinds = np.zeros(n, dtype=np.uint8)
        q1 = np.zeros(n, dtype=np.intp)
        q2 = np.zeros(n, dtype=np.intp)
        angles = np.zeros(n, dtype=np.float64)
        for i, g in enumerate(self.gates):
            if isinstance(g, RotationY):
                q1[i] = g.qubit
                angles[i] = g.angle
            else:
                kinds[i] = 1
                q1[i] = g.control
                q2[i] = g.target
        return kinds, q1, q2, angles

    def adjoint(self) -> "Circuit":
        """Reversed gate order with negated angles (CNOT is self-inverse)."""
        rev = []
        for g in reversed(self.gates):
            rev.append(RotationY(-g.angle, g.qubit) if isinstance(g, RotationY) else g)
        return Circuit(self.k, tuple(rev))


def zero_state(k: int) -> np.ndarray:
    z = np.zeros(1 << k)
    z[0] = 1.0
    return z


def _as_state(state, k: int) -> np.ndarray:
    v = np.asarray(state, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != 1 << k:
        raise DimensionError(f"expected a state of length {1 << k}, got shape {v.shape}")
    return v


def _qubits_of(state) -> int:
    n = np.asarray(state).shape[-1]
    k = int(n).bit_length() - 1
    if n < 2 or 1 << k != n:
        raise DimensionError(f"state length {n} is not a power of two")
    return k


def apply_gate(state, gate: Gate) -> np.ndarray:
    """Return ``gate`` applied to ``state``; the input is left untouched."""
    k = _qubits_of(state)
    check_gate(gate, k)
    out = np.array(_as_state(state, k), dtype=np.float64, copy=True)
    kernels.run_gates(out[None, :], k, *Circuit(k, (gate,)).arrays)
    return out


def run_circuit(state, circuit: Circuit) -> np.ndarray:
    out = np.array(_as_state(state, circuit.k), dtype=np.float64, copy=True)
    kernels.run_gates(out[None, :], circuit.k, *circuit.arrays)
    return out


def run_circuit_batch(states, circuit: Circuit) -> np.ndarray:
    """Run ``circuit`` on each row of ``states`` (B x 2^k)."""
    out = np.array(states, dtype=np.float64, order="C", copy=True)
    if out.ndim != 2 or out.shape[1] != 1 << circuit.k:
        raise DimensionError(f"expected B x {1 << circuit.k} states, got {out.shape}")
    kernels.run_gates(out, circuit.k, *circuit.arrays)
    return out


def gate_matrix(gate: Gate, k: int) -> np.ndarray:
    """Dense 2^k x 2^k matrix of one embedded gate, built by Kronecker products."""
    check_gate(gate, k)
    if isinstance(gate, RotationY):
        c, s = math.cos(gate.angle), math.sin(gate.angle)
        ry = np.array([[c, s], [-s, c]])
        return np.kron(np.kron(np.eye(1 << (gate.qubit - 1)), ry), np.eye(1 << (k - gate.qubit)))
    n = 1 << k
    m = np.zeros((n, n))
    cbit = 1 << (k - gate.control)
    tbit = 1 << (k - gate.target)
    for i in range(n):
        m[i ^ tbit if i & cbit else i, i] = 1.0
    return m


def dense_unitary(circuit: Circuit) -> np.ndarray:
    """Explicit matrix product ``G_last ... G_1``; the reference path."""
    if circuit.k > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense unitary limited to {MAX_DENSE_QUBITS} qubits")
    u = np.eye(1 << circuit.k)
    for g in circuit.gates:
        u = gate_matrix(g, circuit.k) @ u
    return u


def first_row_vector(circuit: Circuit) -> np.ndarray:
    """First row of the circuit unitary, i.e. ``U^T z``.

    Runs the adjoint circuit on the zero state, so no dense matrix is built.
    """
    return run_circuit(zero_state(circuit.k), circuit.adjoint())


def first_amplitude(circuit: Circuit, state) -> float:
    """First amplitude of ``U @ state``, obtained by simulation."""
    return float(run_circuit(state, circuit)[0])


def estimate_first_amplitude(circuit: Circuit, state, shots: int, rng: np.random.Generator) -> float:
    """Shot-based estimate ``sign(a) * sqrt(hits / shots)`` of the first amplitude.

    Each shot is a Bernoulli trial with success probability ``a**2``.
    """
    if shots < 1:
        raise ValueError("shots must be a positive integer")
    a = first_amplitude(circuit, state)
    p = min(1.0, a * a)
    hits = rng.binomial(shots, p)
    return math.copysign(math.sqrt(hits / shots), a) if hits else 0.0
