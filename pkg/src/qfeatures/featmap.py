"""Random Fourier feature maps.

A data matrix ``F`` (d x N, one point per column) is mapped to the
2D x N matrix ``sqrt(1/D) [cos(G F); sin(G F)]`` where the rows of ``G`` are
the basis vectors. The production path is a blocked matrix product; the
simulation path obtains each inner product from a circuit's first output
amplitude on the normalized point, which is what a quantum device would
measure.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .qsim import run_circuit_batch

MAP_FORMAT_VERSION = 1
BLOCK_COLUMNS = 2048


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaussianBasis:
    """Classical basis: rows drawn i.i.d. from N(0, bandwidth^2 I)."""

    vectors: np.ndarray
    seed: int
    bandwidth: float
    source: str = "gaussian"

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def fingerprint(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes()).hexdigest()[:16]


def sample_gaussian_basis(d: int, D: int, bandwidth: float, seed: int) -> GaussianBasis:
    if d < 1 or D < 1:
        raise ValueError("d and D must be positive")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    rng = np.random.default_rng(seed)
    return GaussianBasis(rng.normal(0.0, bandwidth, size=(D, d)), seed, float(bandwidth))


@dataclass(frozen=True, eq=False)
class MappedFeatures:
    matrix: np.ndarray
    basis_id: str
    norms: np.ndarray
    zero_points: int = 0

    @property
    def basis_size(self) -> int:
        return self.matrix.shape[0] // 2

    def save(self, path) -> None:
        header = {"format": "qfeatures-mapped", "version": MAP_FORMAT_VERSION,
                  "rows": self.matrix.shape[0], "cols": self.matrix.shape[1],
                  "basis_id": self.basis_id, "zero_points": self.zero_points}
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)), matrix=self.matrix, norms=self.norms)

    @classmethod
    def load(cls, path) -> "MappedFeatures":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != "qfeatures-mapped":
                raise ValueError(f"{path}: not a mapped-features file")
            if header["version"] > MAP_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported version {header['version']}")
            matrix = z["matrix"]
            if matrix.shape != (header["rows"], header["cols"]):
                raise ValueError(f"{path}: matrix shape does not match header")
            return cls(matrix, header["basis_id"], z["norms"], header["zero_points"])


def _pad(F, dim: int) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] > dim:
        raise DimensionMismatch(f"data dimension {F.shape[0]} exceeds basis dimension {dim}")
    if F.shape[0] < dim:
        F = np.vstack([F, np.zeros((dim - F.shape[0], F.shape[1]))])
    return F


def normalize_points(F):
    """Scale each column to unit norm; returns (unit columns, norms, zero count)."""
    F = np.asarray(F, dtype=np.float64)
    norms = np.linalg.norm(F, axis=0)
    zero = norms == 0
    unit = F / np.where(zero, 1.0, norms)
    return unit, norms, int(zero.sum())


def map_dataset(F, basis) -> MappedFeatures:
    """Matrix-product path: ``sqrt(1/D) [cos(G F); sin(G F)]``."""
    G = np.ascontiguousarray(basis.vectors, dtype=float)
    D = G.shape[0]
    F = np.ascontiguousarray(_pad(F, G.shape[1]), dtype=float)
    N = F.shape[1]
    norms = np.linalg.norm(F, axis=0)
    out = np.empty((2 * D, N))
    scale = np.sqrt(1.0 / D)
    for start in range(0, N, BLOCK_COLUMNS):
        stop = min(N, start + BLOCK_COLUMNS)
        B = np.empty((D, stop - start))
        kernels.project(G, np.ascontiguousarray(F[:, start:stop]), B)
        np.cos(B, out=out[:D, start:stop])
        np.sin(B, out=out[D:, start:stop])
    out *= scale
    return MappedFeatures(out, basis.fingerprint(), norms, int((norms == 0).sum()))


def projections_by_simulation(F, basis, shots: int = 0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Inner products ``<g_i, f_j>`` read off circuit outputs (D x N).

    Each normalized point is fed to circuit ``i`` and the first output
    amplitude ``a_ij`` is rescaled by ``w_i * ||f_j||``. With ``shots > 0``
    the amplitude is replaced by a shot-based estimate.
    """
    if basis.circuits is None:
        raise ValueError("basis was sampled without circuits; simulation path unavailable")
    F = _pad(F, basis.dim)
    unit, norms, _ = normalize_points(F)
    states = np.ascontiguousarray(unit.T)
    if shots and rng is None:
        raise ValueError("shot estimation needs an rng")
    amps = np.empty((basis.size, F.shape[1]))
    for i, circuit in enumerate(basis.circuits):
        a = run_circuit_batch(states, circuit)[:, 0]
        if shots:
            hits = rng.binomial(shots, np.minimum(1.0, a * a))
            a = np.sign(a) * np.sqrt(hits / shots)
        amps[i] = a
    return amps * basis.weights[:, None] * norms[None, :]


def map_dataset_by_simulation(F, basis, shots: int = 0, rng=None) -> MappedFeatures:
    """Simulation path of :func:`map_dataset`; reference and hardware stand-in."""
    B = projections_by_simulation(F, basis, shots, rng)
    D = B.shape[0]
    norms = np.linalg.norm(_pad(F, basis.dim), axis=0)
    out = np.vstack([np.cos(B), np.sin(B)]) * np.sqrt(1.0 / D)
    return MappedFeatures(out, basis.fingerprint(), norms, int((norms == 0).sum()))


def approx_kernel(f1, f2, basis) -> float:
    """``c(f1) . c(f2)``, equal to the mean of ``cos(<g_i, f1 - f2>)``."""
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    if f1.shape != f2.shape or f1.ndim != 1:
        raise DimensionMismatch("kernel arguments must be vectors of equal length")
    G = basis.vectors
    if f1.shape[0] != G.shape[1]:
        f1, f2 = _pad(f1, G.shape[1])[:, 0], _pad(f2, G.shape[1])[:, 0]
    p1, p2 = G @ f1, G @ f2
    value = float(np.dot(np.cos(p1), np.cos(p2)) + np.dot(np.sin(p1), np.sin(p2))) / G.shape[0]
    assert abs(value - float(np.mean(np.cos(p1 - p2)))) <= 1e-9
    return value


def approx_kernel_matrix(A, B, basis) -> np.ndarray:
    """Kernel estimates for all pairs of rows of ``A`` and ``B``."""
    G = basis.vectors
    PA = np.asarray(A, dtype=np.float64) @ G.T
    PB = np.asarray(B, dtype=np.float64) @ G.T
    D = G.shape[0]
    return (np.cos(PA) @ np.cos(PB).T + np.sin(PA) @ np.sin(PB).T) / D
