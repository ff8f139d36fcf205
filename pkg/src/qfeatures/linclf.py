"""L2-regularized linear SVM with squared hinge loss.

Minimizes ``0.5 ||w||^2 + C sum_j max(0, 1 - y_j (w.x_j + b))^2`` with an
unregularized bias, by primal Newton coordinate descent with an Armijo-type
line search on each coordinate. Every accepted step lowers the objective,
so the per-epoch objective is non-increasing. Features are stored
feature-major (M x N), matching the layout produced by the feature map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels

MODEL_FORMAT_VERSION = 1


class TrainingError(ValueError):
    pass


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    reg_C: float
    training_iters: int
    final_objective: float
    objective_history: list[float] = field(default_factory=list)

    def decision_function(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != self.weights.shape[0]:
            raise ValueError(f"model expects {self.weights.shape[0]} features, got {X.shape[0]}")
        return self.weights @ X + self.bias

    def save(self, path) -> None:
        doc = {
            "format": "qfeatures-linear-model",
            "version": MODEL_FORMAT_VERSION,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "reg_C": self.reg_C,
            "training_iters": self.training_iters,
            "final_objective": self.final_objective,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != "qfeatures-linear-model" or doc["version"] > MODEL_FORMAT_VERSION:
            raise ValueError(f"{path}: not a supported model file")
        return cls(np.array(doc["weights"], dtype=np.float64), doc["bias"], doc["reg_C"],
                   doc["training_iters"], doc["final_objective"])


def objective(X, y, w, b, C) -> float:
    margin = 1.0 - y * (w @ X + b)
    return 0.5 * float(w @ w) + C * float(np.sum(np.square(margin[margin > 0])))


def train(X, y, reg_C: float = 1.0, tol: float = 1e-4, max_iters: int = 1000, seed: int = 0,
          verbose: bool = False) -> LinearModel:
    """Fit on feature-major ``X`` (M x N) with labels ``y`` in {-1, +1}.

    Coordinates are visited in a fresh seeded permutation each epoch.
    Stops when the relative objective decrease over an epoch falls below
    ``tol`` or after ``max_iters`` epochs.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[1],):
        raise ValueError("X must be M x N with one label per column")
    if X.shape[1] < 2:
        raise TrainingError("need at least two points")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise TrainingError("training data contains a single class")
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature values")
    if not reg_C > 0:
        raise ValueError("reg_C must be positive")

    M, N = X.shape
    w = np.zeros(M)
    bias = np.zeros(1)
    margin = np.ones(N)
    # curvature bound per coordinate; the bias is the last coordinate
    hdiag = np.empty(M + 1)
    hdiag[:M] = 1.0 + 2.0 * reg_C * np.einsum("ij,ij->i", X, X)
    hdiag[M] = 2.0 * reg_C * N
    rng = np.random.default_rng(seed)

    history = [objective(X, y, w, 0.0, reg_C)]
    iters = 0
    for iters in range(1, max_iters + 1):
        order = rng.permutation(M + 1).astype(np.intp)
        moved = kernels.cd_epoch(X, y, w, bias, margin, float(reg_C), order, hdiag)
        # resync margins to avoid drift from incremental updates
        margin = np.ascontiguousarray(1.0 - y * (w @ X + bias[0]))
        obj = 0.5 * float(w @ w) + reg_C * float(np.sum(np.square(margin[margin > 0])))
        prev = history[-1]
        history.append(obj)
        if verbose:
            print(f"epoch {iters}: objective {obj:.6g}")
        if moved == 0 or (prev - obj) <= tol * max(abs(prev), 1e-300):
            break
    return LinearModel(w, float(bias[0]), float(reg_C), iters, history[-1], history)


def predict(model: LinearModel, features) -> np.ndarray:
    """Labels in {-1, +1}; a zero score maps to +1."""
    return np.where(model.decision_function(features) >= 0.0, 1, -1)


def accuracy(predicted, actual) -> float:
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape:
        raise ValueError("length mismatch")
    if p.size == 0:
        raise ValueError("empty label vectors")
    return float(np.count_nonzero(p == a)) / p.size


def holdout_split(n: int, seed: int, holdout: float = 1 / 7) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (fit, validation) column indices from a seeded permutation."""
    perm = np.random.default_rng(seed).permutation(n)
    n_val = min(n - 1, max(1, int(round(holdout * n))))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def select_reg_C(X_fit, y_fit, X_val, y_val, candidates, seed: int = 0, tol: float = 1e-4,
                 max_iters: int = 1000) -> tuple[float, dict[float, float]]:
    """Pick ``reg_C`` by validation accuracy; ties go to the smallest candidate."""
    scores = {}
    for C in sorted(float(c) for c in candidates):
        model = train(X_fit, y_fit, reg_C=C, tol=tol, max_iters=max_iters, seed=seed)
        scores[C] = accuracy(predict(model, X_val), np.asarray(y_val))
    best = max(scores, key=lambda c: (scores[c], -c))
    return best, scores
