"""Experiment orchestration: single runs, grid search and kernel checks."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dataio, featmap, fetch, kernels, linclf
from .ansatz import AnsatzParams, sample_basis

log = logging.getLogger(__name__)

RESULT_FORMAT_VERSION = 1
EXPECTED_POOLED_COUNT = {(3, 5): 13454}
HIST_BINS = 20
HIST_RANGE = (0.9, 1.0)

DEFAULT_GRID = {
    "layers": [7, 14, 21],
    "rotation_mean": [0.25 * math.pi, 0.5 * math.pi],
    "rotation_std": [0.05, 0.1, 0.2],
    "weight_std": [0.5, 1.0],
    "basis_size": [500, 1000, 2000, 4000, 8000],
}


class RunFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DataError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str | None = None
    mirror: str | None = None
    digits: tuple[int, int] = (3, 5)
    features: int = 128
    qubits: int = 7
    layers: int = 14
    rotation_mean: float = 0.5 * math.pi
    rotation_std: float = 0.1
    weight_std: float = 1.0
    basis_size: int = 8000
    basis: str = "quantum"  # quantum | gaussian | none
    bandwidth: float = 1.0
    shots: int = 0
    reg_C: float = 1.0
    reg_C_grid: tuple[float, ...] = ()
    tol: float = 1e-4
    max_iters: int = 1000
    basis_seed: int = 0
    split_seed: int = 0
    train_seed: int = 0
    pixel_scale: float = 255.0
    chi2_pooled: bool = False
    output_dir: str | None = "results"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        object.__setattr__(self, "reg_C_grid", tuple(float(c) for c in self.reg_C_grid))
        if self.basis not in ("quantum", "gaussian", "none"):
            raise ValueError(f"unknown basis source {self.basis!r}")
        if len(self.digits) != 2 or self.digits[0] == self.digits[1]:
            raise ValueError("digits must be two distinct values")
        if self.basis == "quantum" and self.features > 1 << self.qubits:
            raise ValueError(f"{self.features} features do not fit {self.qubits} qubits")
        if self.features < 1 or self.basis_size < 1 or self.shots < 0:
            raise ValueError("features, basis_size must be positive and shots non-negative")
        if not self.reg_C > 0 or any(c <= 0 for c in self.reg_C_grid):
            raise ValueError("regularization constants must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["digits"] = list(self.digits)
        d["reg_C_grid"] = list(self.reg_C_grid)
        return d

    def ansatz_params(self) -> AnsatzParams:
        return AnsatzParams(self.qubits, self.layers, self.rotation_mean, self.rotation_std,
                            self.weight_std, self.basis_size, self.basis_seed)


@dataclass
class RunResult:
    config: dict
    train_accuracy: float
    test_accuracy: float
    reg_C: float
    n_train: int
    n_test: int
    training_iters: int
    final_objective: float
    basis_fingerprint: str | None
    timings: dict = field(default_factory=dict)
    reg_C_scores: dict = field(default_factory=dict)
    backend: str = kernels.BACKEND
    timestamp: str = ""
    version: int = RESULT_FORMAT_VERSION

    def to_json(self) -> str:
        doc = asdict(self)
        doc["reg_C_scores"] = {repr(k): v for k, v in self.reg_C_scores.items()}
        return json.dumps(doc, sort_keys=True)


@contextmanager
def stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except RunFailure:
        raise
    except Exception as exc:
        raise RunFailure(name, exc) from exc
    timings[name] = round(time.perf_counter() - t0, 4)


_raw_cache: dict = {}
_task_cache: dict = {}
_cache_lock = threading.Lock()


def load_pooled(data_dir=None, mirror=None, digits=(3, 5)) -> dataio.RawDataset:
    """MNIST train and test pooled, restricted to ``digits`` (cached per process)."""
    key = (str(data_dir), tuple(digits))
    with _cache_lock:
        if key in _raw_cache:
            return _raw_cache[key]
    try:
        paths = fetch.fetch_data(data_dir, mirror)
        raw = dataio.concat(
            dataio.load_idx(paths[fetch.TRAIN_IMAGES], paths[fetch.TRAIN_LABELS]),
            dataio.load_idx(paths[fetch.TEST_IMAGES], paths[fetch.TEST_LABELS]),
        )
    except (OSError, ValueError, fetch.FetchError) as exc:
        raise DataError(str(exc)) from exc
    task = dataio.extract_binary_task(raw, *digits)
    expected = EXPECTED_POOLED_COUNT.get(tuple(digits))
    if expected is not None and len(task) != expected:
        log.warning("pooled digits %s: %d points, expected %d", digits, len(task), expected)
    absent = [d for d in digits if not np.any(task.labels == d)]
    if absent:
        raise DataError(f"no points for digit(s) {absent}")
    with _cache_lock:
        _raw_cache[key] = task
    return task


def clear_caches() -> None:
    with _cache_lock:
        _raw_cache.clear()
        _task_cache.clear()


def prepare_task(config: ExperimentConfig, raw: dataio.RawDataset | None = None):
    """Select features and split; returns (train, test) TaskDatasets."""
    if raw is None:
        raw = load_pooled(config.data_dir, config.mirror, config.digits)
    key = (config.features, config.pixel_scale, config.chi2_pooled, config.split_seed, config.digits)
    with _cache_lock:
        hit = _task_cache.get(key)
        if hit is not None and hit[0] is raw:
            return hit[1]
    tr, te = dataio.split_indices(len(raw), config.split_seed)
    binary = dataio.binary_labels(raw.labels, *config.digits)
    if config.chi2_pooled:
        selected = dataio.chi2_select(raw.images, binary, config.features)
    else:
        selected = dataio.chi2_select(raw.images[tr], binary[tr], config.features)
    task = dataio.to_feature_matrix(raw, selected, *config.digits, pixel_scale=config.pixel_scale)
    result = (dataclasses.replace(task.subset(tr), split_seed=config.split_seed),
              dataclasses.replace(task.subset(te), split_seed=config.split_seed))
    with _cache_lock:
        _task_cache.clear()  # one prepared task at a time bounds memory
        _task_cache[key] = (raw, result)
    return result


def build_basis(config: ExperimentConfig, dim: int):
    if config.basis == "quantum":
        return sample_basis(config.ansatz_params(), workers=config.workers,
                            keep_circuits=config.shots > 0)
    if config.basis == "gaussian":
        return featmap.sample_gaussian_basis(dim, config.basis_size, config.bandwidth, config.basis_seed)
    return None


def _map(config, F, basis, rng):
    if basis is None:
        return np.ascontiguousarray(F)
    if config.shots > 0:
        return featmap.map_dataset_by_simulation(F, basis, config.shots, rng).matrix
    return featmap.map_dataset(F, basis).matrix


def run_experiment(config: ExperimentConfig, raw: dataio.RawDataset | None = None,
                   write: bool = True) -> RunResult:
    """load -> select -> split -> basis -> map -> train -> map test -> score."""
    timings: dict = {}
    with stage("data", timings):
        train_set, test_set = prepare_task(config, raw)
    with stage("basis", timings):
        dim = 1 << config.qubits if config.basis == "quantum" else train_set.F.shape[0]
        basis = build_basis(config, dim)
    shot_rng = np.random.default_rng(config.basis_seed + 1) if config.shots else None

    scores: dict = {}
    reg_C = config.reg_C
    if config.reg_C_grid:
        with stage("select_C", timings):
            fit, val = linclf.holdout_split(len(train_set), config.train_seed)
            Xfit = _map(config, train_set.F[:, fit], basis, shot_rng)
            Xval = _map(config, train_set.F[:, val], basis, shot_rng)
            reg_C, scores = linclf.select_reg_C(Xfit, train_set.labels[fit], Xval, train_set.labels[val],
                                                config.reg_C_grid, config.train_seed, config.tol,
                                                config.max_iters)
            del Xfit, Xval

    with stage("map_train", timings):
        Xtr = _map(config, train_set.F, basis, shot_rng)
    with stage("train", timings):
        model = linclf.train(Xtr, train_set.labels, reg_C, config.tol, config.max_iters, config.train_seed)
        train_acc = linclf.accuracy(linclf.predict(model, Xtr), train_set.labels)
    del Xtr
    with stage("map_test", timings):
        Xte = _map(config, test_set.F, basis, shot_rng)
    with stage("predict", timings):
        test_acc = linclf.accuracy(linclf.predict(model, Xte), test_set.labels)

    result = RunResult(
        config=config.to_dict(),
        train_accuracy=train_acc,
        test_accuracy=test_acc,
        reg_C=reg_C,
        n_train=len(train_set),
        n_test=len(test_set),
        training_iters=model.training_iters,
        final_objective=model.final_objective,
        basis_fingerprint=basis.fingerprint() if basis is not None else None,
        timings=timings,
        reg_C_scores=scores,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    if write and config.output_dir:
        append_result(result, config.output_dir)
    return result


def replay(record: dict | str, **overrides) -> RunResult:
    """Re-run the config snapshot stored in a RunResult record."""
    if isinstance(record, str):
        record = json.loads(record)
    doc = dict(record["config"])
    doc.update(overrides)
    return run_experiment(ExperimentConfig.from_dict(doc), write=False)


CSV_FIELDS = ["timestamp", "basis", "basis_size", "layers", "rotation_mean", "rotation_std",
              "weight_std", "bandwidth", "reg_C", "basis_seed", "split_seed", "train_seed",
              "train_accuracy", "test_accuracy", "basis_fingerprint", "backend"]
_write_lock = threading.Lock()


def _csv_row(result: RunResult) -> dict:
    c = result.config
    row = {k: c.get(k) for k in CSV_FIELDS if k in c}
    row.update(timestamp=result.timestamp, reg_C=result.reg_C, train_accuracy=result.train_accuracy,
               test_accuracy=result.test_accuracy, basis_fingerprint=result.basis_fingerprint,
               backend=result.backend)
    return row


def append_result(result: RunResult, output_dir) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _write_lock:
        with open(out / "runs.jsonl", "a") as fh:
            fh.write(result.to_json() + "\n")
        csv_path = out / "runs.csv"
        new = not csv_path.exists()
        with open(csv_path, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            if new:
                w.writeheader()
            w.writerow(_csv_row(result))


def expand_grid(grid: dict, base: ExperimentConfig) -> list[ExperimentConfig]:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must have at least one value per axis")
    names = list(grid)
    return [dataclasses.replace(base, **dict(zip(names, combo)))
            for combo in itertools.product(*(grid[n] for n in names))]


def _grid_cell(config: ExperimentConfig) -> dict:
    try:
        r = run_experiment(config, write=False)
        return {"result": r, "error": None}
    except Exception as exc:  # recorded; the search goes on
        return {"result": None, "error": f"{type(exc).__name__}: {exc}"}


def grid_search(grid: dict, base: ExperimentConfig, jobs: int = 1, output_dir=None) -> list[dict]:
    """Run every combination of ``grid`` over ``base``.

    Returns one row per cell, sorted by the grid values. When an output
    directory is given, writes grid.csv, summary.csv, histograms.txt and
    appends each successful run to runs.jsonl / runs.csv.
    """
    names = list(grid)
    configs = expand_grid(grid, base)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(_grid_cell, configs))
    else:
        outcomes = [_grid_cell(c) for c in configs]

    rows = []
    for cfg, out in zip(configs, outcomes):
        row = {n: getattr(cfg, n) for n in names}
        r = out["result"]
        row.update(
            train_accuracy=r.train_accuracy if r else None,
            test_accuracy=r.test_accuracy if r else None,
            reg_C=r.reg_C if r else None,
            basis_fingerprint=r.basis_fingerprint if r else None,
            error=out["error"],
        )
        rows.append(row)
        if r is not None and output_dir:
            append_result(r, output_dir)
    rows.sort(key=lambda row: tuple(_sort_key(row[n]) for n in names))
    if output_dir:
        write_grid_outputs(rows, names, output_dir)
    return rows


def _sort_key(v):
    return (0, v) if isinstance(v, (int, float)) else (1, str(v))


def summarize(rows: list[dict], key: str = "basis_size") -> list[dict]:
    """Per-``key`` count, best, min, max and mean of successful test accuracies."""
    groups: dict = {}
    for row in rows:
        if row.get("test_accuracy") is not None:
            groups.setdefault(row.get(key), []).append(row["test_accuracy"])
    return [{key: k, "runs": len(v), "best": max(v), "min": min(v), "max": max(v),
             "mean": float(np.mean(v))} for k, v in sorted(groups.items(), key=lambda kv: _sort_key(kv[0]))]


def histograms(rows: list[dict], key: str = "basis_size", bins: int = HIST_BINS,
               value_range=HIST_RANGE) -> dict:
    """Binned test-accuracy counts per ``key``; values below the range are counted separately."""
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    out = {}
    for k in {row.get(key) for row in rows}:
        vals = np.array([r["test_accuracy"] for r in rows
                         if r.get(key) == k and r.get("test_accuracy") is not None])
        counts, _ = np.histogram(vals[vals >= value_range[0]], bins=edges)
        out[k] = {"edges": edges.tolist(), "counts": counts.tolist(),
                  "below": int(np.sum(vals < value_range[0]))}
    return out


def write_grid_outputs(rows: list[dict], names: list[str], output_dir) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fields = names + ["train_accuracy", "test_accuracy", "reg_C", "basis_fingerprint", "error"]
    with open(out / "grid.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    summary = summarize(rows)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["basis_size", "runs", "best", "min", "max", "mean"])
        w.writeheader()
        w.writerows(summary)
    hist = histograms(rows)
    with open(out / "histograms.txt", "w") as fh:
        fh.write(f"# format qfeatures-histograms version {RESULT_FORMAT_VERSION}\n")
        fh.write(f"# {HIST_BINS} bins over [{HIST_RANGE[0]}, {HIST_RANGE[1]}]\n")
        for k in sorted(hist, key=_sort_key):
            h = hist[k]
            fh.write(f"basis_size={k} below={h['below']}\n")
            last = len(h["counts"]) - 1
            for i, (lo, hi, c) in enumerate(zip(h["edges"][:-1], h["edges"][1:], h["counts"])):
                close = "]" if i == last else ")"  # the top bin includes 1.0
                fh.write(f"  [{lo:.3f}, {hi:.3f}{close} {c}\n")


def ball_points(n: int, d: int, diameter: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in a d-ball of the given diameter centred at 0."""
    x = rng.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    r = (diameter / 2) * rng.random(n) ** (1.0 / d)
    return x * r[:, None]


def kernel_check(d: int, D_list, bandwidth: float = 1.0, pairs: int = 100, seed: int = 0,
                 diameter: float = 2.0, identical: bool = False) -> list[dict]:
    """Gaussian-basis kernel estimate against ``exp(-bandwidth^2 r^2 / 2)``.

    The same point pairs are used for every ``D``; each ``D`` gets its own
    basis drawn from a seed derived from ``seed``.
    """
    rng = np.random.default_rng(seed)
    A = ball_points(pairs, d, diameter, rng)
    B = A.copy() if identical else ball_points(pairs, d, diameter, rng)
    r2 = np.sum((A - B) ** 2, axis=1)
    exact = np.exp(-(bandwidth ** 2) * r2 / 2)
    rows = []
    for D in D_list:
        basis_seed = int(np.random.SeedSequence([seed, int(D)]).generate_state(1)[0])
        basis = featmap.sample_gaussian_basis(d, int(D), bandwidth, basis_seed)
        est = np.array([featmap.approx_kernel(a, b, basis) for a, b in zip(A, B)])
        err = np.abs(est - exact)
        rows.append({"D": int(D), "max_error": float(err.max()), "mean_error": float(err.mean())})
    return rows
