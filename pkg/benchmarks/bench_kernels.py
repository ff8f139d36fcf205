"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Workloads are sized like the MNIST experiment (7 qubits, 128 input
features, 11532 training points) but scaled down so each backend finishes
in seconds.
"""

import argparse
import time

import numpy as np

from qfeatures import _fallback, kernels
from qfeatures.ansatz import AnsatzParams, sample_circuit


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def gates_workload(rng):
    params = AnsatzParams()
    circuits = [sample_circuit(params, rng) for _ in range(50)]
    states = rng.normal(size=(64, 1 << params.qubits))

    def run(mod):
        s = states.copy()
        for c in circuits:
            mod.run_gates(s, c.k, *c.arrays)

    return "run_gates: 50 circuits x 64 states, k=7, L=14", run


def cd_workload(rng):
    M, N = 400, 11532
    X = rng.normal(size=(M, N)) / np.sqrt(M)
    y = np.where(rng.random(N) < 0.5, -1.0, 1.0)
    hdiag = np.append(1 + 2 * np.sum(X * X, axis=1), 2.0 * N)
    order = rng.permutation(M + 1).astype(np.intp)

    def run(mod):
        w, b, margin = np.zeros(M), np.zeros(1), np.ones(N)
        mod.cd_epoch(X, y, w, b, margin, 1.0, order, hdiag)

    return f"cd_epoch: one epoch, {M} features x {N} points", run


def project_workload(rng):
    G = rng.normal(size=(1000, 128))
    F = rng.random((128, 2048))
    out = np.empty((1000, 2048))

    def run(mod):
        mod.project(G, F, out)

    return "project: 1000 x 128 basis times 128 x 2048 points", run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    core = kernels.compiled()
    if core is None:
        print("compiled extension not built; only the fallback can be timed")
    rng = np.random.default_rng(0)
    print(f"{'workload':52s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for make in (gates_workload, cd_workload, project_workload):
        name, run = make(rng)
        t_py = best_of(lambda: run(_fallback), args.repeat)
        if core is None:
            print(f"{name:52s} {t_py:10.4f} {'-':>10s} {'-':>8s}")
            continue
        t_c = best_of(lambda: run(core), args.repeat)
        print(f"{name:52s} {t_py:10.4f} {t_c:10.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
