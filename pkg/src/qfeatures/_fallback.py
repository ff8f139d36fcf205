"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

Used when the extension is not built or ``QFEATURES_PURE_PYTHON=1``.
"""

import numpy as np

BACKEND = "python"

KIND_RY = 0
KIND_CNOT = 1


def _ry(states, k, qubit, c, s):
    # view each row as (high bits, qubit bit, low bits)
    v = states.reshape(states.shape[0], 1 << (qubit - 1), 2, 1 << (k - qubit))
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = c * a0 + s * a1
    v[:, :, 1, :] = c * a1 - s * a0


def _cnot(states, k, control, target):
    n = 1 << k
    idx = np.arange(n)
    cbit = 1 << (k - control)
    tbit = 1 << (k - target)
    src = np.where(idx & cbit, idx ^ tbit, idx)
    states[:] = states[:, src]


def run_gates(states, k, kinds, q1, q2, angles):
    """Apply a gate list in place to every row of ``states`` (shape B x 2^k)."""
    if states.shape[1] != 1 << k:
        raise ValueError("state length does not match qubit count")
    for kind, a, b, angle in zip(kinds, q1, q2, angles):
        if kind == KIND_RY:
            _ry(states, k, int(a), np.cos(angle), np.sin(angle))
        else:
            _cnot(states, k, int(a), int(b))


def cd_epoch(X, y, w, bias, margin, C, order, hdiag, sigma=0.01, beta=0.5, max_steps=30):
    """One pass of primal Newton coordinate descent; see ``_core.cd_epoch``."""
    M, N = X.shape
    ones = np.ones(N)
    moved = 0
    for j in order:
        if j < M:
            xj, wj, reg = X[j], w[j], 1.0
        else:
            xj, wj, reg = ones, 0.0, 0.0
        active = margin > 0.0
        xa = xj[active]
        g = reg * wj - 2.0 * C * np.dot(y[active] * xa, margin[active])
        h = reg + 2.0 * C * np.dot(xa, xa)
        if h <= 0.0 or g == 0.0:
            continue
        d = -g / h
        lam = 1.0
        z = 0.0
        yx = y * xj
        for _ in range(max_steps):
            z = lam * d
            if lam <= h / (hdiag[j] / 2.0 + sigma):
                break
            bnew = margin - z * yx
            delta = reg * (wj * z + 0.5 * z * z)
            delta += C * (np.sum(np.square(bnew[bnew > 0.0])) - np.sum(np.square(margin[active])))
            if delta <= -sigma * z * z:
                break
            lam *= beta
            z = 0.0
        if z == 0.0:
            continue
        if j < M:
            w[j] += z
        else:
            bias[0] += z
        margin -= z * yx
        moved += 1
    return moved


def project(G, F, out, block=64):
    """``out = G @ F`` summed over the inner index in ascending order."""
    D, d = G.shape
    if F.shape[0] != d or out.shape != (D, F.shape[1]):
        raise ValueError("shape mismatch in project")
    for j0 in range(0, F.shape[1], block):
        o = out[:, j0:j0 + block]
        o[...] = 0.0
        for k in range(d):
            o += G[:, k:k + 1] * F[k, j0:j0 + block]
