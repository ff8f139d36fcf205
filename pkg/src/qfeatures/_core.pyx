# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: real Ry/CNOT gate application and one primal coordinate
descent epoch for the squared-hinge linear SVM.

Signatures mirror :mod:`qfeatures._fallback` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND = "compiled"

cdef enum:
    KIND_RY = 0
    KIND_CNOT = 1


cdef void _ry(double* amp, Py_ssize_t n, Py_ssize_t stride, double c, double s) noexcept nogil:
    cdef Py_ssize_t base, i, i1
    cdef double a0, a1
    base = 0
    while base < n:
        for i in range(base, base + stride):
            i1 = i + stride
            a0 = amp[i]
            a1 = amp[i1]
            amp[i] = c * a0 + s * a1
            amp[i1] = c * a1 - s * a0
        base += 2 * stride


cdef void _cnot(double* amp, Py_ssize_t n, Py_ssize_t cstride, Py_ssize_t tstride) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double t
    for i in range(n):
        # control bit set, target bit clear: swap with the target-set partner
        if (i & cstride) and not (i & tstride):
            j = i | tstride
            t = amp[i]
            amp[i] = amp[j]
            amp[j] = t


def run_gates(double[:, ::1] states, int k,
              const unsigned char[::1] kinds,
              const Py_ssize_t[::1] q1,
              const Py_ssize_t[::1] q2,
              const double[::1] angles):
    """Apply a gate list in place to every row of ``states`` (shape B x 2^k)."""
    cdef Py_ssize_t n = states.shape[1]
    cdef Py_ssize_t nb = states.shape[0]
    cdef Py_ssize_t g, r, ng = kinds.shape[0]
    cdef double c, s
    cdef double* row
    if n != (<Py_ssize_t>1 << k):
        raise ValueError("state length does not match qubit count")
    with nogil:
        for r in range(nb):
            row = &states[r, 0]
            for g in range(ng):
                if kinds[g] == KIND_RY:
                    c = cos(angles[g])
                    s = sin(angles[g])
                    _ry(row, n, <Py_ssize_t>1 << (k - q1[g]), c, s)
                else:
                    _cnot(row, n, <Py_ssize_t>1 << (k - q1[g]),
                          <Py_ssize_t>1 << (k - q2[g]))


def cd_epoch(const double[:, ::1] X, const double[::1] y, double[::1] w,
             double[::1] bias, double[::1] margin, double C,
             const Py_ssize_t[::1] order, const double[::1] hdiag,
             double sigma=0.01, double beta=0.5, int max_steps=30):
    """One pass of primal Newton coordinate descent over ``order``.

    ``X`` is feature-major (M x N). ``margin[i] = 1 - y_i (w.x_i + b)`` is
    kept current. Coordinate ``M`` is the unregularized bias. ``hdiag[j]``
    bounds the second derivative of coordinate ``j`` (used to skip the line
    search). Returns the number of coordinates that moved.
    """
    cdef Py_ssize_t M = X.shape[0], N = X.shape[1]
    cdef Py_ssize_t t, j, i, step, moved = 0
    cdef double g, h, d, z, lam, wj, reg, bnew, delta, bi, yx
    cdef const double* xj
    with nogil:
        for t in range(order.shape[0]):
            j = order[t]
            g = 0.0
            h = 0.0
            if j < M:
                xj = &X[j, 0]
                wj = w[j]
                reg = 1.0
                for i in range(N):
                    bi = margin[i]
                    if bi > 0.0:
                        yx = y[i] * xj[i]
                        g -= yx * bi
                        h += xj[i] * xj[i]
            else:
                xj = NULL
                wj = 0.0
                reg = 0.0
                for i in range(N):
                    bi = margin[i]
                    if bi > 0.0:
                        g -= y[i] * bi
                        h += 1.0
            g = reg * wj + 2.0 * C * g
            h = reg + 2.0 * C * h
            if h <= 0.0 or g == 0.0:
                continue
            d = -g / h
            lam = 1.0
            z = 0.0
            for step in range(max_steps):
                z = lam * d
                if lam <= h / (hdiag[j] / 2.0 + sigma):
                    break
                # exact objective change along the coordinate
                delta = reg * (wj * z + 0.5 * z * z)
                for i in range(N):
                    bi = margin[i]
                    yx = y[i] * (xj[i] if xj != NULL else 1.0)
                    bnew = bi - z * yx
                    if bnew > 0.0:
                        delta += C * bnew * bnew
                    if bi > 0.0:
                        delta -= C * bi * bi
                if delta <= -sigma * z * z:
                    break
                lam *= beta
                z = 0.0
            if z == 0.0:
                continue
            if j < M:
                w[j] += z
                for i in range(N):
                    margin[i] -= z * y[i] * xj[i]
            else:
                bias[0] += z
                for i in range(N):
                    margin[i] -= z * y[i]
            moved += 1
    return moved


def project(const double[:, ::1] G, const double[:, ::1] F, double[:, ::1] out, Py_ssize_t block=256):
    """``out = G @ F`` with every entry summed over the inner index in ascending order.

    The fixed order makes each entry independent of how columns are blocked.
    """
    cdef Py_ssize_t D = G.shape[0], d = G.shape[1], N = F.shape[1]
    cdef Py_ssize_t i, k, j, j0, j1
    cdef double g
    cdef double* o
    cdef const double* f
    if F.shape[0] != d or out.shape[0] != D or out.shape[1] != N:
        raise ValueError("shape mismatch in project")
    if block < 1:
        raise ValueError("block must be positive")
    j0 = 0
    with nogil:
        while j0 < N:
            j1 = j0 + block
            if j1 > N:
                j1 = N
            for i in range(D):
                o = &out[i, 0]
                for j in range(j0, j1):
                    o[j] = 0.0
                for k in range(d):
                    g = G[i, k]
                    f = &F[k, 0]
                    for j in range(j0, j1):
                        o[j] += g * f[j]
            j0 = j1
