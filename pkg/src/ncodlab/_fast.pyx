# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled minibatch kernel. Same contract as ``ncodlab._reference.ncod_batch``.

Plain loops with a fixed summation order: every pre-activation sums its
inputs in index order, and per-parameter gradients accumulate samples in index
order. Activations are stored feature-major so the inner loops run over the
batch and the compiler can vectorize them without reordering any sum. Results
are independent of BLAS and threading and agree with the numpy backend to
rounding error.
"""

import numpy as np

from libc.math cimport exp, log, sqrt
from libc.string cimport memset

from .errors import EmptyBatch

NAME = "compiled"

cdef double LOG_EPS = 1e-12
cdef double ZERO_NORM = 1e-30


cdef inline double _safe_log(double v) noexcept nogil:
    return log(v if v > LOG_EPS else LOG_EPS)


cdef extern from "_tile.h" nogil:
    void _tile_product "ncod_tile_product"(
        Py_ssize_t R, Py_ssize_t V, Py_ssize_t J, const double* A, Py_ssize_t sr,
        Py_ssize_t sj, const double* X, Py_ssize_t ldx, double* out, Py_ssize_t ldo,
        bint accumulate)

cdef enum:
    VB = 8   # batch padding, one register tile wide


cdef void _forward(const double* params, const Py_ssize_t* dims, const Py_ssize_t* poff,
                   const Py_ssize_t* aoff, Py_ssize_t L, const double* x, Py_ssize_t B,
                   Py_ssize_t Bp, double* actsT) noexcept nogil:
    # actsT is feature-major with Bp >= B columns (padding columns stay finite):
    # rows a_0 (= x), a_1 .. a_{L-1} (post-ReLU), logits.
    cdef Py_ssize_t l, o, i, k, nin, nout, d0 = dims[0]
    cdef const double* W
    cdef double* out
    cdef double bo
    for i in range(d0):
        for k in range(B):
            actsT[i * Bp + k] = x[k * d0 + i]
        for k in range(B, Bp):
            actsT[i * Bp + k] = 0.0
    for l in range(L):
        nin = dims[l]
        nout = dims[l + 1]
        W = params + poff[l]
        _tile_product(nout, Bp, nin, W, nin, 1, actsT + aoff[l] * Bp, Bp,
                      actsT + aoff[l + 1] * Bp, Bp, False)
        for o in range(nout):
            out = actsT + (aoff[l + 1] + o) * Bp
            bo = W[nout * nin + o]
            for k in range(Bp):
                out[k] += bo
            if l < L - 1:
                for k in range(Bp):
                    if out[k] < 0.0:
                        out[k] = 0.0


cdef void _softmax(const double* z, Py_ssize_t C, double* out) noexcept nogil:
    cdef Py_ssize_t j
    cdef double m = z[0], tot = 0.0
    for j in range(1, C):
        if z[j] > m:
            m = z[j]
    for j in range(C):
        out[j] = exp(z[j] - m)
        tot += out[j]
    for j in range(C):
        out[j] /= tot


cdef void _backward(const double* params, const Py_ssize_t* dims, const Py_ssize_t* poff,
                    const Py_ssize_t* aoff, Py_ssize_t L, const double* actsT, Py_ssize_t B,
                    Py_ssize_t Bp, double* curT, double* nxtT, double* rows,
                    double* grad) noexcept nogil:
    # curT (feature-major, units x Bp) holds d loss / d logits on entry, zero in
    # padding columns; curT, nxtT and rows (B x widest scratch) are clobbered.
    # Gradients are added to grad; each entry sums its samples in index order.
    cdef Py_ssize_t l, o, i, k, nin, nout
    cdef const double* W
    cdef const double* src
    cdef double* gW
    cdef double* n
    cdef double* tmp
    cdef double acc
    for l in range(L - 1, -1, -1):
        nin = dims[l]
        nout = dims[l + 1]
        W = params + poff[l]
        gW = grad + poff[l]
        # sample-major copy of the layer input: gW[o, i] += sum_k d[o, k] * a[k, i]
        for i in range(nin):
            src = actsT + (aoff[l] + i) * Bp
            for k in range(B):
                rows[k * nin + i] = src[k]
        _tile_product(nout, nin, B, curT, Bp, 1, rows, nin, gW, nin, True)
        for o in range(nout):
            src = curT + o * Bp
            acc = 0.0
            for k in range(B):
                acc += src[k]
            gW[nout * nin + o] += acc
        if l == 0:
            break
        # d a[i, k] = sum_o W[o, i] * d[o, k], then the ReLU mask
        _tile_product(nin, Bp, nout, W, 1, nin, curT, Bp, nxtT, Bp, False)
        for i in range(nin):
            src = actsT + (aoff[l] + i) * Bp
            n = nxtT + i * Bp
            for k in range(Bp):
                if not src[k] > 0.0:
                    n[k] = 0.0
        tmp = curT
        curT = nxtT
        nxtT = tmp


def ncod_batch(params, dims, x, labels, u, centroids, x_aug, lambda_c, lambda_b, soft_labels, grad):
    """Same contract and keyword names as ``ncodlab._reference.ncod_batch``."""
    if len(x) == 0:
        raise EmptyBatch("ncod_batch needs at least one sample")
    return _ncod_batch(params, dims, x, labels, u, centroids, x_aug, lambda_c, lambda_b, soft_labels, grad)


def _ncod_batch(const double[::1] params, dims_in, const double[:, ::1] x, labels_in,
                const double[::1] u, const double[:, ::1] centroids, x_aug_in,
                double lambda_c, double lambda_b, bint soft_labels, double[::1] grad):
    cdef Py_ssize_t[::1] dims = np.ascontiguousarray(dims_in, dtype=np.intp)
    cdef Py_ssize_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.intp)
    cdef Py_ssize_t L = dims.shape[0] - 1
    cdef Py_ssize_t B = x.shape[0]
    cdef Py_ssize_t C = dims[L]
    cdef Py_ssize_t E = dims[L - 1]
    cdef Py_ssize_t l, i, j, k, c, S, Wd

    cdef Py_ssize_t[::1] poff = np.zeros(L, dtype=np.intp)
    cdef Py_ssize_t[::1] aoff = np.zeros(L + 1, dtype=np.intp)
    Wd = 0
    for l in range(L):
        if l + 1 < L:
            poff[l + 1] = poff[l] + dims[l + 1] * dims[l] + dims[l + 1]
        aoff[l + 1] = aoff[l] + dims[l]
    for l in range(L + 1):
        if dims[l] > Wd:
            Wd = dims[l]
    S = aoff[L] + C

    cdef bint has_aug = x_aug_in is not None
    cdef const double[:, ::1] x_aug
    if has_aug:
        x_aug = x_aug_in
    # feature-major activations and logit gradients: [unit, sample], batch padded to VB
    cdef Py_ssize_t Bp = (B + VB - 1) // VB * VB
    cdef double[:, ::1] acts = np.empty((S, Bp))
    cdef double[:, ::1] aug_acts = np.empty((S if has_aug else 1, Bp))
    cdef double[:, ::1] cur = np.zeros((Wd, Bp))
    cdef double[:, ::1] nxt = np.zeros((Wd, Bp))
    cdef double[::1] rows = np.empty(B * Wd)
    cdef double[:, ::1] P = np.empty((B, C))
    cdef double[::1] z = np.empty(C)
    cdef double[::1] Q = np.empty(C)
    cdef double[::1] pbar = np.zeros(C)
    cdef double[::1] q = np.zeros(C)
    cdef double[::1] dq = np.zeros(C)
    probs_c_np = np.empty(B)
    sims_np = np.empty(B)
    cdef double[::1] probs_c = probs_c_np
    cdef double[::1] sims = sims_np

    cdef double invB = 1.0 / B, invC = 1.0 / C
    cdef double l1_sum = 0.0, l2_sum = 0.0, lc_sum = 0.0, l_b = 0.0
    cdef double nrm, dt, s, pc, shifted, g, r, acc, ql, pj, qdot, e
    cdef Py_ssize_t eoff = aoff[L - 1], loff = aoff[L]

    grad[:] = 0.0
    with nogil:
        _forward(&params[0], &dims[0], &poff[0], &aoff[0], L, &x[0, 0], B, Bp, &acts[0, 0])
        for k in range(B):
            for j in range(C):
                z[j] = acts[loff + j, k]
            _softmax(&z[0], C, &P[k, 0])
            c = labels[k]
            nrm = 0.0
            dt = 0.0
            for i in range(E):
                e = acts[eoff + i, k]
                nrm += e * e
                dt += e * centroids[c, i]
            nrm = sqrt(nrm)
            sims[k] = dt / nrm if nrm > ZERO_NORM else 0.0
            pc = P[k, c]
            probs_c[k] = pc
            if soft_labels:
                s = sims[k] if sims[k] > 0.0 else 0.0
                l1_sum += -s * _safe_log(pc + u[k])
            else:
                l1_sum += -_safe_log(pc)
            for j in range(C):
                r = P[k, j] + (u[k] - 1.0 if j == c else 0.0)
                l2_sum += r * r
            for j in range(C):
                pbar[j] += P[k, j]

        for j in range(C):
            pbar[j] *= invB
            l_b += invC * (log(invC) - _safe_log(pbar[j]))
            q[j] = -invC / pbar[j] if pbar[j] > LOG_EPS else 0.0

        # logit gradients of the original view
        for k in range(B):
            c = labels[k]
            pc = P[k, c]
            if soft_labels:
                s = sims[k] if sims[k] > 0.0 else 0.0
                shifted = pc + u[k]
                g = -s / shifted if (s != 0.0 and shifted > LOG_EPS) else 0.0
                for j in range(C):
                    cur[j, k] = -g * pc * P[k, j]
                cur[c, k] += g * pc
            else:
                for j in range(C):
                    cur[j, k] = P[k, j]
                cur[c, k] -= 1.0
            if lambda_b != 0.0:
                qdot = 0.0
                for j in range(C):
                    qdot += q[j] * P[k, j]
                for j in range(C):
                    cur[j, k] += lambda_b * P[k, j] * (q[j] - qdot)
            for j in range(C):
                cur[j, k] *= invB
        _backward(&params[0], &dims[0], &poff[0], &aoff[0], L, &acts[0, 0], B, Bp,
                  &cur[0, 0], &nxt[0, 0], &rows[0], &grad[0])

        if has_aug:
            _forward(&params[0], &dims[0], &poff[0], &aoff[0], L, &x_aug[0, 0], B, Bp, &aug_acts[0, 0])
            for k in range(B):
                for j in range(C):
                    z[j] = aug_acts[loff + j, k]
                _softmax(&z[0], C, &Q[0])
                acc = 0.0
                for j in range(C):
                    pj = P[k, j]
                    acc += pj * (_safe_log(pj) - _safe_log(Q[j]))
                lc_sum += acc
                if lambda_c != 0.0:
                    qdot = 0.0
                    for j in range(C):
                        ql = -P[k, j] / Q[j] if Q[j] > LOG_EPS else 0.0
                        dq[j] = ql
                        qdot += ql * Q[j]
                    for j in range(C):
                        cur[j, k] = (lambda_c * invB) * Q[j] * (dq[j] - qdot)
            if lambda_c != 0.0:
                _backward(&params[0], &dims[0], &poff[0], &aoff[0], L, &aug_acts[0, 0], B, Bp,
                          &cur[0, 0], &nxt[0, 0], &rows[0], &grad[0])

    return (l1_sum * invB, l2_sum * invB, lc_sum * invB if has_aug else 0.0, l_b,
            probs_c_np, sims_np)
