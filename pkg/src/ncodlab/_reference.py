"""Pure numpy minibatch kernel; the fallback when the compiled core is absent.

Both backends expose the same ``ncod_batch`` signature and must agree to
rounding error. This one is also the arithmetic reference: in cross-entropy
mode it performs exactly the operations of textbook softmax-CE SGD.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyBatch
from .numerics import LOG_EPS, ZERO_NORM, safe_log, softmax

NAME = "python"


def _views(params, dims):
    weights, biases, off = [], [], 0
    for l in range(len(dims) - 1):
        n_in, n_out = int(dims[l]), int(dims[l + 1])
        weights.append(params[off:off + n_out * n_in].reshape(n_out, n_in))
        off += n_out * n_in
        biases.append(params[off:off + n_out])
        off += n_out
    return weights, biases


def _forward(weights, biases, x):
    posts, pres = [x], []
    a = x
    L = len(weights)
    for l in range(L):
        z = a @ weights[l].T + biases[l]
        pres.append(z)
        if l < L - 1:
            a = np.maximum(z, 0.0)
            posts.append(a)
    return posts, pres


def _backward(weights, posts, pres, d, gW, gb, accumulate):
    for l in range(len(weights) - 1, -1, -1):
        if accumulate:
            gW[l] += d.T @ posts[l]
            gb[l] += d.sum(axis=0)
        else:
            gW[l][...] = d.T @ posts[l]
            gb[l][...] = d.sum(axis=0)
        if l > 0:
            d = (d @ weights[l]) * (pres[l - 1] > 0)


def _softmax_backward(P, dP):
    """Logit gradient from a probability gradient, row-wise."""
    return P * (dP - np.sum(dP * P, axis=1, keepdims=True))


def ncod_batch(params, dims, x, labels, u, centroids, x_aug, lambda_c, lambda_b,
               soft_labels, grad):
    """Mean-reduced network gradient for one minibatch.

    Writes ``d(mean L1 + lambda_c * mean L_C + lambda_b * L_B)/d(theta)`` into
    ``grad`` and returns ``(l1, l2, l_c, l_b, probs_c, sims)`` where the first
    four are batch means, ``probs_c`` is the labeled-class probability per
    sample and ``sims`` the raw cosine to the labeled centroid.

    With ``soft_labels`` false the soft label is one-hot, the logit gradient
    is ``probs - onehot`` and ``u`` enters only the reported ``l2``.
    """
    if len(x) == 0:
        raise EmptyBatch("ncod_batch needs at least one sample")
    weights, biases = _views(params, dims)
    gW, gb = _views(grad, dims)
    B = x.shape[0]
    rows = np.arange(B)

    posts, pres = _forward(weights, biases, x)
    P = softmax(pres[-1])
    C = P.shape[1]
    emb = posts[-1]
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    raw = np.einsum("ij,ij->i", emb, centroids[labels])
    ok = norms > ZERO_NORM
    sims = np.where(ok, raw / np.where(ok, norms, 1.0), 0.0)
    pc = P[rows, labels]

    if soft_labels:
        s = np.maximum(sims, 0.0)
        shifted = pc + u
        l1 = -s * safe_log(shifted)
        active = (s != 0.0) & (shifted > LOG_EPS)
        g = np.where(active, -s / np.where(active, shifted, 1.0), 0.0)
        D = -(g * pc)[:, None] * P
        D[rows, labels] += g * pc
    else:
        l1 = -safe_log(pc)
        D = P.copy()
        D[rows, labels] -= 1.0

    R = P.copy()
    R[rows, labels] += u - 1.0
    l2 = np.sum(R * R, axis=1)

    pbar = P.mean(axis=0)
    l_b = float(np.sum((1.0 / C) * (np.log(1.0 / C) - safe_log(pbar))))
    if lambda_b != 0.0:
        q = np.where(pbar > LOG_EPS, -(1.0 / C) / np.maximum(pbar, LOG_EPS), 0.0)
        D += lambda_b * _softmax_backward(P, np.broadcast_to(q, P.shape))

    D = D / B
    _backward(weights, posts, pres, D, gW, gb, accumulate=False)

    l_c = 0.0
    if x_aug is not None:
        aposts, apres = _forward(weights, biases, x_aug)
        Q = softmax(apres[-1])
        lc = np.sum(P * (safe_log(P) - safe_log(Q)), axis=1)
        l_c = float(lc.mean())
        if lambda_c != 0.0:
            dQ = np.where(Q > LOG_EPS, -P / np.maximum(Q, LOG_EPS), 0.0)
            Da = (lambda_c / B) * _softmax_backward(Q, dQ)
            _backward(weights, aposts, apres, Da, gW, gb, accumulate=True)

    return float(l1.mean()), float(l2.mean()), l_c, l_b, pc, sims
