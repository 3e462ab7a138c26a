"""Minibatch kernel: finite-difference check of the full objective, backend parity."""

import numpy as np
import pytest

from ncodlab import kernels
from ncodlab.model import init_model
from ncodlab.ncod_loss import class_balance_reg, consistency_reg, loss_l1, loss_l2
from ncodlab.numerics import Rng

from conftest import central_diff, max_rel_err, oracle_forward


def make_case(seed, dims=(4, 6, 5, 3), B=5):
    r = Rng(seed, "kernel-case")
    m = init_model(dims, r)
    m.flat[:] += 0.05 * r.normal(size=m.flat.size)
    x = r.normal(size=(B, dims[0]))
    xa = x + 0.3 * r.normal(size=x.shape)
    y = r.integers(0, dims[-1], size=B)
    u = 0.4 * r.uniform(B)
    cent = r.normal(size=(dims[-1], dims[-2]))
    cent /= np.linalg.norm(cent, axis=1, keepdims=True)
    return m, np.array(dims, dtype=np.intp), x, xa, y, u, cent


def objective(params, dims, x, xa, y, u, soft, lam_c, lam_b):
    P = np.array([oracle_forward(params, dims, xi)[1] for xi in x])
    l1 = np.mean([loss_l1(P[i], u[i], y[i], soft[i]) for i in range(len(x))])
    total = l1 + lam_b * class_balance_reg(P)
    if xa is not None:
        Q = [oracle_forward(params, dims, xi)[1] for xi in xa]
        # the original view is a fixed target: only the augmented branch varies
        P0 = objective.P0
        total += lam_c * np.mean([consistency_reg(P0[i], Q[i]) for i in range(len(x))])
    return total


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("plus", [False, True])
def test_batch_gradient_matches_finite_differences(backend, seed, plus):
    m, dims, x, xa, y, u, cent = make_case(seed)
    grad = np.empty_like(m.flat)
    lam_c, lam_b = (0.9, 0.1) if plus else (0.0, 0.0)
    out = backend.ncod_batch(m.flat, dims, x, y, u, cent, xa if plus else None, lam_c, lam_b, True, grad)
    soft = np.maximum(out[5], 0.0)  # soft labels are constants for the network gradient
    objective.P0 = np.array([oracle_forward(m.flat, dims, xi)[1] for xi in x])
    fd_l1_lb = central_diff(lambda p: objective(p, dims, x, None, y, u, soft, 0.0, lam_b), m.flat.copy())
    fd = fd_l1_lb
    if plus:
        fd_c = central_diff(lambda p: objective(p, dims, x, xa, y, u, soft, lam_c, 0.0)
                            - objective(p, dims, x, None, y, u, soft, 0.0, 0.0), m.flat.copy())
        fd = fd_l1_lb + fd_c
    assert max_rel_err(grad, fd, floor=1e-6) < 1e-4


def test_reported_terms_match_loss_functions(backend):
    m, dims, x, xa, y, u, cent = make_case(11)
    grad = np.empty_like(m.flat)
    l1, l2, lc, lb, pc, sims = backend.ncod_batch(m.flat, dims, x, y, u, cent, xa, 0.9, 0.1, True, grad)
    outs = [oracle_forward(m.flat, dims, xi) for xi in x]
    P = np.array([o[1] for o in outs])
    emb = np.array([o[0] for o in outs])
    exp_sims = [e @ cent[c] / np.linalg.norm(e) for e, c in zip(emb, y)]
    np.testing.assert_allclose(sims, exp_sims, atol=1e-12)
    np.testing.assert_allclose(pc, P[np.arange(len(y)), y], atol=1e-14)
    assert l1 == pytest.approx(np.mean([loss_l1(P[i], u[i], y[i], max(exp_sims[i], 0)) for i in range(len(y))]))
    assert l2 == pytest.approx(np.mean([loss_l2(P[i], u[i], y[i]) for i in range(len(y))]))
    Q = [oracle_forward(m.flat, dims, xi)[1] for xi in xa]
    assert lc == pytest.approx(np.mean([consistency_reg(P[i], Q[i]) for i in range(len(y))]))
    assert lb == pytest.approx(class_balance_reg(P))


def test_ce_mode_gradient_is_softmax_ce(backend):
    m, dims, x, xa, y, u, cent = make_case(5)
    grad = np.empty_like(m.flat)
    backend.ncod_batch(m.flat, dims, x, y, u, cent, None, 0.0, 0.0, False, grad)

    def ce(p):
        return np.mean([-np.log(oracle_forward(p, dims, xi)[1][c]) for xi, c in zip(x, y)])

    assert max_rel_err(grad, central_diff(ce, m.flat.copy()), floor=1e-6) < 1e-4


@pytest.mark.skipif("compiled" not in kernels.available(), reason="compiled kernel not built")
@pytest.mark.parametrize("dims", [(4, 3), (4, 6, 3), (7, 9, 8, 5, 4)])
@pytest.mark.parametrize("soft", [True, False])
def test_backends_agree(dims, soft):
    m, d, x, xa, y, u, cent = make_case(21, dims, B=17)
    outs = []
    for name in ("python", "compiled"):
        g = np.empty_like(m.flat)
        res = kernels.get_backend(name).ncod_batch(m.flat, d, x, y, u, cent, xa, 0.9, 0.1, soft, g)
        outs.append((g, res))
    (g1, r1), (g2, r2) = outs
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-14)
    for a, b in zip(r1, r2):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_zero_embedding_gives_zero_soft_label(backend):
    dims = np.array([2, 3, 2], dtype=np.intp)
    params = np.zeros(2 * 3 + 3 + 3 * 2 + 2)  # all-zero network: embeddings are exactly 0
    grad = np.empty_like(params)
    out = backend.ncod_batch(params, dims, np.ones((3, 2)), np.array([0, 1, 0]), np.zeros(3),
                             np.eye(2, 3), None, 0.0, 0.0, True, grad)
    assert np.all(out[5] == 0.0) and out[0] == 0.0 and np.all(grad == 0.0)


def test_backend_selection(monkeypatch):
    assert kernels.get_backend("python").NAME == "python"
    monkeypatch.setenv("NCODLAB_BACKEND", "python")
    assert kernels.get_backend().NAME == "python"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_empty_batch_rejected(backend):
    from ncodlab.errors import EmptyBatch
    dims = np.array([3, 4, 2], dtype=np.intp)
    with pytest.raises(EmptyBatch):
        backend.ncod_batch(np.zeros(26), dims, np.zeros((0, 3)), np.zeros(0, dtype=np.int64), np.zeros(0),
                           np.eye(2, 4), None, 0.0, 0.0, True, np.zeros(26))


@pytest.mark.skipif("compiled" not in kernels.available(), reason="compiled kernel not built")
@pytest.mark.parametrize("dims,B", [((16, 64, 64, 4), 32), ((16, 64, 64, 4), 1), ((13, 33, 10), 40)])
def test_backends_agree_at_training_sizes(dims, B):
    m, d, x, xa, y, u, cent = make_case(5, dims, B=B)
    grads = []
    for name in ("python", "compiled"):
        g = np.empty_like(m.flat)
        kernels.get_backend(name).ncod_batch(m.flat, d, x, y, u, cent, xa, 0.9, 0.1, True, g)
        grads.append(g)
    scale = np.max(np.abs(grads[0]))
    assert np.max(np.abs(grads[0] - grads[1])) <= 1e-12 * scale
