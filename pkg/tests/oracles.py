"""Independent reference implementations used to verify the package.

Everything here is deliberately written the slow, obvious way (explicit
loops, no shared code with the package) so agreement is evidence of
correctness rather than of copy-paste.
"""

import numpy as np

from listengen.tensor import Tensor, backward, no_grad


def loop_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


def loop_softmax_row(row: np.ndarray) -> np.ndarray:
    shifted = row - row.max()
    e = np.exp(shifted)
    return e / e.sum()


def loop_attention(q, k, v, wq, wk, wv) -> np.ndarray:
    """Literal transcription: Softmax(q wq (k wk)^T / sqrt(C)) (v wv)."""
    qp = loop_matmul(q, wq)
    kp = loop_matmul(k, wk)
    vp = loop_matmul(v, wv)
    c = wq.shape[1]
    logits = loop_matmul(qp, kp.T) / np.sqrt(c)
    weights = np.stack([loop_softmax_row(r) for r in logits])
    return loop_matmul(weights, vp)


def loop_multi_head(q, k, v, heads, wq, wk, wv, wo, bo) -> np.ndarray:
    """Explicit head loop over column blocks, concat, output projection."""
    width = wq.shape[0]
    dh = width // heads
    outs = []
    for h in range(heads):
        cols = slice(h * dh, (h + 1) * dh)
        outs.append(loop_attention(q, k, v, wq[:, cols], wk[:, cols], wv[:, cols]))
    return loop_matmul(np.concatenate(outs, axis=1), wo) + bo


def fd_input_grads(f, arrays, h=1e-6):
    """Central-difference gradients of scalar f(*tensors) w.r.t. each array.

    Returns (analytic_grads, numeric_grads) as parallel lists. Arrays are
    small; every coordinate is differenced.
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = f(*tensors)
    backward(out)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]
    numeric = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                hi = float(f(*tensors).data)
            flat[i] = orig - h
            with no_grad():
                lo = float(f(*tensors).data)
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * h)
        numeric.append(g)
    return analytic, numeric


def max_rel_err(a, b, floor=1e-8) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
