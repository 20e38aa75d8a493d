"""Neural building blocks: linear maps, layer norm, softmax, attention.

Every op here takes and returns :class:`listengen.tensor.Tensor` and records
its backward closure on the tape, so a single ``backward()`` on a scalar loss
yields gradients for every parameter involved.

The attention op follows one fixed formula: the query/key/value projections
sit inside the product and a single 1/sqrt(C) scale is applied to the logits,
where C is the projected query/key width. Multi-head attention slices the
projection columns per head, runs heads in a batched einsum-free form, then
concatenates and output-projects.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .tensor import Tensor, concat, make_node, matmul, reshape, swapaxes

_GELU_C = np.sqrt(2.0 / np.pi)


class ParamSet:
    """Ordered, named collection of trainable tensors.

    Names are unique dotted paths ("layer0.ff.w1"). Iteration order is
    insertion order and is the canonical order for serialization and for
    deterministic gradient reduction.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._params[name]
        except KeyError:
            raise ConfigError(f"unknown parameter: {name}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def count(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict:
        """Gradient per parameter; parameters untouched by the tape get zeros."""
        out = {}
        for name, t in self._params.items():
            out[name] = np.zeros_like(t.data) if t.grad is None else t.grad
        return out

    def state_dict(self) -> dict:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict):
        missing = [n for n in self._params if n not in state]
        if missing:
            raise ConfigError(f"checkpoint missing parameters: {missing[:3]}")
        extra = [n for n in state if n not in self._params]
        if extra:
            raise ConfigError(f"checkpoint has unknown parameters: {extra[:3]}")
        for name, t in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ConfigError(
                    f"shape mismatch for {name}: checkpoint {arr.shape} vs model {t.data.shape}"
                )
            t.data = arr.copy()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform init on +-sqrt(6/(fan_in+fan_out)); keeps early activations bounded."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-bound, bound, size=shape)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b with b broadcast over rows."""
    if x.data.ndim < 2:
        raise ShapeError(f"linear input must be rank >= 2, got shape {x.data.shape}")
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(
            f"linear shape mismatch: input {x.data.shape} vs weight {w.data.shape}"
        )
    if b.data.shape != (w.data.shape[1],):
        raise ShapeError(
            f"linear bias shape {b.data.shape} does not match weight {w.data.shape}"
        )
    out = x.data @ w.data + b.data

    def back(g):
        if x.requires_grad:
            x.accumulate(g @ w.data.T)
        if w.requires_grad:
            gw = x.data.reshape(-1, x.data.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            w.accumulate(gw)
        if b.requires_grad:
            b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return make_node(out, (x, w, b), back)


def layer_norm(x: Tensor, scale: Tensor | None = None, shift: Tensor | None = None,
               eps: float = 1e-5) -> Tensor:
    """Normalize each row (last axis) to mean 0, population variance 1.

    With scale/shift omitted the op is parameter free, which is how the
    identity-modulation path uses it (the modulation supplies its own
    gain and bias).
    """
    d = x.data.shape[-1]
    if d == 0:
        raise DataError("layer_norm on empty last axis")
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    if scale is not None:
        out = xhat * scale.data + shift.data
    else:
        out = xhat

    parents = (x,) if scale is None else (x, scale, shift)

    def back(g):
        gx = g * scale.data if scale is not None else g
        if x.requires_grad:
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x.accumulate(inv * (gx - m1 - xhat * m2))
        if scale is not None and scale.requires_grad:
            scale.accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if shift is not None and shift.requires_grad:
            shift.accumulate(g.reshape(-1, d).sum(axis=0))

    return make_node(out, parents, back)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, max-subtracted for stability."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        x.accumulate(s * (g - dot))

    return make_node(s, (x,), back)


def gelu(x: Tensor) -> Tensor:
    """Smooth gate 0.5*x*(1+tanh(sqrt(2/pi)*(x+0.044715*x^3)))."""
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd ** 3)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def back(g):
        # exact derivative of the tanh form, not of the erf gelu
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd ** 2)
        grad = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t ** 2) * dinner
        x.accumulate(g * grad)

    return make_node(out, (x,), back)


def scaled_attention(q: Tensor, k: Tensor, v: Tensor,
                     wq: Tensor, wk: Tensor, wv: Tensor) -> Tensor:
    """Softmax(q Wq (k Wk)^T / sqrt(C)) (v Wv), C = projected query/key width.

    The projections sit inside the product and the single sqrt scale uses the
    projected width, not the input width. Works on [n, d] operands and on
    batched [heads, n, d] stacks alike.
    """
    if k.data.shape[-2] == 0:
        raise DataError("attention memory is empty: no keys to attend to")
    qp = matmul(q, wq)
    kp = matmul(k, wk)
    vp = matmul(v, wv)
    c = wq.data.shape[-1]
    if wk.data.shape[-1] != c:
        raise ShapeError(
            f"query/key projections disagree: {wq.data.shape} vs {wk.data.shape}"
        )
    logits = matmul(qp, swapaxes(kp, -1, -2))
    scaled = make_node(
        logits.data / np.sqrt(c), (logits,),
        lambda g: logits.accumulate(g / np.sqrt(c)),
    )
    weights = softmax_rows(scaled)
    return matmul(weights, vp)


def multi_head(q: Tensor, k: Tensor, v: Tensor, heads: int, params: dict) -> Tensor:
    """Multi-head attention with per-head column slices of shared projections.

    params: wq, wk, wv [width, width], wo [width, width], bo [width].
    Equivalent to looping heads over column blocks wq[:, h*dh:(h+1)*dh] etc.,
    concatenating the per-head outputs, then applying the output projection.
    """
    width = params["wq"].data.shape[0]
    if width % heads != 0:
        raise ConfigError(f"width {width} not divisible by heads {heads}")
    dh = width // heads
    n = q.data.shape[0]
    m = k.data.shape[0]
    if m == 0:
        raise DataError("attention memory is empty: no keys to attend to")

    def split_heads(x: Tensor, rows: int) -> Tensor:
        # [rows, width] -> [heads, rows, dh]; column block h of the projection
        # output is exactly head h's slice
        return swapaxes(reshape(x, (rows, heads, dh)), 0, 1)

    qp = split_heads(matmul(q, params["wq"]), n)
    kp = split_heads(matmul(k, params["wk"]), m)
    vp = split_heads(matmul(v, params["wv"]), m)
    logits = matmul(qp, swapaxes(kp, -1, -2))
    scaled = make_node(
        logits.data / np.sqrt(dh), (logits,),
        lambda g: logits.accumulate(g / np.sqrt(dh)),
    )
    weights = softmax_rows(scaled)
    per_head = matmul(weights, vp)
    merged = reshape(swapaxes(per_head, 0, 1), (n, width))
    return linear(merged, params["wo"], params["bo"])
