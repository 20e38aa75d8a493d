"""Finite-difference verification of tape gradients."""

from __future__ import annotations

import numpy as np

from .diffusion import forward_sample
from .errors import ConfigError, NumericError
from .nn import ParamSet
from .tensor import Tensor, backward, constant, mean, mul, no_grad, sub

# params with more coordinates than this get a random 64-coordinate sample
FULL_CHECK_LIMIT = 200
SAMPLE_COORDS = 64


def make_loss_probe(model, sched, cond, x0: np.ndarray, rng: np.random.Generator):
    """Freeze one (t, eps) draw into a deterministic scalar loss of the params.

    The live noise-prediction loss redraws t and eps per call, which grad
    checking cannot difference; this fixes a single draw and returns
    f(params) = mean((eps - predicted_noise)^2) as a function of the model
    parameters only.
    """
    t = int(rng.integers(1, sched.T + 1))
    eps = rng.standard_normal(x0.shape)
    x_t = forward_sample(x0, t, eps, sched)
    target = constant(eps)

    def f(params):
        diff = sub(model.predict_tensor(x_t, t, cond), target)
        return mean(mul(diff, diff))

    return f


def grad_check(f, params: ParamSet, h: float = 1e-5, rng=None) -> float:
    """Max relative error between tape gradients of f and central differences.

    f maps the current params to a scalar Tensor; it must be deterministic
    (two evaluations are compared bit-for-bit before any differencing).
    Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
    """
    if not (1e-6 <= h <= 1e-4):
        raise ConfigError(f"grad_check step h must lie in [1e-6, 1e-4], got {h}")
    if rng is None:
        rng = np.random.default_rng(0)

    params.zero_grad()
    out = f(params)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ConfigError("grad_check target must return a scalar Tensor")
    base = float(out.data)
    with no_grad():
        check = float(f(params).data)
    if check != base:
        raise NumericError(
            f"non-deterministic loss: two evaluations gave {base!r} vs {check!r}"
        )
    backward(out)
    analytic = params.grads()

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if n > FULL_CHECK_LIMIT:
            coords = rng.choice(n, size=SAMPLE_COORDS, replace=False)
        else:
            coords = range(n)
        ag = analytic[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            with no_grad():
                hi = float(f(params).data)
            flat[idx] = orig - h
            with no_grad():
                lo = float(f(params).data)
            flat[idx] = orig
            numeric = (hi - lo) / (2.0 * h)
            a = ag[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst:
                worst = err
    return worst
