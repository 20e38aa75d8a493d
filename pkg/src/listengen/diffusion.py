"""Denoising-diffusion core: schedule, forward kernel, loss, ancestral sampler.

Forward process: q(x_t | x_0) = N(sqrt(abar_t) x_0, (1 - abar_t) I) with
abar_t the cumulative product of alpha_t = 1 - beta_t. Training minimizes
mean squared error between true and predicted noise. The reverse chain uses

    mu(x_t, t) = (x_t - (1 - alpha_t)/sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)

with per-step standard deviation sigma_t = sqrt(beta_t), constant per step.
Tables are 1-indexed by diffusion step: entry [t] serves step t, entry [0]
is unused padding so formulas read like the math.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .tensor import Tensor, backward, constant, mean, mul, no_grad, sub


class NoiseSchedule:
    __slots__ = ("T", "beta", "alpha", "alpha_bar", "sigma")

    def __init__(self, T: int, beta: np.ndarray):
        self.T = T
        pad = np.concatenate([[np.nan], beta])
        self.beta = pad
        self.alpha = np.concatenate([[np.nan], 1.0 - beta])
        self.alpha_bar = np.concatenate([[np.nan], np.cumprod(1.0 - beta)])
        self.sigma = np.concatenate([[np.nan], np.sqrt(beta)])


def build_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta ramp from beta_start to beta_end inclusive over T steps."""
    if T < 1:
        raise ConfigError(f"schedule needs T >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"schedule needs 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )
    beta = np.linspace(beta_start, beta_end, T)
    return NoiseSchedule(T, beta)


def forward_sample(x0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form draw of x_t given x_0 and the noise realization eps."""
    if not (1 <= t <= sched.T):
        raise IndexError(f"diffusion step {t} outside [1, {sched.T}]")
    if eps.shape != x0.shape:
        raise ConfigError(f"noise shape {eps.shape} does not match data {x0.shape}")
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def reverse_step(x_t: np.ndarray, t: int, eps_hat: np.ndarray,
                 sched: NoiseSchedule, z: np.ndarray) -> np.ndarray:
    """One ancestral step x_t -> x_{t-1}; caller passes z = 0 at t = 1."""
    if t < 1:
        raise IndexError(f"reverse step needs t >= 1, got {t}")
    if t > sched.T:
        raise IndexError(f"reverse step {t} beyond schedule length {sched.T}")
    a = sched.alpha[t]
    ab = sched.alpha_bar[t]
    mu = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)
    return mu + sched.sigma[t] * z


def noise_loss(predictor, x0: np.ndarray, cond, sched: NoiseSchedule,
               rng: np.random.Generator) -> float:
    """Single-draw noise-prediction loss; backprops when predictor is on tape.

    Draws t uniform on {1..T} and eps ~ N(0, I), builds x_t, and scores
    mean((eps - predictor(x_t, t, cond))^2) over all coordinates. If the
    predictor returns a Tensor the loss is backpropagated and gradients
    accumulate on the predictor's parameters; a plain-array predictor is
    scored value-only (used by oracle predictors in tests).
    """
    t = int(rng.integers(1, sched.T + 1))
    eps = rng.standard_normal(x0.shape)
    x_t = forward_sample(x0, t, eps, sched)
    out = predictor(x_t, t, cond)
    if isinstance(out, Tensor):
        diff = sub(out, constant(eps))
        loss = mean(mul(diff, diff))
        backward(loss)
        return float(loss.data)
    return float(np.mean((np.asarray(out) - eps) ** 2))


def sample(predictor, cond, sched: NoiseSchedule, rng: np.random.Generator,
           shape=None, deterministic: bool = False) -> np.ndarray:
    """Ancestral sampling from pure noise down to an x_0 estimate.

    shape defaults to the conditioning's speaker window shape [L, D].
    deterministic=True zeroes both x_T and every z, collapsing the sampler
    to a single repeatable trajectory (the no-diffusion regression baseline).
    """
    if shape is None:
        shape = cond.speaker_visual.shape
    if deterministic:
        x = np.zeros(shape)
    else:
        x = rng.standard_normal(shape)
    with no_grad():
        for t in range(sched.T, 0, -1):
            eps_hat = predictor(x, t, cond)
            if isinstance(eps_hat, Tensor):
                eps_hat = eps_hat.data
            if t > 1 and not deterministic:
                z = rng.standard_normal(shape)
            else:
                z = np.zeros(shape)
            x = reverse_step(x, t, eps_hat, sched, z)
    return x
