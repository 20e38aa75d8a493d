"""Adam optimizer with bias correction, deterministic and serializable."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .nn import ParamSet


class Adam:
    """Standard Adam. Moments live per parameter, keyed by parameter path.

    The update for each parameter p with gradient g:
        m = b1*m + (1-b1)*g
        v = b2*v + (1-b2)*g^2
        p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    Deterministic given inputs; state round-trips through state_dict().
    """

    def __init__(self, params: ParamSet, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0 or eps <= 0 or not (0 <= beta1 < 1) or not (0 <= beta2 < 1):
            raise ConfigError(
                f"bad Adam hyperparameters: lr={lr}, beta1={beta1}, beta2={beta2}, eps={eps}"
            )
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, grads: dict):
        for name in self.params.names():
            if name not in grads:
                raise ConfigError(f"missing gradient for parameter: {name}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        state = {"step": np.asarray(float(self.step_count))}
        for name in self.params.names():
            state[f"m.{name}"] = self.m[name].copy()
            state[f"v.{name}"] = self.v[name].copy()
        return state

    def load_state_dict(self, state: dict):
        if "step" not in state:
            raise ConfigError("optimizer state missing step counter")
        self.step_count = int(np.asarray(state["step"]))
        for name in self.params.names():
            for prefix, store in (("m", self.m), ("v", self.v)):
                key = f"{prefix}.{name}"
                if key not in state:
                    raise ConfigError(f"optimizer state missing moment: {key}")
                arr = np.asarray(state[key], dtype=np.float64)
                if arr.shape != store[name].shape:
                    raise ConfigError(
                        f"moment shape mismatch for {key}: {arr.shape} vs {store[name].shape}"
                    )
                store[name] = arr.copy()
