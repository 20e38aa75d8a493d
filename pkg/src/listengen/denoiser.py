"""Conditional noise predictor for the diffusion model.

The network maps a noisy coefficient window [L, D] plus conditioning
(speaker features, listener identity, attitude one-hot, diffusion step)
to the predicted noise [L, D]. Each of the stacked layers applies:

  1. identity modulation: gain/shift computed from the identity vector
     applied to the normalized latent, followed by multi-head
     self-attention over the L frame tokens (residual, post-norm),
  2. cross-attention from the latent tokens onto an encoded memory of
     L speaker-frame tokens + 1 attitude token + 1 time token
     (residual, post-norm),
  3. position-wise feed-forward at 4x width (residual, post-norm).

A single input projection lifts D to the model width before layer 1 and a
single output projection drops back to D after the last layer. The time
embedding is sinusoidal; besides its memory token it is optionally added to
the latent right after the input projection (config flag, default on).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigError, DataError, ListengenError
from .nn import ParamSet, gelu, glorot, layer_norm, linear, multi_head
from .tensor import Tensor, add, concat, constant, mul, no_grad

ATTITUDES = ("positive", "neutral", "negative")


@dataclasses.dataclass
class Conditioning:
    """Everything the noise predictor sees besides the noisy window itself."""

    speaker_visual: np.ndarray  # [L, D] per-frame speaker coefficients
    speaker_audio: np.ndarray   # [L, A] per-frame acoustic features
    identity: np.ndarray        # [D_id] listener identity embedding
    attitude: np.ndarray        # one-hot [3]: positive, neutral, negative
    t: int = 0                  # diffusion step

    def validate(self):
        if self.speaker_visual.ndim != 2 or self.speaker_audio.ndim != 2:
            raise DataError("speaker features must be 2-D [frames, channels]")
        if self.speaker_visual.shape[0] != self.speaker_audio.shape[0]:
            raise DataError(
                f"length mismatch between visual ({self.speaker_visual.shape[0]}) "
                f"and audio ({self.speaker_audio.shape[0]}) streams"
            )
        att = np.asarray(self.attitude)
        if att.shape != (3,) or not np.all(np.isin(att, (0.0, 1.0))) or att.sum() != 1:
            raise DataError(f"attitude must be one-hot of size 3, got {att}")
        if float(np.linalg.norm(self.identity)) == 0.0:
            raise DataError("identity embedding has zero norm")


def attitude_onehot(name: str) -> np.ndarray:
    if name not in ATTITUDES:
        raise ConfigError(f"unknown attitude {name!r}, expected one of {ATTITUDES}")
    v = np.zeros(3)
    v[ATTITUDES.index(name)] = 1.0
    return v


@dataclasses.dataclass
class PredictorConfig:
    channels: int           # D: coefficient channels per frame
    width: int = 64         # model dimension
    layers: int = 4
    heads: int = 8
    identity_dim: int = 32
    audio_dim: int = 45
    max_step: int = 1000    # largest diffusion step the model will see
    time_additive: bool = True

    def validate(self):
        for field in ("channels", "width", "layers", "heads", "identity_dim",
                      "audio_dim", "max_step"):
            if getattr(self, field) <= 0:
                raise ConfigError(f"model.{field} must be positive")
        if self.width % self.heads != 0:
            raise ConfigError(
                f"model width {self.width} not divisible by heads {self.heads}"
            )
        if self.width % 2 != 0:
            raise ConfigError(f"model width must be even for the time embedding, got {self.width}")


def embed_time(t: int, width: int) -> np.ndarray:
    """Sinusoidal step embedding: pairs (sin, cos) at geometric frequencies."""
    if width % 2 != 0:
        raise ConfigError(f"time embedding width must be even, got {width}")
    if t < 0:
        raise ConfigError(f"diffusion step must be nonnegative, got {t}")
    i = np.arange(width // 2)
    freq = 1.0 / (10000.0 ** (2.0 * i / width))
    emb = np.empty(width)
    emb[0::2] = np.sin(t * freq)
    emb[1::2] = np.cos(t * freq)
    return emb


def init_params(config: PredictorConfig, rng: np.random.Generator) -> ParamSet:
    """Glorot-uniform weights, zero biases, unit norm scales.

    Exception: the modulation gain bias starts at 1 so the gain is neutral
    at init instead of silencing the whole latent path.
    """
    config.validate()
    w = config.width
    d = config.channels
    params = ParamSet()

    def lin(name, fan_in, fan_out, bias_fill=0.0):
        params.add(f"{name}.w", glorot(rng, fan_in, fan_out))
        params.add(f"{name}.b", np.full(fan_out, bias_fill))

    lin("in_proj", d, w)
    lin("cond.frame", d + config.audio_dim, w)
    lin("cond.attitude", 3, w)
    lin("cond.time", w, w)
    for i in range(config.layers):
        pre = f"layer{i}"
        lin(f"{pre}.ident.gamma", config.identity_dim, w, bias_fill=1.0)
        lin(f"{pre}.ident.delta", config.identity_dim, w)
        for block in ("self_attn", "cross_attn"):
            params.add(f"{pre}.{block}.wq", glorot(rng, w, w))
            params.add(f"{pre}.{block}.wk", glorot(rng, w, w))
            params.add(f"{pre}.{block}.wv", glorot(rng, w, w))
            params.add(f"{pre}.{block}.wo", glorot(rng, w, w))
            params.add(f"{pre}.{block}.bo", np.zeros(w))
        lin(f"{pre}.ff.fc1", w, 4 * w)
        lin(f"{pre}.ff.fc2", 4 * w, w)
        for norm in ("norm_self", "norm_cross", "norm_ff"):
            params.add(f"{pre}.{norm}.scale", np.ones(w))
            params.add(f"{pre}.{norm}.shift", np.zeros(w))
    lin("out_proj", w, d)
    return params


def parameter_count(config: PredictorConfig) -> int:
    """Closed-form parameter total; guards against architectural drift.

    With W = width, D = channels, A = audio_dim, I = identity_dim, N = layers:
        W^2 + (D + A + 6) W        condition encoder (frame/attitude/time)
        + D W + W                  input projection
        + W D + D                  output projection
        + N (16 W^2 + 2 I W + 15 W) per layer
    """
    w, d = config.width, config.channels
    a, i, n = config.audio_dim, config.identity_dim, config.layers
    return (w * w + (d + a + 6) * w + d * w + w + w * d + d
            + n * (16 * w * w + 2 * i * w + 15 * w))


def _attn_params(params: ParamSet, prefix: str) -> dict:
    return {k: params[f"{prefix}.{k}"] for k in ("wq", "wk", "wv", "wo", "bo")}


def identity_enhance(latent: Tensor, identity: np.ndarray, params: ParamSet,
                     config: PredictorConfig, prefix: str = "layer0") -> Tensor:
    """Identity-conditioned modulation followed by self-attention.

    gain/shift come from two linear maps of the identity vector and modulate
    the parameter-free layer norm of the latent; the modulated tokens then
    self-attend with a residual and a learned post-norm.
    """
    if identity.size == 0:
        raise ConfigError("identity vector is empty")
    ident = constant(identity.reshape(1, -1))
    gamma = linear(ident, params[f"{prefix}.ident.gamma.w"], params[f"{prefix}.ident.gamma.b"])
    delta = linear(ident, params[f"{prefix}.ident.delta.w"], params[f"{prefix}.ident.delta.b"])
    mod = add(mul(layer_norm(latent), gamma), delta)  # broadcast over the L frames
    attn = multi_head(mod, mod, mod, config.heads, _attn_params(params, f"{prefix}.self_attn"))
    return layer_norm(add(mod, attn),
                      params[f"{prefix}.norm_self.scale"],
                      params[f"{prefix}.norm_self.shift"])


def condition_encode(cond: Conditioning, params: ParamSet,
                     config: PredictorConfig) -> Tensor:
    """Cross-attention memory: L speaker-frame tokens + attitude + time.

    Frame tokens project the concatenated per-frame visual and acoustic
    features; the attitude one-hot and the sinusoidal time embedding each
    project to one further token, so M = L + 2.
    """
    cond.validate()
    frames = np.concatenate([cond.speaker_visual, cond.speaker_audio], axis=1)
    frame_tok = linear(constant(frames), params["cond.frame.w"], params["cond.frame.b"])
    att_tok = linear(constant(cond.attitude.reshape(1, 3)),
                     params["cond.attitude.w"], params["cond.attitude.b"])
    time_vec = embed_time(cond.t, config.width).reshape(1, -1)
    time_tok = linear(constant(time_vec), params["cond.time.w"], params["cond.time.b"])
    return concat([frame_tok, att_tok, time_tok], axis=0)


def predict_noise(x_t: np.ndarray, cond: Conditioning, params: ParamSet,
                  config: PredictorConfig) -> Tensor:
    """Full forward pass; returns the predicted noise as a tape Tensor [L, D]."""
    if x_t.ndim != 2 or x_t.shape[1] != config.channels:
        raise ConfigError(
            f"latent window shape {x_t.shape} does not match channels {config.channels}"
        )
    if x_t.shape[0] != cond.speaker_visual.shape[0]:
        raise DataError(
            f"latent window length {x_t.shape[0]} does not match "
            f"speaker window length {cond.speaker_visual.shape[0]}"
        )
    memory = condition_encode(cond, params, config)
    h = linear(constant(x_t), params["in_proj.w"], params["in_proj.b"])
    if config.time_additive:
        h = add(h, constant(embed_time(cond.t, config.width).reshape(1, -1)))
    for i in range(config.layers):
        pre = f"layer{i}"
        try:
            h = identity_enhance(h, cond.identity, params, config, prefix=pre)
            cross = multi_head(h, memory, memory, config.heads,
                               _attn_params(params, f"{pre}.cross_attn"))
            h = layer_norm(add(h, cross),
                           params[f"{pre}.norm_cross.scale"],
                           params[f"{pre}.norm_cross.shift"])
            ff = linear(gelu(linear(h, params[f"{pre}.ff.fc1.w"], params[f"{pre}.ff.fc1.b"])),
                        params[f"{pre}.ff.fc2.w"], params[f"{pre}.ff.fc2.b"])
            h = layer_norm(add(h, ff),
                           params[f"{pre}.norm_ff.scale"],
                           params[f"{pre}.norm_ff.shift"])
        except ListengenError as e:
            raise type(e)(f"layer {i}: {e}") from e
    return linear(h, params["out_proj.w"], params["out_proj.b"])


class NoisePredictor:
    """Config + parameters bundled behind the predictor callable protocol."""

    def __init__(self, config: PredictorConfig, rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        if rng is None:
            rng = np.random.default_rng(0)
        self.params = init_params(config, rng)

    def predict_tensor(self, x_t: np.ndarray, t: int, cond: Conditioning) -> Tensor:
        """Tape-recorded forward pass (training path)."""
        c = dataclasses.replace(cond, t=t)
        return predict_noise(x_t, c, self.params, self.config)

    def predict(self, x_t: np.ndarray, t: int, cond: Conditioning) -> np.ndarray:
        """Plain-array forward pass with the tape off (sampling path)."""
        with no_grad():
            return self.predict_tensor(x_t, t, cond).data
