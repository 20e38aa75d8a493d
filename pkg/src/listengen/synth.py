"""Synthetic speaker/listener dialogue pairs with attitude-dependent dynamics.

Coefficient channel layout for every frame, speaker and listener alike:

    [0:3]        head angles (pitch, yaw, roll), radians
    [3:3+E]      expression coefficients (unitless)
    [3+E:6+E]    translation (normalized screen units)

so D = E + 6 channels total. The listener track follows a documented
conditional law, which is what the trained model is later scored against:

  positive: pitch(k) = nod_amp * smooth(a)(k) * sin(2*pi*nod_freq*k/fps)
            (nodding locked to the speaker's energy envelope), expression
            channel 0 (smile proxy) shifted by +expr_offset
  negative: yaw(k) = sway_amp * sin(2*pi*sway_freq*k/fps) * smooth(a)(k),
            expression channel 1 (frown proxy) shifted by -expr_offset and
            the smile channel 0 also shifted by -expr_offset (smiling is
            suppressed, so the positive-negative gap on channel 0 is
            2*expr_offset)
  neutral:  angles are neutral_scale smoothed noise, clamped to
            +-neutral_bound after the residual is added so a neutral
            listener's head provably never exceeds that deflection

plus i.i.d. Gaussian residual (residual_sigma) on every listener channel and
a fixed per-identity offset (identity_scale * identity[:E]) on the
expression channels.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DataError

ANGLES = slice(0, 3)


def expr_slice(expr_channels: int) -> slice:
    return slice(3, 3 + expr_channels)


def trans_slice(expr_channels: int) -> slice:
    return slice(3 + expr_channels, 6 + expr_channels)


@dataclasses.dataclass
class SynthConfig:
    expr_channels: int = 8
    identity_dim: int = 32
    audio_dim: int = 45
    fps: int = 30
    min_length: int = 100
    max_length: int = 300
    window: int = 40
    # listener law constants
    nod_amp: float = 0.15
    nod_freq: float = 1.5
    sway_amp: float = 0.12
    sway_freq: float = 1.0
    neutral_scale: float = 0.02
    neutral_bound: float = 0.095
    expr_offset: float = 0.3
    residual_sigma: float = 0.02
    identity_scale: float = 0.05
    # speaker simulation
    freq_low: float = 0.5
    freq_high: float = 2.0
    energy_noise: float = 0.1
    energy_scale: float = 1.0
    energy_smooth: int = 3
    neutral_smooth: int = 15

    @property
    def channels(self) -> int:
        return self.expr_channels + 6


@dataclasses.dataclass
class DialoguePair:
    speaker_coeff: np.ndarray   # [L, D]
    speaker_audio: np.ndarray   # [L, audio_dim]
    listener_coeff: np.ndarray  # [L, D]
    identity: np.ndarray        # [identity_dim]
    attitude: str
    fps: int = 30

    @property
    def length(self) -> int:
        return self.listener_coeff.shape[0]


def smooth(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge renormalization (true mean at edges)."""
    if window <= 1:
        return np.asarray(x, dtype=np.float64)
    kernel = np.ones(window)
    num = np.convolve(x, kernel, mode="same")
    den = np.convolve(np.ones_like(x), kernel, mode="same")
    return num / den


def _smoothed_noise(rng: np.random.Generator, shape, window: int) -> np.ndarray:
    out = rng.standard_normal(shape)
    return np.apply_along_axis(smooth, 0, out, window) if out.ndim > 1 else smooth(out, window)


def gen_pair(rng: np.random.Generator, length: int, attitude: str,
             cfg: SynthConfig, identity: np.ndarray | None = None) -> DialoguePair:
    """One speaker/listener pair of `length` frames under the documented law.

    identity defaults to a fresh standard-normal draw; the dataset builder
    passes pooled identities so several pairs can share a listener.
    """
    if length < cfg.window:
        raise DataError(f"sequence length {length} below window {cfg.window}")
    if attitude not in ("positive", "neutral", "negative"):
        raise DataError(f"unknown attitude {attitude!r}")
    d = cfg.channels
    e = cfg.expr_channels
    k = np.arange(length)

    # speaker audio: energy channel plus correlated filler channels
    f_hz = rng.uniform(cfg.freq_low, cfg.freq_high)
    energy = (cfg.energy_scale * np.abs(np.sin(2 * np.pi * f_hz * k / cfg.fps))
              + cfg.energy_noise * rng.standard_normal(length))
    audio = np.empty((length, cfg.audio_dim))
    audio[:, 0] = energy
    mix = rng.uniform(0.2, 0.8, size=cfg.audio_dim - 1)
    filler = _smoothed_noise(rng, (length, cfg.audio_dim - 1), 5)
    audio[:, 1:] = mix * energy[:, None] + 0.3 * filler

    # speaker coefficients: smoothed random walk angles, mild expr/trans noise
    speaker = np.zeros((length, d))
    walk = np.cumsum(0.01 * rng.standard_normal((length, 3)), axis=0)
    speaker[:, ANGLES] = np.clip(np.apply_along_axis(smooth, 0, walk, 9), -0.4, 0.4)
    speaker[:, expr_slice(e)] = 0.1 * _smoothed_noise(rng, (length, e), 7)
    speaker[:, trans_slice(e)] = 0.02 * _smoothed_noise(rng, (length, 3), 7)

    if identity is None:
        identity = rng.standard_normal(cfg.identity_dim)
    identity = np.asarray(identity, dtype=np.float64)

    listener = np.zeros((length, d))
    env = smooth(energy, cfg.energy_smooth)
    if attitude == "positive":
        listener[:, 0] = cfg.nod_amp * env * np.sin(2 * np.pi * cfg.nod_freq * k / cfg.fps)
        listener[:, 3] += cfg.expr_offset
    elif attitude == "negative":
        listener[:, 1] = cfg.sway_amp * np.sin(2 * np.pi * cfg.sway_freq * k / cfg.fps) * env
        listener[:, 4] -= cfg.expr_offset
        listener[:, 3] -= cfg.expr_offset
    else:
        listener[:, ANGLES] = cfg.neutral_scale * _smoothed_noise(
            rng, (length, 3), cfg.neutral_smooth)
    listener[:, expr_slice(e)] += cfg.identity_scale * identity[:e]
    listener += cfg.residual_sigma * rng.standard_normal((length, d))
    if attitude == "neutral":
        listener[:, ANGLES] = np.clip(listener[:, ANGLES],
                                      -cfg.neutral_bound, cfg.neutral_bound)

    return DialoguePair(speaker_coeff=speaker, speaker_audio=audio,
                        listener_coeff=listener, identity=identity,
                        attitude=attitude, fps=cfg.fps)
