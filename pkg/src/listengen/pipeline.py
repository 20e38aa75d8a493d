"""Training orchestration, clip-by-clip generation, overlap stitching.

All randomness in a run flows from one master seed through named streams
(see :mod:`listengen.seeds`), so training is bit-reproducible and a run
resumed from the epoch-k checkpoint matches an unbroken run exactly: epoch
e always uses the streams ``train.epoch{e}.shuffle`` / ``train.epoch{e}.noise``
regardless of how the process got there.
"""

from __future__ import annotations

import dataclasses
import os
import time

import numpy as np

from . import dataio
from .checkpoint import load_arrays, save_arrays
from .denoiser import Conditioning, NoisePredictor, PredictorConfig, attitude_onehot
from .diffusion import NoiseSchedule, build_schedule, noise_loss, sample
from .errors import ConfigError, DataError, NumericError
from .optim import Adam
from .seeds import generator
from .synth import DialoguePair


@dataclasses.dataclass
class RunConfig:
    model: PredictorConfig
    steps: int = 50
    beta_start: float = 1e-3
    beta_end: float = 0.05
    epochs: int = 20
    batch: int = 8
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    window: int = 40
    stride: int = 20
    seed: int = 0

    def validate(self):
        self.model.validate()
        if self.window < 1 or self.stride < 1:
            raise ConfigError("window and stride must be positive")
        if self.stride > self.window:
            raise ConfigError(
                f"stride {self.stride} must not exceed window {self.window}"
            )
        if self.epochs < 0 or self.batch < 1:
            raise ConfigError("epochs must be >= 0 and batch >= 1")

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.steps, self.beta_start, self.beta_end)


@dataclasses.dataclass
class TrainResult:
    checkpoint_path: str
    loss_path: str
    epoch_means: list


@dataclasses.dataclass
class SampleRun:
    sequence: np.ndarray     # stitched listener coefficients [L, D]
    attitude: str
    identity: np.ndarray
    seed: int
    sample_index: int
    checkpoint_id: str
    duration_s: float


def checkpoint_path(out_dir: str, epoch: int) -> str:
    return os.path.join(out_dir, f"ckpt_ep{epoch}.ldif")


def _state_path(out_dir: str, epoch: int) -> str:
    return os.path.join(out_dir, f"state_ep{epoch}.ldif")


def _latest_epoch(out_dir: str) -> int:
    best = -1
    for name in os.listdir(out_dir):
        if name.startswith("ckpt_ep") and name.endswith(".ldif"):
            try:
                e = int(name[len("ckpt_ep"):-len(".ldif")])
            except ValueError:
                continue
            if e > best and os.path.exists(_state_path(out_dir, e)):
                best = e
    return best


def train(cfg: RunConfig, data_dir: str, out_dir: str, resume: bool = False,
          log=None) -> TrainResult:
    """Noise-prediction training over shuffled windows with Adam.

    Writes ckpt_ep{e}.ldif + state_ep{e}.ldif per epoch (epoch 0 is the
    untouched initialization) and appends ``step\\tepoch\\tloss`` rows to
    loss.tsv. Aborts on a non-finite loss rather than continuing.
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    pairs = dataio.load_dataset(data_dir)
    model = NoisePredictor(cfg.model, generator(cfg.seed, "init"))
    adam = Adam(model.params, lr=cfg.lr, beta1=cfg.adam_beta1,
                beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    sched = cfg.schedule()

    start_epoch = 1
    if resume:
        last = _latest_epoch(out_dir)
        if last < 0:
            raise DataError(f"nothing to resume from in {out_dir}")
        model.params.load_state_dict(load_arrays(checkpoint_path(out_dir, last)))
        adam.load_state_dict(load_arrays(_state_path(out_dir, last)))
        start_epoch = last + 1
    else:
        save_arrays(checkpoint_path(out_dir, 0), model.params.state_dict())
        save_arrays(_state_path(out_dir, 0), adam.state_dict())

    n_windows = sum(len(dataio.window_starts(p.length, cfg.window, cfg.stride))
                    for p in pairs)
    batches_per_epoch = -(-n_windows // cfg.batch)
    step = (start_epoch - 1) * batches_per_epoch
    loss_path = os.path.join(out_dir, "loss.tsv")
    epoch_means = []
    with open(loss_path, "a" if resume else "w") as loss_file:
        if not resume:
            loss_file.write("step\tepoch\tloss\n")
        for epoch in range(start_epoch, cfg.epochs + 1):
            shuffle_rng = generator(cfg.seed, f"train.epoch{epoch}.shuffle")
            noise_rng = generator(cfg.seed, f"train.epoch{epoch}.noise")
            losses = []
            for batch in dataio.iter_windows(pairs, cfg.window, cfg.stride,
                                             cfg.batch, shuffle_rng):
                model.params.zero_grad()
                total = 0.0
                for s in batch:
                    cond = Conditioning(s.speaker_visual, s.speaker_audio,
                                        s.identity, s.attitude)
                    total += noise_loss(model.predict_tensor, s.listener, cond,
                                        sched, noise_rng)
                loss = total / len(batch)
                step += 1
                if not np.isfinite(loss):
                    raise NumericError(
                        f"non-finite loss {loss} at step {step} (epoch {epoch}, lr={cfg.lr})"
                    )
                grads = {k: g / len(batch) for k, g in model.params.grads().items()}
                adam.step(grads)
                losses.append(loss)
                loss_file.write(f"{step}\t{epoch}\t{loss:.10g}\n")
            loss_file.flush()
            save_arrays(checkpoint_path(out_dir, epoch), model.params.state_dict())
            save_arrays(_state_path(out_dir, epoch), adam.state_dict())
            epoch_means.append(float(np.mean(losses)))
            if log:
                log(f"epoch {epoch}/{cfg.epochs}: mean loss {epoch_means[-1]:.5f}")
    final = checkpoint_path(out_dir, cfg.epochs)
    return TrainResult(checkpoint_path=final, loss_path=loss_path,
                       epoch_means=epoch_means)


def split_windows(seq: np.ndarray, window: int, stride: int):
    """Ordered clips plus their start frames; tail clip right-aligned."""
    starts = dataio.window_starts(len(seq), window, stride)
    return [seq[s:s + window] for s in starts], starts


def stitch_windows(clips, starts, total_len: int) -> np.ndarray:
    """Merge overlapping clips by linear crossfade into one sequence.

    Within an overlap of length m, the later clip's weight at overlap frame j
    is (j+1)/(m+1) and the earlier material keeps the complement, so weights
    always sum to 1. Output frames are convex combinations of clip frames.
    """
    if len(clips) != len(starts) or not clips:
        raise DataError("stitch needs one start per clip and at least one clip")
    if starts[0] != 0:
        raise DataError(f"stitching gap: frames [0, {starts[0]}) uncovered")
    out = np.array(clips[0], dtype=np.float64, copy=True)
    covered = len(clips[0])
    for clip, start in zip(clips[1:], starts[1:]):
        if start > covered:
            raise DataError(f"stitching gap: frames [{covered}, {start}) uncovered")
        m = covered - start
        m = min(m, len(clip))
        if m > 0:
            w = ((np.arange(m) + 1.0) / (m + 1.0))[:, None]
            out[start:start + m] = (1.0 - w) * out[start:start + m] + w * clip[:m]
        if start + len(clip) > covered:
            out = np.concatenate([out, clip[m:]], axis=0)
            covered = start + len(clip)
    if covered != total_len:
        raise DataError(
            f"stitched length {covered} does not match expected {total_len}"
        )
    return out


def generate(model: NoisePredictor, sched: NoiseSchedule, speaker_pair: DialoguePair,
             identity: np.ndarray, attitude: str, n_samples: int, seed: int,
             window: int = 40, stride: int = 20, deterministic: bool = False,
             checkpoint_id: str = "") -> list:
    """n_samples independent listener sequences for one speaker clip.

    Each window of each sample gets its own seed stream, so samples are
    mutually independent yet the whole call is reproducible from `seed`.
    Windows are generated independently and crossfade-stitched; conditioning
    for a window uses only that window's speaker frames.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be positive, got {n_samples}")
    vis, aud = speaker_pair.speaker_coeff, speaker_pair.speaker_audio
    total = speaker_pair.length
    starts = dataio.window_starts(total, window, stride)
    onehot = attitude_onehot(attitude)
    runs = []
    for i in range(n_samples):
        t0 = time.perf_counter()
        clips = []
        for j, st in enumerate(starts):
            rng = generator(seed, f"sample{i}.win{j}")
            cond = Conditioning(speaker_visual=vis[st:st + window],
                                speaker_audio=aud[st:st + window],
                                identity=identity, attitude=onehot)
            clips.append(sample(model.predict, cond, sched, rng,
                                deterministic=deterministic))
        seq = stitch_windows(clips, starts, total)
        runs.append(SampleRun(sequence=seq, attitude=attitude, identity=identity,
                              seed=seed, sample_index=i, checkpoint_id=checkpoint_id,
                              duration_s=time.perf_counter() - t0))
    return runs
