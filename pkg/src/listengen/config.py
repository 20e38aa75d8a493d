"""Flat dotted-key run configuration.

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored. Keys must exist in the registry below (unknown keys
are rejected), values are coerced to the registered type. Command-line
overrides use the same ``key=value`` form and win over file values.
"""

from __future__ import annotations

from .denoiser import PredictorConfig
from .errors import ConfigError
from .pipeline import RunConfig
from .synth import SynthConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type, default, help)
REGISTRY = {
    "seed": (int, 0, "master seed; every RNG stream derives from it by name"),
    "data.dir": (str, "data", "dataset directory (pairs/ + manifest.tsv)"),
    "data.n_per_attitude": (int, 67, "pairs generated per attitude by gen-data"),
    "data.n_listeners": (int, 10, "size of the shared listener identity pool"),
    "data.min_length": (int, 100, "minimum pair length in frames"),
    "data.max_length": (int, 300, "maximum pair length in frames"),
    "data.expr_channels": (int, 8, "expression channels E; coefficient dim is E+6"),
    "data.identity_dim": (int, 32, "listener identity embedding size"),
    "data.audio_dim": (int, 45, "acoustic feature channels per frame"),
    "data.fps": (int, 30, "frames per second of all sequences"),
    "model.width": (int, 64, "model width (token dimension)"),
    "model.layers": (int, 4, "number of stacked predictor layers"),
    "model.heads": (int, 8, "attention heads; width must divide evenly"),
    "model.time_additive": (_bool, True,
                            "also add the time embedding to the latent after input projection"),
    "diffusion.steps": (int, 50, "diffusion steps T"),
    "diffusion.beta_start": (float, 1e-3, "linear beta schedule start"),
    "diffusion.beta_end": (float, 0.05, "linear beta schedule end"),
    "train.epochs": (int, 20, "training epochs"),
    "train.batch": (int, 8, "windows per optimizer step"),
    "train.lr": (float, 1e-3, "Adam learning rate"),
    "train.adam_beta1": (float, 0.9, "Adam first-moment decay"),
    "train.adam_beta2": (float, 0.999, "Adam second-moment decay"),
    "train.adam_eps": (float, 1e-8, "Adam denominator epsilon"),
    "train.window": (int, 40, "window length in frames"),
    "train.stride": (int, 20, "window stride in frames"),
    "train.out": (str, "runs/train", "training output directory"),
    "sample.n": (int, 5, "number of sequences to generate"),
    "sample.attitude": (str, "", "attitude for sampling; empty = the pair's own"),
    "sample.checkpoint": (str, "", "checkpoint file to sample from"),
    "sample.pair": (str, "", "speaker .lseq file providing conditioning"),
    "sample.deterministic": (_bool, False,
                             "zero all sampling noise (single repeatable trajectory)"),
    "sample.out": (str, "runs/samples", "sampling output directory"),
    "eval.n_perm": (int, 10000, "permutations for the attitude separability test"),
    "eval.out": (str, "runs/eval", "evaluation output directory"),
}


class Config:
    """Resolved key-value map; access via get()/[] with registry defaults."""

    def __init__(self, values: dict):
        self.values = values

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str):
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key: {key}")
        return self.values[key]

    def lines(self):
        return [f"{k} = {self.values[k]}" for k in sorted(self.values)]


def _coerce(key: str, raw: str):
    if key not in REGISTRY:
        raise ConfigError(f"unknown config key: {key}")
    typ = REGISTRY[key][0]
    try:
        if typ is str:
            return raw.strip()
        return typ(raw.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from None


def load_config(path: str | None = None, overrides=()) -> Config:
    """Defaults, then the file (if any), then key=value overrides."""
    values = {k: spec[1] for k, spec in REGISTRY.items()}
    if path is not None:
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from None
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, raw = stripped.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            values[key.strip()] = _coerce(key.strip(), raw)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override must be key=value, got {item!r}")
        values[key.strip()] = _coerce(key.strip(), raw)
    return Config(values)


def registry_help() -> str:
    width = max(len(k) for k in REGISTRY)
    lines = ["config keys (key = default: description):"]
    for key in sorted(REGISTRY):
        typ, default, doc = REGISTRY[key]
        lines.append(f"  {key.ljust(width)} = {default!r}: {doc}")
    return "\n".join(lines)


def synth_config(cfg: Config) -> SynthConfig:
    return SynthConfig(
        expr_channels=cfg.get("data.expr_channels"),
        identity_dim=cfg.get("data.identity_dim"),
        audio_dim=cfg.get("data.audio_dim"),
        fps=cfg.get("data.fps"),
        min_length=cfg.get("data.min_length"),
        max_length=cfg.get("data.max_length"),
        window=cfg.get("train.window"),
    )


def predictor_config(cfg: Config) -> PredictorConfig:
    return PredictorConfig(
        channels=cfg.get("data.expr_channels") + 6,
        width=cfg.get("model.width"),
        layers=cfg.get("model.layers"),
        heads=cfg.get("model.heads"),
        identity_dim=cfg.get("data.identity_dim"),
        audio_dim=cfg.get("data.audio_dim"),
        max_step=cfg.get("diffusion.steps"),
        time_additive=cfg.get("model.time_additive"),
    )


def run_config(cfg: Config) -> RunConfig:
    return RunConfig(
        model=predictor_config(cfg),
        steps=cfg.get("diffusion.steps"),
        beta_start=cfg.get("diffusion.beta_start"),
        beta_end=cfg.get("diffusion.beta_end"),
        epochs=cfg.get("train.epochs"),
        batch=cfg.get("train.batch"),
        lr=cfg.get("train.lr"),
        adam_beta1=cfg.get("train.adam_beta1"),
        adam_beta2=cfg.get("train.adam_beta2"),
        adam_eps=cfg.get("train.adam_eps"),
        window=cfg.get("train.window"),
        stride=cfg.get("train.stride"),
        seed=cfg.get("seed"),
    )
