"""Shared fixtures. The expensive desk-scale training run is session-scoped
and only built when a test actually asks for it."""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from listengen import pipeline, seeds
from listengen.checkpoint import load_arrays
from listengen.dataio import build_dataset
from listengen.denoiser import NoisePredictor, PredictorConfig
from listengen.synth import SynthConfig

DESK_SEED = 0


def desk_model_config() -> PredictorConfig:
    return PredictorConfig(channels=14, width=64, layers=4, heads=8,
                           identity_dim=32, audio_dim=45, max_step=50)


def desk_run_config() -> pipeline.RunConfig:
    return pipeline.RunConfig(model=desk_model_config(), steps=50,
                              beta_start=1e-3, beta_end=0.05, epochs=20,
                              batch=8, seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """200-pair synthetic dataset trained for 20 epochs at desk scale."""
    root = tmp_path_factory.mktemp("desk")
    data = root / "data"
    out = root / "run"
    build_dataset(str(data), SynthConfig(), seed=DESK_SEED, total=200)
    rc = desk_run_config()
    t0 = time.perf_counter()
    result = pipeline.train(rc, str(data), str(out))
    train_seconds = time.perf_counter() - t0
    return SimpleNamespace(data=str(data), out=str(out), rc=rc, result=result,
                           train_seconds=train_seconds)


def load_predictor(checkpoint_file) -> NoisePredictor:
    model = NoisePredictor(desk_model_config(), seeds.generator(DESK_SEED, "init"))
    model.params.load_state_dict(load_arrays(checkpoint_file))
    return model


@pytest.fixture(scope="session")
def trained_model(desk_run):
    return load_predictor(desk_run.result.checkpoint_path)


@pytest.fixture(scope="session")
def untrained_model(desk_run):
    return load_predictor(pipeline.checkpoint_path(desk_run.out, 0))
