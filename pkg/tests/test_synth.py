"""Synthetic dialogue law: every documented property, checked from outputs."""

import numpy as np
import numpy.testing as npt
import pytest

from listengen.errors import DataError
from listengen.metrics import permutation_pvalue
from listengen.synth import ANGLES, SynthConfig, expr_slice, gen_pair, smooth, trans_slice

CFG = SynthConfig()


def pair_for(seed, attitude, length=200, cfg=CFG, identity=None):
    return gen_pair(np.random.default_rng(seed), length, attitude, cfg,
                    identity=identity)


# ---------------------------------------------------------------- smooth

def test_smooth_preserves_constants_exactly():
    npt.assert_array_equal(smooth(np.ones(50), 9), np.ones(50))


def test_smooth_window_one_is_identity():
    x = np.random.default_rng(0).standard_normal(20)
    npt.assert_array_equal(smooth(x, 1), x)


def test_smooth_interior_is_plain_average():
    x = np.arange(20, dtype=np.float64)
    out = smooth(x, 5)
    npt.assert_allclose(out[2:-2], x[2:-2], atol=1e-12)  # linear stays linear
    assert out[0] == np.mean(x[:3])  # edge renormalizes over real neighbors


# -------------------------------------------------------------- geometry

def test_channel_layout_slices():
    assert expr_slice(8) == slice(3, 11)
    assert trans_slice(8) == slice(11, 14)
    assert CFG.channels == 14


def test_pair_shapes_and_metadata():
    pair = pair_for(0, "positive", length=120)
    assert pair.speaker_coeff.shape == (120, 14)
    assert pair.speaker_audio.shape == (120, 45)
    assert pair.listener_coeff.shape == (120, 14)
    assert pair.identity.shape == (32,)
    assert pair.attitude == "positive"
    assert pair.length == 120
    assert pair.fps == 30


def test_length_below_window_rejected():
    with pytest.raises(DataError):
        pair_for(0, "positive", length=39)
    with pytest.raises(DataError):
        pair_for(0, "bored")


def test_determinism_same_seed_same_bytes():
    a = pair_for(7, "negative")
    b = pair_for(7, "negative")
    for field in ("speaker_coeff", "speaker_audio", "listener_coeff", "identity"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


# ------------------------------------------------------------ speaker law

def test_speaker_audio_energy_channel_is_rectified():
    pairs = [pair_for(s, "neutral") for s in range(5)]
    for p in pairs:
        energy = p.speaker_audio[:, 0]
        # |sin| has mean 2/pi; additive noise is zero-mean
        assert 0.4 < energy.mean() < 0.9


def test_speaker_angles_bounded():
    for s in range(5):
        p = pair_for(s, "neutral")
        assert np.abs(p.speaker_coeff[:, ANGLES]).max() <= 0.4


# ----------------------------------------------------------- listener law

def test_positive_pitch_tracks_energy_locked_nod():
    corrs = []
    for s in range(50):
        p = pair_for(s, "positive")
        k = np.arange(p.length)
        env = smooth(p.speaker_audio[:, 0], CFG.energy_smooth)
        target = env * np.sin(2 * np.pi * CFG.nod_freq * k / CFG.fps)
        c = np.corrcoef(p.listener_coeff[:, 0], target)[0, 1]
        corrs.append(c)
    assert min(corrs) > 0.5
    assert np.mean(corrs) > 0.8


def test_negative_yaw_oscillates_and_pitch_does_not():
    for s in range(10):
        p = pair_for(s, "negative")
        yaw_rms = np.sqrt(np.mean(p.listener_coeff[:, 1] ** 2))
        pitch_rms = np.sqrt(np.mean(p.listener_coeff[:, 0] ** 2))
        assert yaw_rms > 2 * pitch_rms


def test_expression_gap_between_attitudes_is_twice_offset():
    ident = np.random.default_rng(42).standard_normal(32)
    pos = pair_for(1, "positive", identity=ident)
    neg = pair_for(1, "negative", identity=ident)
    gap = pos.listener_coeff[:, 3].mean() - neg.listener_coeff[:, 3].mean()
    npt.assert_allclose(gap, 2 * CFG.expr_offset, atol=0.02)
    # frown channel moves only for the negative pair
    frown = neg.listener_coeff[:, 4].mean() - pos.listener_coeff[:, 4].mean()
    npt.assert_allclose(frown, -CFG.expr_offset, atol=0.02)


def test_neutral_angles_respect_the_bound():
    for s in range(50):
        p = pair_for(s, "neutral")
        worst = np.abs(p.listener_coeff[:, ANGLES]).max()
        assert worst <= CFG.neutral_bound + 1e-15


def test_nod_amplitude_is_multiplicative_in_energy():
    # silence the speaker: the nod must vanish with it (residual off to isolate)
    silent = SynthConfig(energy_scale=0.0, residual_sigma=0.0)
    loud = SynthConfig(residual_sigma=0.0)
    silent_rms = []
    loud_rms = []
    for s in range(20):
        ps = gen_pair(np.random.default_rng(s), 200, "positive", silent)
        pl = gen_pair(np.random.default_rng(s), 200, "positive", loud)
        silent_rms.append(np.sqrt(np.mean(ps.listener_coeff[:, 0] ** 2)))
        loud_rms.append(np.sqrt(np.mean(pl.listener_coeff[:, 0] ** 2)))
    assert max(silent_rms) < 0.02
    assert min(loud_rms) > 0.04
    assert max(silent_rms) < 0.5 * min(loud_rms)


def test_identity_offset_applies_exactly_to_expression_channels():
    id_a = np.full(32, 1.0)
    id_b = np.full(32, -1.0)
    a = pair_for(3, "positive", identity=id_a)
    b = pair_for(3, "positive", identity=id_b)
    diff = a.listener_coeff - b.listener_coeff
    want = CFG.identity_scale * (id_a - id_b)[:8]
    npt.assert_allclose(diff[:, expr_slice(8)], np.broadcast_to(want, (200, 8)),
                        atol=1e-12)
    npt.assert_array_equal(diff[:, ANGLES], 0.0)
    npt.assert_array_equal(diff[:, trans_slice(8)], 0.0)


def test_translation_channels_are_pure_residual():
    p = pair_for(11, "positive")
    trans = p.listener_coeff[:, trans_slice(8)]
    assert 0.01 < trans.std() < 0.04
    assert abs(trans.mean()) < 0.01


def test_attitudes_separate_statistically():
    pos = np.array([pair_for(500 + s, "positive").listener_coeff[:, 3].mean()
                    for s in range(50)])
    neg = np.array([pair_for(600 + s, "negative").listener_coeff[:, 3].mean()
                    for s in range(50)])
    p = permutation_pvalue(pos, neg, 2000, np.random.default_rng(0))
    assert p < 1e-3
    assert pos.min() > neg.max()  # total separation at the raw-data level
