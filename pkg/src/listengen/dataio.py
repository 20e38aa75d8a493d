"""Sequence file format, dataset directory layout, and training batches.

A dialogue pair is stored as one ``.lseq`` file: an ASCII header terminated
by an ``end`` line, then raw little-endian float64 payload in a fixed order
(speaker coefficients, speaker audio, listener coefficients, identity).
Round-trips are bit-exact. A dataset directory holds ``pairs/NNNN.lseq``
plus ``manifest.tsv`` with columns id, attitude, length, listener.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .denoiser import attitude_onehot
from .errors import ConfigError, DataError
from .seeds import generator
from .synth import DialoguePair, SynthConfig, gen_pair

MAGIC = b"LSEQ1"
VERSION = 1
_HEADER_KEYS = ("version", "length", "coeff_dim", "audio_dim", "identity_dim", "fps")


def write_sequence(path, pair: DialoguePair):
    length, d = pair.listener_coeff.shape
    a = pair.speaker_audio.shape[1]
    header = (
        f"{MAGIC.decode()}\n"
        f"version {VERSION}\n"
        f"length {length}\n"
        f"coeff_dim {d}\n"
        f"audio_dim {a}\n"
        f"identity_dim {pair.identity.size}\n"
        f"fps {pair.fps}\n"
        f"attitude {pair.attitude}\n"
        f"end\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for arr in (pair.speaker_coeff, pair.speaker_audio,
                    pair.listener_coeff, pair.identity):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_sequence(path) -> DialoguePair:
    with open(path, "rb") as f:
        blob = f.read()
    mark = blob.find(b"end\n")
    if not blob.startswith(MAGIC + b"\n"):
        raise DataError(f"not a sequence file (bad magic at byte 0): {path}")
    if mark < 0:
        raise DataError(f"corrupt header: no end marker in first {len(blob)} bytes")
    fields = {}
    attitude = None
    for line in blob[len(MAGIC) + 1:mark].decode("ascii").splitlines():
        key, _, value = line.partition(" ")
        if key == "attitude":
            attitude = value
        elif key in _HEADER_KEYS:
            fields[key] = int(value)
        else:
            raise DataError(f"unknown header field {key!r} in {path}")
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing or attitude is None:
        raise DataError(f"header missing fields {missing} in {path}")
    if fields["version"] != VERSION:
        raise DataError(f"unsupported sequence file version {fields['version']}")

    length, d, a = fields["length"], fields["coeff_dim"], fields["audio_dim"]
    ident = fields["identity_dim"]
    payload = blob[mark + 4:]
    sections = (("speaker_coeff", length, d), ("speaker_audio", length, a),
                ("listener_coeff", length, d), ("identity", 1, ident))
    arrays = []
    offset = 0
    for name, rows, cols in sections:
        nbytes = rows * cols * 8
        chunk = payload[offset:offset + nbytes]
        if len(chunk) < nbytes:
            frame = len(chunk) // (cols * 8)
            raise DataError(
                f"truncated sequence file at byte {mark + 4 + offset + len(chunk)}: "
                f"{name} frame {frame} of {rows} incomplete"
            )
        arrays.append(np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(rows, cols))
        offset += nbytes
    if len(payload) != offset:
        raise DataError(f"trailing bytes after payload at byte {mark + 4 + offset}")
    return DialoguePair(speaker_coeff=arrays[0], speaker_audio=arrays[1],
                        listener_coeff=arrays[2], identity=arrays[3].reshape(-1),
                        attitude=attitude, fps=fields["fps"])


def export_csv(path, pair: DialoguePair):
    """Flat CSV for eyeballing; the .lseq binary stays the canonical store."""
    d = pair.listener_coeff.shape[1]
    a = pair.speaker_audio.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame"]
                   + [f"speaker_c{i}" for i in range(d)]
                   + [f"audio_c{i}" for i in range(a)]
                   + [f"listener_c{i}" for i in range(d)])
        for k in range(pair.length):
            w.writerow([k] + list(pair.speaker_coeff[k]) + list(pair.speaker_audio[k])
                       + list(pair.listener_coeff[k]))


def write_manifest(dataset_dir, rows):
    with open(os.path.join(dataset_dir, "manifest.tsv"), "w") as f:
        f.write("id\tattitude\tlength\tlistener\n")
        for r in rows:
            f.write(f"{r['id']}\t{r['attitude']}\t{r['length']}\t{r['listener']}\n")


def read_manifest(dataset_dir):
    path = os.path.join(dataset_dir, "manifest.tsv")
    if not os.path.exists(path):
        raise DataError(f"no manifest.tsv in {dataset_dir}")
    rows = []
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != ["id", "attitude", "length", "listener"]:
            raise DataError(f"unexpected manifest columns {header}")
        for line in f:
            i, att, length, lid = line.rstrip("\n").split("\t")
            rows.append({"id": i, "attitude": att, "length": int(length),
                         "listener": int(lid)})
    return rows


def build_dataset(out_dir, cfg: SynthConfig, seed: int,
                  n_per_attitude: int | None = None, total: int | None = None,
                  n_listeners: int = 10) -> list:
    """Generate pairs round-robin over attitudes and write the directory.

    Exactly one of n_per_attitude/total selects the size. Identities come
    from a pool of n_listeners vectors so several pairs share a listener.
    Same seed, same bytes.
    """
    if (n_per_attitude is None) == (total is None):
        raise ConfigError("specify exactly one of n_per_attitude or total")
    if n_per_attitude is not None:
        if n_per_attitude < 1:
            raise ConfigError("empty dataset requested")
        total = 3 * n_per_attitude
    if total < 1:
        raise ConfigError("empty dataset requested")
    attitudes = ("positive", "neutral", "negative")
    pool = [generator(seed, f"identity{j}").standard_normal(cfg.identity_dim)
            for j in range(n_listeners)]
    pairs_dir = os.path.join(out_dir, "pairs")
    os.makedirs(pairs_dir, exist_ok=True)
    rows = []
    for i in range(total):
        rng = generator(seed, f"pair{i}")
        length = int(rng.integers(cfg.min_length, cfg.max_length + 1))
        lid = i % n_listeners
        pair = gen_pair(rng, length, attitudes[i % 3], cfg, identity=pool[lid])
        pid = f"{i:04d}"
        write_sequence(os.path.join(pairs_dir, f"{pid}.lseq"), pair)
        rows.append({"id": pid, "attitude": pair.attitude, "length": length,
                     "listener": lid})
    write_manifest(out_dir, rows)
    return rows


def load_dataset(dataset_dir) -> list:
    rows = read_manifest(dataset_dir)
    pairs = []
    for r in rows:
        pairs.append(read_sequence(os.path.join(dataset_dir, "pairs", f"{r['id']}.lseq")))
    return pairs


def window_starts(length: int, window: int, stride: int) -> list:
    """Starts 0, stride, 2*stride, ...; tail right-aligned so coverage is total."""
    if length < window:
        raise DataError(f"sequence length {length} below window {window}")
    starts = list(range(0, length - window + 1, stride))
    if starts[-1] != length - window:
        starts.append(length - window)
    return starts


class WindowSample:
    """One training example: aligned speaker/listener windows plus conditioning."""

    __slots__ = ("speaker_visual", "speaker_audio", "listener", "identity", "attitude")

    def __init__(self, speaker_visual, speaker_audio, listener, identity, attitude):
        self.speaker_visual = speaker_visual
        self.speaker_audio = speaker_audio
        self.listener = listener
        self.identity = identity
        self.attitude = attitude  # one-hot [3]


def batch_iter(dataset_dir, window: int, stride: int, batch: int,
               rng: np.random.Generator):
    """One epoch of shuffled batches; every window appears exactly once."""
    pairs = load_dataset(dataset_dir)
    yield from iter_windows(pairs, window, stride, batch, rng)


def iter_windows(pairs, window: int, stride: int, batch: int,
                 rng: np.random.Generator):
    """batch_iter over already-loaded pairs (training loads the set once)."""
    if not pairs:
        raise DataError("dataset is empty")
    index = []
    for pi, pair in enumerate(pairs):
        for start in window_starts(pair.length, window, stride):
            index.append((pi, start))
    order = rng.permutation(len(index))
    out = []
    for j in order:
        pi, start = index[j]
        pair = pairs[pi]
        sl = slice(start, start + window)
        out.append(WindowSample(
            speaker_visual=pair.speaker_coeff[sl],
            speaker_audio=pair.speaker_audio[sl],
            listener=pair.listener_coeff[sl],
            identity=pair.identity,
            attitude=attitude_onehot(pair.attitude),
        ))
        if len(out) == batch:
            yield out
            out = []
    if out:
        yield out
