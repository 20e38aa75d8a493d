"""Feature-level metrics: distance to ground truth, sample diversity,
attitude separability, and frame-to-frame smoothness.

Channel-group conventions follow :mod:`listengen.synth`: channels [0:3] are
head angles, [3:3+E] expression, [3+E:6+E] translation. Distances report
mean absolute difference per group scaled by 100. Diversity is the spread
of the raw angle channels across samples under fixed conditioning; there is
no pretrained pose embedding at this scale, and the README documents that
substitution.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DataError
from .synth import ANGLES, expr_slice, trans_slice


@dataclasses.dataclass
class MetricReport:
    fd_angle: float
    fd_exp: float
    fd_trans: float
    diversity: float
    separability_p: float
    smoothness: float
    n_sequences: int

    def rows(self):
        return [("fd_angle", self.fd_angle), ("fd_exp", self.fd_exp),
                ("fd_trans", self.fd_trans), ("diversity", self.diversity),
                ("separability_p", self.separability_p),
                ("smoothness", self.smoothness),
                ("n_sequences", self.n_sequences)]

    def write_tsv(self, path):
        with open(path, "w") as f:
            f.write("metric\tvalue\n")
            for name, value in self.rows():
                f.write(f"{name}\t{value:.10g}\n")


def feature_distance(gen: np.ndarray, gt: np.ndarray) -> tuple:
    """(fd_angle, fd_exp, fd_trans): mean |gen - gt| per channel group, x100."""
    if gen.shape != gt.shape:
        raise DataError(f"sequence shapes differ: {gen.shape} vs {gt.shape}")
    e = gen.shape[1] - 6
    if e < 1:
        raise DataError(f"need at least 7 channels (3 angle + expr + 3 trans), got {gen.shape[1]}")
    diff = np.abs(gen - gt)
    return (100.0 * diff[:, ANGLES].mean(),
            100.0 * diff[:, expr_slice(e)].mean(),
            100.0 * diff[:, trans_slice(e)].mean())


def diversity(samples) -> float:
    """Average per-frame, per-angle-channel standard deviation across samples."""
    if len(samples) < 2:
        raise DataError(f"diversity needs >= 2 samples, got {len(samples)}")
    lengths = {s.shape for s in samples}
    if len(lengths) != 1:
        raise DataError(f"diversity needs equal-shaped samples, got {sorted(lengths)}")
    stack = np.stack([s[:, ANGLES] for s in samples])  # [n, L, 3]
    if np.all(stack == stack[0]):
        return 0.0  # identical samples have exactly zero spread, no float dust
    return float(stack.std(axis=0).mean())


def smoothness(seq: np.ndarray) -> float:
    """Max L-infinity frame-to-frame jump over the angle channels."""
    if len(seq) < 2:
        raise DataError(f"smoothness needs >= 2 frames, got {len(seq)}")
    jumps = np.abs(np.diff(seq[:, ANGLES], axis=0))
    return float(jumps.max())


def permutation_pvalue(a: np.ndarray, b: np.ndarray, n_perm: int,
                       rng: np.random.Generator) -> float:
    """Two-sided permutation test on the difference of group means.

    p = (#{permuted |gap| >= observed |gap|} + 1) / (n_perm + 1), the
    add-one form that never returns exactly 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pooled = np.concatenate([a, b])
    na = len(a)
    observed = abs(a.mean() - b.mean())
    count = 0
    for _ in range(n_perm):
        perm = rng.permutation(pooled)
        if abs(perm[:na].mean() - perm[na:].mean()) >= observed:
            count += 1
    return (count + 1) / (n_perm + 1)


@dataclasses.dataclass
class SeparabilityResult:
    p_smile: float      # positive vs rest on expression channel 0
    p_frown: float      # negative vs rest on expression channel 1
    gap_smile: float
    gap_frown: float

    @property
    def min_p(self) -> float:
        return min(self.p_smile, self.p_frown)


def attitude_separability(samples_by_attitude: dict, n_perm: int = 10000,
                          seed: int = 0, min_per_group: int = 10) -> SeparabilityResult:
    """Permutation tests on the designated expression channels.

    samples_by_attitude maps attitude name -> list of [L, D] sequences.
    Each sequence contributes one scalar per channel (its frame mean); the
    smile test compares positive against the rest on expression channel 0
    and the frown test compares negative against the rest on channel 1.
    """
    for name in ("positive", "neutral", "negative"):
        got = len(samples_by_attitude.get(name, ()))
        if got < min_per_group:
            raise DataError(
                f"attitude_separability needs >= {min_per_group} sequences per "
                f"attitude, got {got} for {name!r}"
            )

    def channel_means(seqs, channel):
        return np.array([s[:, channel].mean() for s in seqs])

    rng = np.random.default_rng(seed)
    results = []
    for target, channel in (("positive", 3), ("negative", 4)):
        own = channel_means(samples_by_attitude[target], channel)
        rest = np.concatenate([
            channel_means(samples_by_attitude[name], channel)
            for name in ("positive", "neutral", "negative") if name != target
        ])
        p = permutation_pvalue(own, rest, n_perm, rng)
        results.append((p, float(own.mean() - rest.mean())))
    (p_smile, gap_smile), (p_frown, gap_frown) = results
    return SeparabilityResult(p_smile=p_smile, p_frown=p_frown,
                              gap_smile=gap_smile, gap_frown=gap_frown)


def write_svg(path, series: dict, title: str = "", width: int = 900,
              height: int = 300):
    """Self-contained SVG line plot of named 1-D traces (no plotting deps)."""
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    pad = 40
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    if not arrays:
        raise DataError("write_svg needs at least one series")
    lo = min(a.min() for a in arrays.values())
    hi = max(a.max() for a in arrays.values())
    if hi == lo:
        hi = lo + 1.0
    n = max(len(a) for a in arrays.values())
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad // 2}" width="{width - 2 * pad}" '
        f'height="{height - pad - pad // 2}" fill="none" stroke="#888"/>',
        f'<text x="{pad}" y="{pad // 2 - 6}" font-size="13">{title}</text>',
        f'<text x="{pad - 36}" y="{pad // 2 + 10}" font-size="10">{hi:.3g}</text>',
        f'<text x="{pad - 36}" y="{height - pad + 4}" font-size="10">{lo:.3g}</text>',
    ]
    for ci, (name, a) in enumerate(arrays.items()):
        xs = pad + (width - 2 * pad) * np.arange(len(a)) / max(n - 1, 1)
        ys = (height - pad) - (height - pad - pad // 2) * (a - lo) / (hi - lo)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        color = colors[ci % len(colors)]
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                     f'stroke-width="1.2"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 14 * ci}" '
                     f'font-size="11" fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))
