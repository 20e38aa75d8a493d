"""Command-line entry point.

Subcommands: gen-data, train, sample, eval, grad-check. Every run resolves
its configuration from defaults + optional config file + overrides, logs the
fully resolved config to stderr, and (when it owns an output directory)
writes it there as resolved.cfg. Exit codes: 0 success, 2 config error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import pipeline
from .checkpoint import load_arrays
from .config import (Config, load_config, predictor_config, registry_help,
                     run_config, synth_config)
from .dataio import build_dataset, read_sequence, write_sequence
from .denoiser import ATTITUDES, Conditioning, NoisePredictor, PredictorConfig, attitude_onehot
from .diffusion import build_schedule
from .errors import ConfigError, DataError, ListengenError, NumericError
from .gradcheck import grad_check, make_loss_probe
from .metrics import (MetricReport, attitude_separability, diversity,
                      feature_distance, smoothness, write_svg)
from .seeds import generator

GRAD_CHECK_THRESHOLD = 1e-3


def _resolve(args, flag_overrides) -> Config:
    overrides = list(args.set or [])
    for key, value in flag_overrides:
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def _log_config(cfg: Config, out_dir: str | None = None):
    for line in cfg.lines():
        print(f"config: {line}", file=sys.stderr)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "resolved.cfg"), "w") as f:
            f.write("\n".join(cfg.lines()) + "\n")


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_gen_data(args) -> int:
    cfg = _resolve(args, [("seed", args.seed), ("data.dir", args.out),
                          ("data.n_per_attitude", args.n)])
    out = cfg.get("data.dir")
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    _log_config(cfg, out)
    rows = build_dataset(out, synth_config(cfg), seed=cfg.get("seed"),
                         n_per_attitude=cfg.get("data.n_per_attitude"),
                         n_listeners=cfg.get("data.n_listeners"))
    counts = {a: sum(1 for r in rows if r["attitude"] == a) for a in ATTITUDES}
    summary = ", ".join(f"{a}={counts[a]}" for a in ATTITUDES)
    print(f"wrote {len(rows)} pairs to {out} ({summary})")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args, [("seed", args.seed), ("data.dir", args.data),
                          ("train.out", args.out)])
    out = cfg.get("train.out")
    _log_config(cfg, out)
    result = pipeline.train(run_config(cfg), cfg.get("data.dir"), out,
                            resume=args.resume,
                            log=lambda msg: print(msg, file=sys.stderr))
    print(f"final checkpoint: {result.checkpoint_path}")
    print(f"loss curve: {result.loss_path}")
    return 0


def cmd_sample(args) -> int:
    cfg = _resolve(args, [("seed", args.seed), ("sample.checkpoint", args.checkpoint),
                          ("sample.pair", args.pair), ("sample.n", args.n),
                          ("sample.attitude", args.attitude), ("sample.out", args.out),
                          ("sample.deterministic",
                           "true" if args.deterministic else None)])
    ckpt = cfg.get("sample.checkpoint")
    pair_path = cfg.get("sample.pair")
    if not ckpt:
        raise ConfigError("sample.checkpoint is required (trained .ldif file)")
    if not pair_path:
        raise ConfigError("sample.pair is required (.lseq file with the speaker)")
    out = cfg.get("sample.out")
    _log_config(cfg, out)

    pair = read_sequence(pair_path)
    attitude = cfg.get("sample.attitude") or pair.attitude
    model = NoisePredictor(predictor_config(cfg), generator(cfg.get("seed"), "init"))
    model.params.load_state_dict(load_arrays(ckpt))
    sched = build_schedule(cfg.get("diffusion.steps"), cfg.get("diffusion.beta_start"),
                           cfg.get("diffusion.beta_end"))
    ckpt_hash = _file_sha256(ckpt)
    runs = pipeline.generate(model, sched, pair, pair.identity, attitude,
                             n_samples=cfg.get("sample.n"), seed=cfg.get("seed"),
                             window=cfg.get("train.window"),
                             stride=cfg.get("train.stride"),
                             deterministic=cfg.get("sample.deterministic"),
                             checkpoint_id=ckpt_hash)
    stem = os.path.splitext(os.path.basename(pair_path))[0]
    for run in runs:
        gen_pair_out = read_sequence(pair_path)
        gen_pair_out.listener_coeff = run.sequence
        gen_pair_out.attitude = attitude
        base = os.path.join(out, f"{stem}_s{run.sample_index:03d}")
        write_sequence(base + ".lseq", gen_pair_out)
        with open(base + ".meta", "w") as f:
            f.write(f"seed {run.seed}\nsample {run.sample_index}\n"
                    f"checkpoint {run.checkpoint_id}\nattitude {run.attitude}\n"
                    f"duration_s {run.duration_s:.3f}\n")
    print(f"wrote {len(runs)} samples to {out}")
    return 0


def _ref_id(name: str) -> str:
    stem = os.path.splitext(name)[0]
    head, sep, tail = stem.rpartition("_s")
    if sep and tail.isdigit():
        return head
    return stem


def cmd_eval(args) -> int:
    cfg = _resolve(args, [("seed", args.seed), ("eval.out", args.out),
                          ("eval.n_perm", args.n_perm)])
    out = cfg.get("eval.out")
    _log_config(cfg, out)
    gen_files = sorted(f for f in os.listdir(args.gen) if f.endswith(".lseq"))
    if not gen_files:
        raise DataError(f"no .lseq files in {args.gen}")

    fds = []
    smooths = []
    by_ref = {}
    by_attitude = {a: [] for a in ATTITUDES}
    first_traces = None
    for name in gen_files:
        gen = read_sequence(os.path.join(args.gen, name))
        ref_path = os.path.join(args.ref, f"{_ref_id(name)}.lseq")
        if not os.path.exists(ref_path):
            raise DataError(f"no reference {ref_path} for generated {name}")
        ref = read_sequence(ref_path)
        fds.append(feature_distance(gen.listener_coeff, ref.listener_coeff))
        smooths.append(smoothness(gen.listener_coeff))
        by_ref.setdefault(_ref_id(name), []).append(gen.listener_coeff)
        by_attitude.setdefault(gen.attitude, []).append(gen.listener_coeff)
        if first_traces is None:
            first_traces = {"generated pitch": gen.listener_coeff[:, 0],
                            "reference pitch": ref.listener_coeff[:, 0]}

    groups = [g for g in by_ref.values() if len(g) >= 2]
    div = float(np.mean([diversity(g) for g in groups])) if groups else 0.0
    if all(len(v) >= 10 for v in by_attitude.values()):
        sep = attitude_separability(by_attitude, n_perm=cfg.get("eval.n_perm"),
                                    seed=cfg.get("seed"))
        sep_p = sep.min_p
    else:
        sep_p = 1.0  # not enough sequences per attitude; no separation evidence
    fd = np.mean(np.array(fds), axis=0)
    report = MetricReport(fd_angle=float(fd[0]), fd_exp=float(fd[1]),
                          fd_trans=float(fd[2]), diversity=div,
                          separability_p=sep_p,
                          smoothness=float(np.mean(smooths)),
                          n_sequences=len(gen_files))
    report_path = os.path.join(out, "report.tsv")
    report.write_tsv(report_path)
    for metric, value in report.rows():
        print(f"{metric}\t{value:.6g}" if isinstance(value, float)
              else f"{metric}\t{value}")
    if args.svg and first_traces:
        svg_path = os.path.join(out, "traces.svg")
        write_svg(svg_path, first_traces, title="pitch, generated vs reference")
        print(f"traces: {svg_path}", file=sys.stderr)
    print(f"report: {report_path}", file=sys.stderr)
    return 0


def cmd_grad_check(args) -> int:
    rng = generator(args.seed or 0, "gradcheck")
    model_cfg = PredictorConfig(channels=args.channels, width=args.width,
                                layers=args.layers, heads=args.heads,
                                identity_dim=args.identity_dim,
                                audio_dim=args.audio_dim, max_step=args.steps)
    model = NoisePredictor(model_cfg, rng)
    sched = build_schedule(args.steps, 1e-3, 0.05)
    cond = Conditioning(
        speaker_visual=rng.standard_normal((args.frames, args.channels)),
        speaker_audio=rng.standard_normal((args.frames, args.audio_dim)),
        identity=rng.standard_normal(args.identity_dim),
        attitude=attitude_onehot(ATTITUDES[int(rng.integers(0, 3))]),
    )
    x0 = rng.standard_normal((args.frames, args.channels))
    f = make_loss_probe(model, sched, cond, x0, rng)
    err = grad_check(f, model.params, h=args.h, rng=rng)
    print(f"max_rel_err {err:.6e}")
    if err >= GRAD_CHECK_THRESHOLD:
        print(f"error: numeric: gradient check failed: {err:.3e} >= {GRAD_CHECK_THRESHOLD}",
              file=sys.stderr)
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="listengen",
        description="Conditional diffusion generation of listener head-motion "
                    "coefficient sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override (repeatable)")
        p.formatter_class = argparse.RawDescriptionHelpFormatter
        p.epilog = registry_help()

    p = sub.add_parser("gen-data", help="generate a synthetic paired dataset",
                       description="Write N pairs per attitude plus manifest.tsv.")
    common(p)
    p.add_argument("--out", default=None, help="dataset directory (data.dir)")
    p.add_argument("--n", type=int, default=None, help="pairs per attitude")
    p.add_argument("--force", action="store_true",
                   help="write into a non-empty directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the noise predictor",
                       description="Noise-prediction training; one checkpoint per epoch.")
    common(p)
    p.add_argument("--data", default=None, help="dataset directory (data.dir)")
    p.add_argument("--out", default=None, help="run directory (train.out)")
    p.add_argument("--resume", action="store_true",
                   help="continue from the latest checkpoint in --out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate listener sequences",
                       description="Sample n listener sequences for one speaker pair.")
    common(p)
    p.add_argument("--checkpoint", default=None, help="trained .ldif checkpoint")
    p.add_argument("--pair", default=None, help=".lseq file providing the speaker")
    p.add_argument("--n", type=int, default=None, help="number of samples")
    p.add_argument("--attitude", choices=ATTITUDES, default=None,
                   help="attitude label (default: the pair's own)")
    p.add_argument("--out", default=None, help="output directory (sample.out)")
    p.add_argument("--deterministic", action="store_true",
                   help="zero all sampling noise (regression baseline)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score generated sequences",
                       description="Compare generated .lseq files against references "
                                   "matched by name (NNNN_sKKK.lseq -> NNNN.lseq).")
    common(p)
    p.add_argument("--gen", required=True, help="directory of generated .lseq files")
    p.add_argument("--ref", required=True, help="directory of reference .lseq files")
    p.add_argument("--out", default=None, help="output directory (eval.out)")
    p.add_argument("--n-perm", type=int, default=None, dest="n_perm",
                   help="permutations for the separability test")
    p.add_argument("--svg", action="store_true", help="also write a pitch-trace SVG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "grad-check",
        help="finite-difference check of the full model gradient",
        description="Build a small model, freeze one loss draw, and compare tape "
                    f"gradients against central differences. Exit 0 iff the max "
                    f"relative error is below {GRAD_CHECK_THRESHOLD}.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--identity-dim", type=int, default=8, dest="identity_dim")
    p.add_argument("--audio-dim", type=int, default=45, dest="audio_dim")
    p.add_argument("--steps", type=int, default=50, help="diffusion steps")
    p.add_argument("--h", type=float, default=1e-5, help="finite-difference step")
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"error: data: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"error: numeric: {e}", file=sys.stderr)
        return 4
    except ListengenError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
