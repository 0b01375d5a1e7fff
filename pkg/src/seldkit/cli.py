"""Command-line front end: batch feature extraction, augmentation,
ACCDOA encode/decode, scoring, gradient checks, and ensembling.

Every subcommand is deterministic given its inputs, flags, and seed. Exit
codes: 0 success, 1 input error (bad files, bad flags), 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import accdoa, augment, features, metrics, se_block
from .dataset_io import (
    N_CLASSES,
    read_feature_file,
    read_foa_wav,
    read_label_csv,
    read_manifest,
    write_feature_file,
    write_label_csv,
)
from .errors import SeldkitError, ShapeMismatch

GRADCHECK_TOLERANCE = 1e-6


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; bad flags are input errors (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except SeldkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # invariant violations, not input problems
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seldkit",
                     description="SELD feature/augmentation/metrics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[], help="manifest WAVs -> feature files")
    p.add_argument("manifest", help="CSV with header audio_path,label_path,split")
    p.add_argument("out_dir", help="directory for .slsa feature files")
    p.add_argument("--stats", metavar="PATH",
                   help="normalization stats file: loaded if present, "
                        "otherwise fitted on this run and saved here; "
                        "features are written normalized")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("augment", help="augment one feature/label pair")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True, help="ACCDOA tensor file")
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--partner-features", help="mixup partner feature file")
    p.add_argument("--partner-labels", help="mixup partner label file")
    p.add_argument("--config", help="key=value file with augmentation knobs")
    p.add_argument("--seed", type=int, help=f"default {augment.DEFAULT_SEED}")
    for key in augment.CONFIG_FLOAT_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", type=float, dest=key)
    p.add_argument("--ps-range", type=int, dest="ps_range")
    p.add_argument("--mode", choices=augment.MODES)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("encode", help="label CSV -> ACCDOA tensor")
    p.add_argument("labels", help="label CSV")
    p.add_argument("--frames", type=int, required=True, help="label frame count")
    p.add_argument("--classes", type=int, default=N_CLASSES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="ACCDOA tensor -> label CSV")
    p.add_argument("tensor")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="score predictions against references")
    p.add_argument("pred", help="label CSV, or an ACCDOA tensor with --sweep")
    p.add_argument("ref", help="reference label CSV")
    p.add_argument("--sweep", action="store_true",
                   help="decode pred at thresholds 0.3/0.5/0.7 and score each")
    p.add_argument("--average", choices=("macro", "micro"), default="macro")
    p.add_argument("--report", metavar="CSV", help="also write scores as CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gradcheck", help="verify SE-block gradients")
    p.add_argument("--shape", default="4,6,5", help="C,F,T (default 4,6,5)")
    p.add_argument("--ratio", type=int, default=2,
                   help="reduction ratio, must divide C and F")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ensemble", help="average ACCDOA tensors")
    p.add_argument("tensors", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--csv", help="also decode the average to this label CSV")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("stats", help="fit normalization stats on feature files")
    p.add_argument("features", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def cmd_extract(args) -> int:
    manifest = read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.threads < 1:
        raise SeldkitError(f"--threads must be >= 1, got {args.threads}")

    def extract_one(entry):
        return features.salsa(read_foa_wav(entry.audio_path))

    results = []
    failures = []
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        futures = [(e, pool.submit(extract_one, e)) for e in manifest.entries]
        for entry, future in futures:
            try:
                results.append((entry, future.result()))
            except (SeldkitError, OSError) as exc:
                failures.append((entry.audio_path, exc))

    stats = None
    if args.stats:
        stats_path = Path(args.stats)
        if stats_path.exists():
            stats = features.load_norm_stats(stats_path)
        else:
            stats = features.compute_norm_stats(t for _, t in results)
            features.save_norm_stats(stats, stats_path)
            print(f"fitted stats over {len(results)} clips -> {stats_path}")

    for entry, tensor in results:
        if stats is not None:
            tensor = features.normalize(tensor, stats)
        out_path = out_dir / (Path(entry.audio_path).stem + ".slsa")
        write_feature_file(tensor, out_path)
        print(f"wrote {out_path}")

    for path, exc in failures:
        print(f"error: {path}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_augment(args) -> int:
    feats = read_feature_file(args.features)
    labs = read_feature_file(args.labels).astype(np.float64)
    feats = _trim_to_labels(feats, labs.shape[2])

    mapping = augment.parse_config_file(args.config) if args.config else {}
    for key in (*augment.CONFIG_FLOAT_KEYS, "ps_range", "mode", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    config, seed = augment.config_from_mapping(mapping)

    if bool(args.partner_features) != bool(args.partner_labels):
        raise SeldkitError(
            "--partner-features and --partner-labels must be given together"
        )
    partner = None
    if args.partner_features:
        p_feats = read_feature_file(args.partner_features)
        p_labs = read_feature_file(args.partner_labels).astype(np.float64)
        partner = (_trim_to_labels(p_feats, p_labs.shape[2]), p_labs)

    out_f, out_l = augment.augment_pipeline(
        (feats, labs), partner, config, augment.make_rng(seed)
    )
    write_feature_file(out_f, args.out_features)
    write_feature_file(out_l, args.out_labels)
    print(f"wrote {args.out_features} and {args.out_labels} (seed {seed})")
    return 0


def cmd_encode(args) -> int:
    events = read_label_csv(args.labels, n_classes=args.classes)
    tensor = accdoa.encode(events, args.frames, args.classes)
    write_feature_file(tensor, args.out)
    print(f"wrote {args.out} ({len(events)} events, {args.frames} frames)")
    return 0


def cmd_decode(args) -> int:
    events = accdoa.decode(read_feature_file(args.tensor), args.threshold)
    write_label_csv(events, args.out)
    print(f"wrote {args.out} ({len(events)} events at threshold {args.threshold})")
    return 0


def cmd_score(args) -> int:
    refs = read_label_csv(args.ref)
    if args.sweep:
        rows = metrics.threshold_sweep(
            read_feature_file(args.pred), refs, average=args.average
        )
        print(metrics.format_sweep_table(rows))
        if args.report:
            lines = ["threshold,er,f1,le,lr"]
            for thr, s in rows:
                lines.append(f"{thr},{s.er:.6f},{s.f1:.6f},{s.le:.6f},{s.lr:.6f}")
            Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return 0
    scores = metrics.compute_seld_scores(
        read_label_csv(args.pred), refs, average=args.average
    )
    print(metrics.format_scores_line(scores))
    if args.report:
        Path(args.report).write_text(metrics.scores_to_csv(scores), encoding="utf-8")
    return 0


def cmd_gradcheck(args) -> int:
    try:
        c, f, t = (int(v) for v in args.shape.split(","))
    except ValueError as exc:
        raise SeldkitError(f"--shape must be C,F,T integers: {exc}") from exc
    r = args.ratio
    if c % r != 0 or f % r != 0:
        raise SeldkitError(f"ratio {r} must divide both C={c} and F={f}")

    variants = {
        "channel": se_block.channel_gradcheck_ops(),
        "freq": se_block.freq_gradcheck_ops(),
        "multi": se_block.multi_gradcheck_ops(),
    }
    all_pass = True
    for name, (fwd, bwd) in variants.items():
        worst = 0.0
        for seed in range(args.seeds):
            rng = augment.make_rng(seed)
            x = rng.standard_normal((c, f, t))
            if name == "channel":
                params = se_block.random_params(rng, c, r).as_arrays()
            elif name == "freq":
                params = se_block.random_params(rng, f, r).as_arrays()
            else:
                params = (se_block.random_params(rng, f, r).as_arrays()
                          + se_block.random_params(rng, c, r).as_arrays())
            worst = max(worst, se_block.gradcheck(fwd, bwd, x, params, args.eps))
        ok = worst < GRADCHECK_TOLERANCE
        all_pass = all_pass and ok
        verdict = "PASS" if ok else "FAIL"
        print(f"{name}: {verdict} max_rel_err {worst:.3e} "
              f"(threshold {GRADCHECK_TOLERANCE:g})")
    print(f"{3 * args.seeds} checks total")
    return 0 if all_pass else 1


def cmd_ensemble(args) -> int:
    tensors = [read_feature_file(p) for p in args.tensors]
    avg = accdoa.ensemble_average(tensors)
    write_feature_file(avg, args.out)
    print(f"wrote {args.out} (mean of {len(tensors)} tensors)")
    if args.csv:
        write_label_csv(accdoa.decode(avg, args.threshold), args.csv)
        print(f"wrote {args.csv}")
    return 0


def cmd_stats(args) -> int:
    stats = features.compute_norm_stats(
        read_feature_file(p) for p in args.features
    )
    features.save_norm_stats(stats, args.out)
    print(f"wrote {args.out} (fitted on {len(args.features)} files)")
    return 0


def _trim_to_labels(feats: np.ndarray, n_label_frames: int) -> np.ndarray:
    """Drop the tail feature frames that do not fill a label frame.

    A clip whose sample count is not a multiple of the hop leaves up to 7
    spare STFT frames; anything beyond that is a real misalignment.
    """
    need = accdoa.FEATURE_FRAMES_PER_LABEL_FRAME * n_label_frames
    have = feats.shape[2]
    if have < need or have - need >= accdoa.FEATURE_FRAMES_PER_LABEL_FRAME:
        raise ShapeMismatch(
            f"{have} feature frames cannot serve {n_label_frames} label frames"
        )
    return feats[:, :, :need]


if __name__ == "__main__":
    sys.exit(main())
