"""Command line interface.

    vehicle-audio ingest MANIFEST --out DIR
    vehicle-audio quality MANIFEST --class truck --out DIR
    vehicle-audio augment MANIFEST --factors 1.5,0.8,1.2 --out augmented.csv
    vehicle-audio features MANIFEST --kind mfcc --out DIR
    vehicle-audio train FEATURES.npz --out DIR
    vehicle-audio evaluate CHECKPOINT FEATURES.npz --out DIR
    vehicle-audio pipeline --config run.ini --out DIR
    vehicle-audio inspect CLIP.wav --what mel --format pgm --out DIR

Exit codes: 0 success, 1 internal error, 2 invalid input or configuration.
A failing ``pipeline`` stage exits with 2 for bad input, otherwise 10 + stage number.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import nn
from .audio_io import load_clip
from .augment import StretchSpec, augment_set
from .config import load_config
from .dataset import ClassLabel, load_manifest, write_manifest
from .errors import VehicleAudioError
from .eval_report import render_comparison
from .features import FEATURE_KINDS, extract, magnitude_spectrum, spectrum_frequencies, write_pgm
from .pipeline import (StageError, evaluate, extract_features, ingest, load_features, run_pipeline,
                       model_hyper, save_features, train_config, train_log_csv, write_augmented,
                       write_quality_outputs)
from .quality import filter_by_quality, frame_rmse

log = logging.getLogger("vehicle_audio")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _common(p):
    p.add_argument("--config", help="run configuration file (INI, [run] section)")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads for per-file stages")
    p.add_argument("--out", default=None, help="output directory or file")
    p.add_argument("-v", "--verbose", action="store_true")


def _cfg(args, **extra):
    return load_config(args.config, seed=args.seed, jobs=args.jobs,
                       out_dir=args.out if getattr(args, "out", None) else None, **extra)


def _out_dir(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args):
    cfg = _cfg(args)
    out = _out_dir(args, cfg.out_dir)
    res = ingest(args.manifest, out / "cache", cfg.jobs)
    write_manifest(out / "ingested.csv", res.records)
    print(res.summary())
    return EXIT_OK


def cmd_quality(args):
    cfg = _cfg(args)
    out = _out_dir(args, cfg.out_dir)
    records = load_manifest(args.manifest)
    target = ClassLabel(args.target_class or cfg.quality_class)
    res = filter_by_quality(records, target, seed=cfg.seed)
    write_quality_outputs(res, target, out)
    print(f"{target.value}: cluster sizes {res.model.sizes().tolist()}, "
          f"kept {len(res.rows) - len(res.rejected)}, rejected {len(res.rejected)}")
    return EXIT_OK


def cmd_augment(args):
    cfg = _cfg(args)
    factors = tuple(float(f) for f in args.factors.split(",") if f.strip()) if args.factors \
        else cfg.stretch_factors
    spec = StretchSpec(factors, not args.no_original)
    records = load_manifest(args.manifest)
    target = ClassLabel(args.target_class) if args.target_class else None
    grown = []
    for r in records:
        if target is None or r.label == target:
            grown.extend(augment_set([r], spec))
        else:
            grown.append(r)
    out = Path(args.out or Path(args.manifest).with_name(Path(args.manifest).stem + "_augmented.csv"))
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "augmented.csv"
    write_augmented(grown, out)
    print(f"{len(records)} records -> {len(grown)}; manifest {out}")
    return EXIT_OK


def cmd_features(args):
    cfg = _cfg(args)
    out = _out_dir(args, cfg.out_dir)
    kind = args.kind or cfg.feature
    records = load_manifest(args.manifest)
    X = extract_features(records, kind, lambda r: r.load(), cfg.jobs)
    save_features(out / f"features_{kind}.npz", X, records, kind)
    print(f"{len(records)} clips -> {out / f'features_{kind}.npz'} shape {X.shape}")
    return EXIT_OK


def cmd_train(args):
    cfg = _cfg(args)
    out = _out_dir(args, cfg.out_dir)
    d = load_features(args.features)
    splits = d["splits"]
    train_mask = np.isin(splits, ["train", "unassigned"])
    val_mask = splits == "val"
    X, y = d["X"], d["labels"]
    tcfg, hyper = train_config(cfg), model_hyper(cfg)
    model = nn.build_model(X.shape[1], X.shape[2], hyper, seed=cfg.seed)
    rep = nn.train(model, X[train_mask], y[train_mask], tcfg,
                   val_features=X[val_mask] if val_mask.any() else None,
                   val_labels=y[val_mask] if val_mask.any() else None,
                   log=print if args.verbose else None)
    fp = cfg.fingerprint()
    nn.save_checkpoint(out / "checkpoint.json", model, tcfg, fingerprint=fp, feature=str(d["kind"]))
    (out / "train_log.csv").write_text(train_log_csv(rep, fp), encoding="utf-8")
    print(f"trained {tcfg.epochs} epochs on {int(train_mask.sum())} samples -> {out / 'checkpoint.json'}")
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _cfg(args)
    out = _out_dir(args, cfg.out_dir)
    model, meta = nn.load_checkpoint(args.checkpoint)
    d = load_features(args.features)
    mask = d["splits"] == args.split if args.split != "all" else np.ones(len(d["labels"]), bool)
    if not mask.any():
        raise InputError(f"no samples with split {args.split!r} in {args.features}")
    if mask.any() and d["synthetic"][mask].any() and not args.allow_synthetic:
        raise InputError("evaluation set contains synthetic (augmented) records; "
                         "pass --allow-synthetic to evaluate anyway")
    rep = evaluate(model, d["X"][mask], d["labels"][mask], str(d["kind"]), meta.get("fingerprint"))
    (out / "report.csv").write_text(rep.to_csv(), encoding="utf-8")
    (out / "report.txt").write_text(rep.to_text(), encoding="utf-8")
    (out / "confusion.csv").write_text(rep.confusion.to_csv(), encoding="utf-8")
    text = rep.to_text()
    if args.baseline:
        cmp_ = render_comparison(rep, args.baseline)
        (out / "comparison.txt").write_text(cmp_.text, encoding="utf-8")
        (out / "comparison.csv").write_text(cmp_.csv, encoding="utf-8")
        text += "\n" + cmp_.text
    print(text, end="")
    return EXIT_OK


def cmd_pipeline(args):
    overrides = {}
    if args.manifest:
        overrides["manifest"] = args.manifest
    if args.feature:
        overrides["feature"] = args.feature
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.no_quality:
        overrides["quality_gate"] = False
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value
    cfg = _cfg(args, **overrides)
    result = run_pipeline(cfg, progress=print)
    print(result.report.to_text(), end="")
    return EXIT_OK


def cmd_inspect(args):
    target = Path(args.target)
    if not target.is_file():
        raise InputError(f"no such clip: {target}")
    out = _out_dir(args, "inspect")
    clip = load_clip(target)
    stem = target.stem
    whats = [args.what] if args.what != "all" else [*FEATURE_KINDS, "rmse", "spectrum"]
    written = []
    for what in whats:
        if what in FEATURE_KINDS:
            fm = extract(clip, what)
            if args.format in ("csv", "both"):
                fm.to_csv(out / f"{stem}_{what}.csv")
                written.append(out / f"{stem}_{what}.csv")
            if args.format in ("pgm", "both"):
                fm.to_pgm(out / f"{stem}_{what}.pgm")
                written.append(out / f"{stem}_{what}.pgm")
        elif what == "rmse":
            r = frame_rmse(clip).values
            lines = ["frame,rmse", *[f"{i},{v!r}" for i, v in enumerate(r.tolist())]]
            (out / f"{stem}_rmse.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(out / f"{stem}_rmse.csv")
            if args.format in ("pgm", "both"):
                write_pgm(r[None, :], out / f"{stem}_rmse.pgm")
        elif what == "spectrum":
            mag = magnitude_spectrum(clip)
            freqs = spectrum_frequencies(len(clip), clip.sample_rate)
            lines = ["freq_hz,magnitude", *[f"{f!r},{m!r}" for f, m in zip(freqs.tolist(), mag.tolist())]]
            (out / f"{stem}_spectrum.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(out / f"{stem}_spectrum.csv")
        else:
            raise InputError(f"unknown inspect target {what!r}")
    for p in written:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vehicle-audio", description="Acoustic vehicle sub-type classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="decode, downmix, resample and cache clips")
    p.add_argument("manifest")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("quality", help="RMSE/k-means quality gate")
    p.add_argument("manifest")
    p.add_argument("--class", dest="target_class", default=None, help="class to gate (default truck)")
    _common(p)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("augment", help="time-stretch augmentation")
    p.add_argument("manifest")
    p.add_argument("--factors", default=None, help="comma separated stretch factors (default 1.5,0.8,1.2)")
    p.add_argument("--class", dest="target_class", default=None, help="only augment this class")
    p.add_argument("--no-original", action="store_true", help="drop the unstretched originals")
    _common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("features", help="extract mel / mfcc / gfcc features")
    p.add_argument("manifest")
    p.add_argument("--kind", choices=FEATURE_KINDS, default=None)
    _common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the CNN on extracted features")
    p.add_argument("features")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("features")
    p.add_argument("--split", default="test", choices=["train", "val", "test", "unassigned", "all"])
    p.add_argument("--baseline", default=None, help="published fixture to compare against")
    p.add_argument("--allow-synthetic", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full experiment")
    p.add_argument("--manifest", default=None)
    p.add_argument("--feature", choices=FEATURE_KINDS, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--no-quality", action="store_true", help="skip the quality gate")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    _common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("inspect", help="dump features, RMSE curve or spectrum of a clip")
    p.add_argument("target")
    p.add_argument("--what", default="all", help="mel, mfcc, gfcc, rmse, spectrum or all")
    p.add_argument("--format", choices=["csv", "pgm", "both"], default="both")
    _common(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (InputError, VehicleAudioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
