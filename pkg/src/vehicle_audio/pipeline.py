"""Stage functions behind the command line: ingest, quality gate, augmentation,
feature extraction, training, evaluation and the end-to-end experiment runner."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .audio_io import CLIP_SECONDS, WORKING_RATE, MonoClip, decode_wav, normalize_clip, write_wav
from .augment import StretchSpec, augment_set
from .config import RunConfig
from .dataset import (CLASS_ORDER, ClassLabel, SampleRecord, balanced_subsample, class_counts,
                      load_manifest, select_split, shuffle_split, split_by_speed, write_manifest)
from .errors import InvalidArgument, ManifestError, VehicleAudioError
from .eval_report import EvalReport, confusion, metrics, render_comparison
from .features import extract
from .quality import QualityResult, filter_by_quality

log = logging.getLogger(__name__)

STAGES = ("ingest", "quality", "augment", "split", "features", "train", "evaluate")


class StageError(VehicleAudioError):
    """A pipeline stage failed. ``exit_code`` is 2 for bad input, else 10 + stage number."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        bad_input = isinstance(cause, (VehicleAudioError, ValueError, FileNotFoundError))
        self.exit_code = 2 if bad_input else 10 + STAGES.index(stage) + 1
        super().__init__(f"stage '{stage}' failed: {cause}")


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- clip store

class ClipStore:
    """Normalised clips cached as .npy files keyed by a hash of the WAV bytes and target format."""

    def __init__(self, root, rate: int = WORKING_RATE, seconds: float = CLIP_SECONDS):
        self.root = Path(root)
        self.rate, self.seconds = rate, seconds
        self.root.mkdir(parents=True, exist_ok=True)
        self.index: dict[str, Path] = {}

    def key(self, data: bytes) -> str:
        h = hashlib.sha256(data)
        h.update(f"|{self.rate}|{self.seconds}".encode())
        return h.hexdigest()

    def put(self, path: str) -> tuple[Path, bool]:
        """Cache the clip at ``path``; returns (cache file, whether it had to be decoded)."""
        data = Path(path).read_bytes()
        target = self.root / f"{self.key(data)}.npy"
        decoded = False
        if not target.exists():
            clip = normalize_clip(decode_wav(data), self.rate, self.seconds)
            tmp = target.with_suffix(".tmp.npy")
            np.save(tmp, clip.samples)
            tmp.replace(target)
            decoded = True
        self.index[path] = target
        return target, decoded

    def load(self, record: SampleRecord) -> MonoClip:
        if record.clip is not None:
            return record.clip
        cached = self.index.get(record.path)
        if cached is None:
            cached, _ = self.put(record.path)
        return MonoClip(np.load(cached), self.rate)


@dataclass
class IngestResult:
    records: list
    store: ClipStore
    decoded: int
    cached: int

    def summary(self) -> str:
        counts = class_counts(self.records)
        parts = ", ".join(f"{c.value}={counts[c]}" for c in CLASS_ORDER)
        return f"{len(self.records)} clips ({parts}); decoded {self.decoded}, cache hits {self.cached}"


def ingest(manifest, cache_dir, jobs: int = 1) -> IngestResult:
    """Decode, downmix, resample and fix the duration of every manifest entry, with caching."""
    records = load_manifest(manifest, validate_files=False)
    store = ClipStore(cache_dir)
    failures = []

    def one(r):
        try:
            return store.put(r.path)[1]
        except (OSError, VehicleAudioError) as exc:
            failures.append(f"{r.path}: {exc}")
            return None

    decoded = _map(one, records, jobs)
    if failures:
        raise ManifestError(f"{len(failures)} file(s) failed to ingest: {failures[0]}", failures)
    n_dec = sum(1 for d in decoded if d)
    return IngestResult(records, store, n_dec, len(records) - n_dec)


# ---------------------------------------------------------------- quality

def quality_report_csv(result: QualityResult, target_class) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "class", "mean_rmse", "cluster", "label"])
    for record, rmse, cluster, label in result.rows:
        w.writerow([record.path, ClassLabel(target_class).value, f"{float(np.mean(rmse.values)):.8f}",
                    cluster, label.value])
    return buf.getvalue()


def rmse_curves_csv(result: QualityResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = len(result.rows[0][1]) if result.rows else 0
    w.writerow(["path", "label", *[f"f{i}" for i in range(n)]])
    for record, rmse, _, label in result.rows:
        w.writerow([record.path, label.value, *[f"{v:.8f}" for v in rmse.values]])
    return buf.getvalue()


def stamp_csv(text: str, fingerprint=None) -> str:
    """Append a ``fingerprint`` footer row padded to the header width."""
    if not fingerprint:
        return text
    width = len(next(csv.reader(io.StringIO(text))))
    return text + ",".join(["fingerprint", fingerprint] + [""] * (width - 2)) + "\n"


def write_quality_outputs(result: QualityResult, target_class, out_dir, fingerprint=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "kept.csv", result.kept, fingerprint=fingerprint)
    write_manifest(out / "rejected.csv", result.rejected, fingerprint=fingerprint)
    (out / "quality_report.csv").write_text(stamp_csv(quality_report_csv(result, target_class), fingerprint),
                                            encoding="utf-8")
    (out / "rmse_curves.csv").write_text(stamp_csv(rmse_curves_csv(result), fingerprint), encoding="utf-8")


# ---------------------------------------------------------------- features

def extract_features(records, kind: str, loader, jobs: int = 1) -> np.ndarray:
    """(n, coefficients, frames) float32 network inputs for ``records``, in order."""
    def one(r):
        return extract(loader(r), kind).values.T.astype(np.float32)

    return np.stack(_map(one, records, jobs))


def save_features(path, X, records, kind: str) -> None:
    np.savez(path, X=X, kind=kind,
             labels=np.array([r.label.index for r in records]),
             paths=np.array([r.path for r in records]),
             splits=np.array([r.split for r in records]),
             synthetic=np.array([r.synthetic for r in records]))


def load_features(path) -> dict:
    with np.load(path, allow_pickle=False) as d:
        return {k: d[k] for k in d.files}


# ---------------------------------------------------------------- evaluation

def evaluate(model, X, labels, feature_kind=None, fingerprint=None) -> EvalReport:
    probs = nn.predict(model, X)
    preds = probs.argmax(axis=1)
    return metrics(confusion(preds.tolist(), np.asarray(labels).tolist()), feature_kind, fingerprint)


def train_log_csv(report: nn.TrainReport, fingerprint=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_loss", "learning_rate", "train_accuracy"])
    for i, (tl, vl, lr, acc) in enumerate(zip(report.train_loss, report.val_loss,
                                               report.learning_rate, report.train_accuracy), start=1):
        w.writerow([i, f"{tl:.8f}", f"{vl:.8f}", f"{lr:.3e}", f"{acc:.6f}"])
    if fingerprint:
        w.writerow(["fingerprint", fingerprint, "", "", ""])
    return buf.getvalue()


def train_config(cfg: RunConfig) -> nn.TrainConfig:
    return nn.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, base_lr=cfg.base_lr,
                          min_lr=cfg.min_lr, plateau_patience=cfg.plateau_patience,
                          plateau_factor=cfg.plateau_factor, dropout_p=cfg.dropout_p, seed=cfg.seed,
                          validation_fraction=cfg.validation_fraction)


def model_hyper(cfg: RunConfig) -> nn.ModelHyper:
    return nn.ModelHyper(conv_channels=tuple(cfg.conv_channels), kernel=cfg.kernel,
                         dense=tuple(cfg.dense), dropout_p=cfg.dropout_p)


# ---------------------------------------------------------------- end to end

@dataclass
class PipelineResult:
    report: EvalReport
    train_report: nn.TrainReport
    records: list
    model: nn.Model
    fingerprint: str
    out_dir: Path


def _stage(name):
    def wrap(fn):
        def run(*a, **kw):
            log.info("stage %s", name)
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return run
    return wrap


def run_pipeline(cfg: RunConfig, progress=None) -> PipelineResult:
    """ingest -> quality gate -> augment -> split -> features -> train -> evaluate.

    Every artifact in ``cfg.out_dir`` carries the config fingerprint; reruns with
    the same config are byte-identical.
    """
    say = progress or (lambda msg: log.info(msg))
    try:
        cfg.validate()
    except InvalidArgument as exc:
        raise StageError("ingest", exc) from exc
    fp = cfg.fingerprint()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(f"# fingerprint {fp}\n" + cfg.to_ini(skip=("out_dir",)), encoding="utf-8")
    target = ClassLabel(cfg.quality_class)

    ing = _stage("ingest")(ingest)(cfg.manifest, out / "cache", cfg.jobs)
    say(f"ingest: {ing.summary()}")
    loader = ing.store.load
    records = ing.records

    @_stage("split")
    def speed_split(recs):
        return split_by_speed(recs, cfg.val_fraction, cfg.seed, cfg.allow_synthetic_test)

    if cfg.split_mode == "by_speed":
        records = speed_split(records)

    @_stage("quality")
    def gate(recs):
        if not cfg.quality_gate:
            say("quality: gate disabled, stage skipped")
            return recs
        res = filter_by_quality(recs, target, seed=cfg.seed, loader=loader)
        write_quality_outputs(res, target, out / "quality", fp)
        sizes = res.model.sizes().tolist()
        say(f"quality: {target.value} clusters {sizes}, kept {len(res.rows) - len(res.rejected)}, "
            f"rejected {len(res.rejected)}")
        return res.kept

    records = gate(records)

    @_stage("augment")
    def augment(recs):
        spec = StretchSpec(cfg.stretch_factors, cfg.keep_original)
        if not spec.factors:
            say("augment: no stretch factors, stage skipped")
            return recs
        grown, n = [], 0
        for r in recs:
            if r.label == target and r.split != "test":
                grown.extend(augment_set([r], spec, loader=loader))
                n += 1
            else:
                grown.append(r)
        say(f"augment: {n} {target.value} records -> {n * spec.multiplier}")
        return grown

    records = augment(records)

    @_stage("split")
    def split(recs):
        if cfg.split_mode == "shuffled":
            recs = shuffle_split(recs, cfg.train_fraction, cfg.seed, cfg.allow_synthetic_test)
        if cfg.balanced_per_class:
            recs = balanced_subsample(recs, cfg.balanced_per_class, seed=cfg.seed, split="train")
        write_manifest(out / "split_manifest.csv", recs, fingerprint=fp)
        return recs

    records = split(records)
    train_recs = [r for r in records if r.split in ("train", "unassigned")]
    val_recs = select_split(records, "val")
    test_recs = select_split(records, "test")
    say(f"split: train {len(train_recs)}, val {len(val_recs)}, test {len(test_recs)}")

    @_stage("features")
    def feats(recs):
        return extract_features(recs, cfg.feature, loader, cfg.jobs)

    X_train = feats(train_recs)
    X_val = feats(val_recs) if val_recs else None
    X_test = feats(test_recs) if test_recs else None
    label_idx = lambda rs: np.array([r.label.index for r in rs])  # noqa: E731

    @_stage("train")
    def fit():
        model = nn.build_model(X_train.shape[1], X_train.shape[2], model_hyper(cfg), seed=cfg.seed)
        tcfg = train_config(cfg)
        rep = nn.train(model, X_train, label_idx(train_recs), tcfg,
                       val_features=X_val, val_labels=label_idx(val_recs) if val_recs else None, log=say)
        nn.save_checkpoint(out / "checkpoint.json", model, tcfg, fingerprint=fp, feature=cfg.feature)
        (out / "train_log.csv").write_text(train_log_csv(rep, fp), encoding="utf-8")
        return model, rep

    model, train_rep = fit()

    @_stage("evaluate")
    def assess():
        if X_test is None:
            raise InvalidArgument("no test records after splitting")
        rep = evaluate(model, X_test, label_idx(test_recs), cfg.feature, fp)
        (out / "report.csv").write_text(rep.to_csv(), encoding="utf-8")
        (out / "report.txt").write_text(rep.to_text(), encoding="utf-8")
        (out / "confusion.csv").write_text(stamp_csv(rep.confusion.to_csv(), fp), encoding="utf-8")
        if cfg.baseline:
            cmp_ = render_comparison(rep, cfg.baseline)
            (out / "comparison.txt").write_text(cmp_.text + f"config fingerprint: {fp}\n", encoding="utf-8")
            (out / "comparison.csv").write_text(stamp_csv(cmp_.csv, fp), encoding="utf-8")
        return rep

    report = assess()
    say(f"evaluate: accuracy {100 * report.accuracy:.2f}%")
    return PipelineResult(report, train_rep, records, model, fp, out)


def write_augmented(records, out_manifest) -> list:
    """Write in-memory stretched clips to their paths as 16-bit WAV and save a manifest."""
    written = []
    for r in records:
        if r.synthetic and r.clip is not None:
            write_wav(r.path, r.clip)
            written.append(dataclasses.replace(r, clip=None))
        else:
            written.append(r)
    write_manifest(out_manifest, written)
    return written
