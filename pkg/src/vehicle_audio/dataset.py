"""Sample records, manifest I/O and the split regimes.

Manifest CSV columns: ``path,label,speed_kmh,mic,road`` (header required).
Extended manifests may add ``synthetic`` and ``split`` columns for exact replay.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import MonoClip, load_clip, read_wav
from .errors import DecodeError, ManifestError, SplitError, SubsampleError, UnsupportedFormat


class ClassLabel(str, enum.Enum):
    CAR = "car"
    TRUCK = "truck"
    MOTORCYCLE = "motorcycle"
    NONE = "none"

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)

    def __str__(self):
        return self.value


CLASS_ORDER = (ClassLabel.CAR, ClassLabel.TRUCK, ClassLabel.MOTORCYCLE, ClassLabel.NONE)
SPEEDS = (30, 50, 70)
MICS = ("SE", "ME")
ROADS = ("dry", "wet")
SPLITS = ("train", "val", "test", "unassigned")

MANIFEST_COLUMNS = ("path", "label", "speed_kmh", "mic", "road")
EXTENDED_COLUMNS = MANIFEST_COLUMNS + ("synthetic", "split")

_LABEL_ALIASES = {"motorbike": "motorcycle", "bike": "motorcycle", "no_vehicle": "none",
                  "background": "none", "bg": "none"}


def parse_label(text: str) -> ClassLabel:
    key = text.strip().lower()
    key = _LABEL_ALIASES.get(key, key)
    if key == "bus":
        raise ValueError("unknown label 'bus' (bus class is out of scope)")
    try:
        return ClassLabel(key)
    except ValueError:
        raise ValueError(f"unknown label {text.strip()!r}") from None


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: ClassLabel
    speed_kmh: int | None = None
    mic: str | None = None
    road: str | None = None
    synthetic: bool = False
    split: str = "unassigned"
    # In-memory audio for generated or augmented records; loaded from ``path`` otherwise.
    clip: MonoClip | None = field(default=None, compare=False, repr=False)

    def with_split(self, split: str) -> "SampleRecord":
        return dataclasses.replace(self, split=split)

    def load(self) -> MonoClip:
        if self.clip is not None:
            return self.clip
        return load_clip(self.path)


def _optional(value, allowed, name, row):
    value = (value or "").strip()
    if value == "" or value.lower() == "unknown":
        return None
    for a in allowed:
        if value.lower() == str(a).lower():
            return a
    raise ValueError(f"row {row}: invalid {name} {value!r}")


def _parse_row(row_no, row, base: Path):
    path = (row.get("path") or "").strip()
    if not path:
        raise ValueError(f"row {row_no}: empty path")
    try:
        label = parse_label(row.get("label") or "")
    except ValueError as exc:
        raise ValueError(f"row {row_no}: {exc}") from None
    speed = (row.get("speed_kmh") or "").strip()
    if speed in ("", "unknown"):
        speed_kmh = None
    else:
        try:
            speed_kmh = int(speed)
        except ValueError:
            raise ValueError(f"row {row_no}: invalid speed_kmh {speed!r}") from None
        if speed_kmh not in SPEEDS:
            raise ValueError(f"row {row_no}: speed_kmh must be one of {SPEEDS}, got {speed_kmh}")
    mic = _optional(row.get("mic"), MICS, "mic", row_no)
    road = _optional(row.get("road"), ROADS, "road", row_no)
    synthetic = (row.get("synthetic") or "").strip().lower() in ("1", "true", "yes")
    split = (row.get("split") or "").strip() or "unassigned"
    if split not in SPLITS:
        raise ValueError(f"row {row_no}: invalid split {split!r}")
    resolved = Path(path)
    if not resolved.is_absolute():
        resolved = base / resolved
    return SampleRecord(str(resolved), label, speed_kmh, mic, road, synthetic, split)


def _check_decodable(record: SampleRecord):
    try:
        read_wav(record.path)
    except (OSError, DecodeError, UnsupportedFormat) as exc:
        return f"{record.path}: {exc}"
    return None


def load_manifest(path, validate_files: bool = True, jobs: int = 1) -> list[SampleRecord]:
    """Parse a manifest CSV. Relative paths resolve against the manifest's directory.

    All row problems are collected and raised together as one :class:`ManifestError`.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ManifestError(f"{path}: empty manifest, header required")
    missing = [c for c in ("path", "label") if c not in reader.fieldnames]
    if missing:
        raise ManifestError(f"{path}: header lacks columns {missing}")

    records, problems = [], []
    for row_no, row in enumerate(reader, start=2):
        if (row.get("path") or "").startswith("#"):
            continue
        try:
            records.append(_parse_row(row_no, row, path.parent))
        except ValueError as exc:
            problems.append(str(exc))
    if problems:
        raise ManifestError(f"{path}: {len(problems)} invalid row(s): {problems[0]}", problems)

    if validate_files and records:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            failures = [f for f in pool.map(_check_decodable, records) if f]
        if failures:
            raise ManifestError(f"{path}: {len(failures)} unreadable file(s): {failures[0]}", failures)
    return records


def format_manifest(records, extended: bool = True, base=None, fingerprint=None) -> str:
    cols = EXTENDED_COLUMNS if extended else MANIFEST_COLUMNS
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        p = r.path
        if base is not None:
            try:
                p = str(Path(p).relative_to(base))
            except ValueError:
                pass
        row = [p, r.label.value, r.speed_kmh if r.speed_kmh is not None else "",
               r.mic or "", r.road or ""]
        if extended:
            row += [int(r.synthetic), r.split]
        w.writerow(row)
    if fingerprint:
        # comment row, skipped by load_manifest
        w.writerow(["# fingerprint " + fingerprint] + [""] * (len(cols) - 1))
    return buf.getvalue()


def write_manifest(path, records, extended: bool = True, fingerprint=None) -> None:
    path = Path(path)
    text = format_manifest(records, extended, base=path.parent.resolve(), fingerprint=fingerprint)
    path.write_text(text, encoding="utf-8")


def by_class(records) -> dict[ClassLabel, list[int]]:
    groups = defaultdict(list)
    for i, r in enumerate(records):
        groups[r.label].append(i)
    return groups


def class_counts(records, split: str | None = None) -> dict[ClassLabel, int]:
    counts = {c: 0 for c in CLASS_ORDER}
    for r in records:
        if split is None or r.split == split:
            counts[r.label] += 1
    return counts


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _assign(records, splits, allow_synthetic_test):
    out = []
    for r, s in zip(records, splits):
        if s == "test" and r.synthetic and not allow_synthetic_test:
            raise SplitError(f"synthetic record {r.path} assigned to test split; "
                             "pass allow_synthetic_test=True to override", [r.path])
        out.append(r.with_split(s))
    return out


def split_by_speed(records, val_fraction: float = 0.1, seed: int = 0,
                   allow_synthetic_test: bool = False) -> list[SampleRecord]:
    """30/50 km/h go to the training pool, 70 km/h to test.

    The training pool is split into train/val per class, with
    ``round(val_fraction * n_class)`` validation records chosen by a seeded shuffle.
    Output order matches input order.
    """
    offenders = [r.path for r in records if r.speed_kmh not in SPEEDS]
    if offenders:
        raise SplitError(f"{len(offenders)} record(s) without a known speed", offenders)
    splits = ["test" if r.speed_kmh == 70 else "train" for r in records]
    rng = np.random.default_rng(seed)
    pool = [r if s == "train" else None for r, s in zip(records, splits)]
    groups = by_class([r for r in pool if r is not None])
    pool_idx = [i for i, r in enumerate(pool) if r is not None]
    for label in CLASS_ORDER:
        members = [pool_idx[j] for j in groups.get(label, [])]
        n_val = _round_half_up(val_fraction * len(members))
        for i in rng.permutation(members)[:n_val]:
            splits[int(i)] = "val"
    return _assign(records, splits, allow_synthetic_test)


def balanced_subsample(records, per_class: int, classes=(ClassLabel.CAR, ClassLabel.NONE),
                       seed: int = 0, split: str | None = None) -> list[SampleRecord]:
    """Keep ``per_class`` random records of each targeted class; everything else passes through.

    ``split`` restricts sampling to records of that split (others pass through untouched).
    Relative order of survivors is preserved.
    """
    rng = np.random.default_rng(seed)
    keep = np.ones(len(records), dtype=bool)
    for label in classes:
        label = ClassLabel(label)
        idx = [i for i, r in enumerate(records) if r.label == label and (split is None or r.split == split)]
        if per_class > len(idx):
            raise SubsampleError(f"per_class={per_class} exceeds the {len(idx)} available {label.value} records")
        drop = rng.permutation(idx)[per_class:]
        keep[drop.astype(int)] = False
    return [r for r, k in zip(records, keep) if k]


def shuffle_split(records, train_fraction: float = 0.7, seed: int = 0,
                  allow_synthetic_test: bool = False) -> list[SampleRecord]:
    """Seeded global shuffle, first ``round(train_fraction * n)`` become train, the rest test.

    Returns records in shuffled order.
    """
    if not 0 < train_fraction < 1:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if not records:
        raise SplitError("cannot split an empty record list")
    order = np.random.default_rng(seed).permutation(len(records))
    n_train = _round_half_up(train_fraction * len(records))
    shuffled = [records[int(i)] for i in order]
    splits = ["train"] * n_train + ["test"] * (len(records) - n_train)
    return _assign(shuffled, splits, allow_synthetic_test)


def select_split(records, split: str) -> list[SampleRecord]:
    return [r for r in records if r.split == split]
