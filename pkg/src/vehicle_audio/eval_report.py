"""Confusion matrices, per-class metrics and comparison tables against published results."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import CLASS_ORDER, ClassLabel
from .errors import InvalidArgument

CLASS_NAMES = tuple(c.value for c in CLASS_ORDER)
DISPLAY_NAMES = {"car": "Car", "truck": "Truck", "motorcycle": "Motorcycle", "none": "No Vehicle"}


def _label_index(x) -> int:
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < len(CLASS_ORDER):
            raise InvalidArgument(f"class index {x} out of range")
        return int(x)
    return ClassLabel(x).index


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, in the order car, truck, motorcycle, none."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (4, 4) or np.any(c < 0):
            raise InvalidArgument(f"confusion counts must be a non-negative 4x4 array, got {c.shape}")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def row_percentages(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *CLASS_NAMES])
        for name, row in zip(CLASS_NAMES, self.counts):
            w.writerow([name, *map(int, row)])
        return buf.getvalue()

    def render(self, percent: bool = False) -> str:
        """Fixed-width table; ``percent`` shows row-normalised percentages rounded to integers."""
        values = np.round(self.row_percentages()).astype(int) if percent else self.counts
        width = max(len(n) for n in DISPLAY_NAMES.values()) + 2
        head = " " * width + "".join(f"{DISPLAY_NAMES[n]:>{width}}" for n in CLASS_NAMES)
        lines = [head]
        for name, row in zip(CLASS_NAMES, values):
            lines.append(f"{DISPLAY_NAMES[name]:<{width}}" + "".join(f"{int(v):>{width}}" for v in row))
        return "\n".join(lines) + "\n"


def confusion(predictions, truths) -> ConfusionMatrix:
    predictions, truths = list(predictions), list(truths)
    if len(predictions) != len(truths):
        raise InvalidArgument(f"{len(predictions)} predictions for {len(truths)} truths")
    if not truths:
        raise InvalidArgument("cannot build a confusion matrix from zero samples")
    counts = np.zeros((4, 4), dtype=np.int64)
    for p, t in zip(predictions, truths):
        counts[_label_index(t), _label_index(p)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def _ratio(num, den):
    return float(num) / float(den) if den > 0 else 0.0


def f1_score(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    per_class: dict
    accuracy: float
    feature_kind: str | None = None
    fingerprint: str | None = None
    extra: dict = field(default_factory=dict)

    def micro_precision(self) -> float:
        c = self.confusion.counts
        return _ratio(np.trace(c), c.sum(axis=0).sum())

    def micro_recall(self) -> float:
        c = self.confusion.counts
        return _ratio(np.trace(c), c.sum(axis=1).sum())

    def f1(self) -> dict:
        return {name: m.f1 for name, m in self.per_class.items()}

    def to_csv(self) -> str:
        """``class,precision,recall,f1,support`` rows plus ``accuracy`` (and fingerprint) footer rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for name in CLASS_NAMES:
            m = self.per_class[name]
            w.writerow([name, f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}", m.support])
        w.writerow(["accuracy", f"{self.accuracy:.6f}", "", "", self.confusion.total])
        if self.fingerprint:
            w.writerow(["fingerprint", self.fingerprint, "", "", ""])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = []
        if self.feature_kind:
            lines.append(f"feature: {self.feature_kind}")
        lines.append(f"{'Class':<12}{'Precision':>10}{'Recall':>10}{'F1-Score':>10}{'Support':>9}")
        for name in CLASS_NAMES:
            m = self.per_class[name]
            lines.append(f"{DISPLAY_NAMES[name]:<12}{m.precision:>10.2f}{m.recall:>10.2f}{m.f1:>10.2f}{m.support:>9d}")
        lines.append(f"Accuracy: {100.0 * self.accuracy:.2f}% ({self.confusion.total} samples)")
        lines.append("")
        lines.append(self.confusion.render())
        if self.fingerprint:
            lines.append(f"config fingerprint: {self.fingerprint}")
        return "\n".join(lines) + "\n"


def metrics(cm: ConfusionMatrix, feature_kind=None, fingerprint=None) -> EvalReport:
    """Per-class precision, recall and F1; any zero denominator yields 0."""
    c = cm.counts
    if c.sum() == 0:
        raise InvalidArgument("confusion matrix is empty")
    per_class = {}
    for i, name in enumerate(CLASS_NAMES):
        tp = c[i, i]
        p = _ratio(tp, c[:, i].sum())
        r = _ratio(tp, c[i, :].sum())
        per_class[name] = ClassMetrics(p, r, f1_score(p, r), int(c[i, :].sum()))
    return EvalReport(cm, per_class, _ratio(np.trace(c), c.sum()), feature_kind, fingerprint)


# ---------------------------------------------------------------- published fixtures

@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    f1: dict
    precision: dict | None = None
    recall: dict | None = None
    accuracy: float | None = None
    note: str = ""


def _prf(car, moto, none, truck):
    rows = {"car": car, "motorcycle": moto, "none": none, "truck": truck}
    return ({k: v[0] for k, v in rows.items()}, {k: v[1] for k, v in rows.items()},
            {k: v[2] for k, v in rows.items()})


def _f1(car, truck, moto, none):
    return {"car": car, "truck": truck, "motorcycle": moto, "none": none}


def _fixture_prf(name, description, accuracy, **rows):
    p, r, f = _prf(rows["car"], rows["moto"], rows["none"], rows["truck"])
    return Fixture(name, description, f, p, r, accuracy)


FIXTURES_VERSION = 1

FIXTURES = {f.name: f for f in [
    Fixture("table1_baseline", "IDMT-Traffic VGG baseline (claimed)", _f1(0.94, 0.5, 0.96, 1.00),
            note="truck F1 0.5 could not be reproduced; replication reached 0.35 (table1_replication)"),
    Fixture("table1_replication", "Replication of the VGG baseline, 16 mel bands", _f1(0.94, 0.35, 0.95, 1.00)),
    _fixture_prf("table3_mfcc", "1-D CNN, speed split, MFCC", 0.9341,
                 car=(0.87, 0.96, 0.91), moto=(0.97, 0.89, 0.92), none=(0.99, 0.98, 0.98), truck=(0.65, 0.21, 0.31)),
    _fixture_prf("table3_gfcc", "1-D CNN, speed split, GFCC", 0.9378,
                 car=(0.88, 0.96, 0.92), moto=(0.96, 0.91, 0.93), none=(0.99, 0.99, 0.99), truck=(0.65, 0.23, 0.33)),
    _fixture_prf("table3_mel", "1-D CNN, speed split, mel-spectrogram", 0.9424,
                 car=(0.88, 0.98, 0.93), moto=(0.98, 0.90, 0.94), none=(1.00, 0.99, 1.00), truck=(0.69, 0.22, 0.35)),
    _fixture_prf("table4_balanced", "Balanced subsampling + time-stretch doubling", None,
                 car=(0.96, 0.64, 0.77), moto=(0.89, 0.84, 0.86), none=(0.99, 0.99, 0.99), truck=(0.27, 0.84, 0.41)),
    _fixture_prf("table6_mfcc", "Quality-gated trucks, 70:30 shuffle split, MFCC", 0.9895,
                 car=(0.99, 0.99, 0.99), moto=(1.00, 0.97, 0.99), none=(0.99, 1.00, 1.00), truck=(0.95, 0.89, 0.92)),
    _fixture_prf("table6_gfcc", "Quality-gated trucks, 70:30 shuffle split, GFCC", 0.9894,
                 car=(0.98, 1.00, 0.99), moto=(0.97, 0.99, 0.98), none=(1.00, 0.99, 0.99), truck=(0.97, 0.84, 0.90)),
    _fixture_prf("table6_mel", "Quality-gated trucks, 70:30 shuffle split, mel-spectrogram", 0.9808,
                 car=(0.98, 0.99, 0.98), moto=(0.89, 0.96, 0.93), none=(1.00, 0.99, 0.99), truck=(0.86, 0.83, 0.84)),
    Fixture("table7_ours", "1-D CNN with quality gate, MFCC", _f1(0.99, 0.92, 0.99, 1.00)),
]}

# Human listening study, row percentages (true class rows, predicted class columns).
HUMAN_STUDY_PERCENT = np.array([
    [95, 3, 1, 1],
    [61, 38, 1, 0],
    [3, 1, 95, 1],
    [1, 0, 1, 98],
])


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise InvalidArgument(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}") from None


def fixture_report(name: str) -> EvalReport:
    """An EvalReport carrying a fixture's published numbers (no confusion counts)."""
    fx = get_fixture(name)
    per_class = {n: ClassMetrics(fx.precision[n] if fx.precision else 0.0,
                                 fx.recall[n] if fx.recall else 0.0, fx.f1[n], 0) for n in CLASS_NAMES}
    return EvalReport(ConfusionMatrix(np.zeros((4, 4))), per_class, fx.accuracy or 0.0)


def _fmt_delta(d: float, places: int = 2) -> str:
    s = f"{d:+.{places}f}"
    return s[1:] if float(s) == 0 else s


@dataclass(frozen=True)
class Comparison:
    text: str
    csv: str
    deltas: dict


def render_comparison(report: EvalReport, baseline: str, label: str = "This run") -> Comparison:
    """Side-by-side per-class F1 against a published fixture, with deltas (this run minus baseline)."""
    fx = get_fixture(baseline)
    ours = report.f1()
    deltas = {n: round(ours[n], 2) - fx.f1[n] for n in CLASS_NAMES}
    width = 12
    lines = [f"Comparison with {fx.name}: {fx.description}",
             f"{'Model':<{width}}" + "".join(f"{DISPLAY_NAMES[n]:>{width}}" for n in CLASS_NAMES),
             f"{'Published':<{width}}" + "".join(f"{fx.f1[n]:>{width}.2f}" for n in CLASS_NAMES),
             f"{label:<{width}}" + "".join(f"{ours[n]:>{width}.2f}" for n in CLASS_NAMES),
             f"{'Delta':<{width}}" + "".join(f"{_fmt_delta(deltas[n]):>{width}}" for n in CLASS_NAMES)]
    if fx.accuracy is not None:
        lines.append(f"Accuracy: published {100 * fx.accuracy:.2f}%, this run {100 * report.accuracy:.2f}%")
    if fx.note:
        lines.append(f"Note: {fx.note}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "published_f1", "f1", "delta"])
    for n in CLASS_NAMES:
        w.writerow([n, f"{fx.f1[n]:.2f}", f"{ours[n]:.6f}", _fmt_delta(deltas[n])])
    if fx.accuracy is not None:
        w.writerow(["accuracy", f"{fx.accuracy:.4f}", f"{report.accuracy:.6f}",
                    _fmt_delta(report.accuracy - fx.accuracy, 4)])
    if report.fingerprint:
        w.writerow(["fingerprint", "", report.fingerprint, ""])
    return Comparison("\n".join(lines) + "\n", buf.getvalue(), deltas)
