"""Run configuration: a flat, typed key-value file (INI ``[run]`` section) plus overrides."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InvalidArgument
from .features import FEATURE_KINDS

SECTION = "run"


@dataclass(frozen=True)
class RunConfig:
    manifest: str = ""
    out_dir: str = "run"
    feature: str = "mfcc"
    seed: int = 0
    jobs: int = 1
    # quality gate
    quality_gate: bool = True
    quality_class: str = "truck"
    # augmentation of kept target-class records
    stretch_factors: tuple = (1.5, 0.8, 1.2)
    keep_original: bool = True
    # split
    split_mode: str = "shuffled"
    train_fraction: float = 0.7
    val_fraction: float = 0.1
    balanced_per_class: int = 0
    # The cleaned-data protocol shuffles stretched copies together with originals.
    allow_synthetic_test: bool = True
    # network / training
    epochs: int = 30
    batch_size: int = 32
    base_lr: float = 1e-3
    min_lr: float = 1e-5
    plateau_patience: int = 2
    plateau_factor: float = 0.1
    dropout_p: float = 0.3
    validation_fraction: float = 0.1
    conv_channels: tuple = (32, 64, 64, 128)
    kernel: int = 3
    dense: tuple = (256, 128, 4)
    baseline: str = "table6_mfcc"

    def validate(self, check_paths: bool = True) -> "RunConfig":
        if self.feature not in FEATURE_KINDS:
            raise InvalidArgument(f"feature must be one of {FEATURE_KINDS}, got {self.feature!r}")
        if self.split_mode not in ("shuffled", "by_speed"):
            raise InvalidArgument(f"split_mode must be 'shuffled' or 'by_speed', got {self.split_mode!r}")
        if not 0 < self.train_fraction < 1:
            raise InvalidArgument("train_fraction must be in (0, 1)")
        if self.jobs < 1:
            raise InvalidArgument("jobs must be >= 1")
        if check_paths:
            if not self.manifest:
                raise InvalidArgument("no manifest configured")
            if not Path(self.manifest).is_file():
                raise InvalidArgument(f"manifest {self.manifest} does not exist")
        return self

    def fingerprint(self) -> str:
        """Hash of every setting that can change results (not out_dir or jobs)."""
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("jobs")
        blob = json.dumps(d, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_ini(self, skip=()) -> str:
        lines = [f"[{SECTION}]"]
        for f in fields(self):
            if f.name in skip:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(name, raw, current):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(current, bool):
            if isinstance(raw, bool):
                return raw
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, tuple):
            if isinstance(raw, (list, tuple)):
                items = list(raw)
            else:
                items = [x for x in raw.replace(";", ",").split(",") if x.strip()]
            typ = type(current[0]) if current else float
            return tuple(typ(x) for x in items)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return str(raw)
    except (ValueError, TypeError):
        raise InvalidArgument(f"config key {name!r}: cannot parse {raw!r}") from None


def with_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    known = {f.name: f for f in fields(RunConfig)}
    changes = {}
    for k, v in overrides.items():
        if v is None:
            continue
        if k not in known:
            raise InvalidArgument(f"unknown config key {k!r}")
        changes[k] = _coerce(k, v, getattr(config, k))
    return dataclasses.replace(config, **changes)


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then the ``[run]`` section of ``path``, then keyword overrides.

    A relative ``manifest`` in the file resolves against the file's directory.
    """
    config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InvalidArgument(f"config file {path} does not exist")
        parser = configparser.ConfigParser()
        try:
            parser.read_string(path.read_text(encoding="utf-8"))
        except configparser.Error as exc:
            raise InvalidArgument(f"{path}: {exc}") from None
        if not parser.has_section(SECTION):
            raise InvalidArgument(f"{path}: missing [{SECTION}] section")
        values = dict(parser.items(SECTION))
        for key in ("manifest", "out_dir"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
        config = with_overrides(config, values)
    return with_overrides(config, overrides)
