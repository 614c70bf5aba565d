"""Time-stretch augmentation with a phase vocoder.

A factor above 1 speeds the clip up (shorter), below 1 slows it down (longer);
pitch is preserved. Stretched copies are padded or trimmed back to 2 s.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import CLIP_SECONDS, MonoClip, fix_duration
from .dataset import SampleRecord
from .errors import InvalidArgument
from .features import StftGrid, istft, stft

VOCODER_N_FFT = 2048
VOCODER_HOP = 512
MAX_PEAK_GAIN = 1.1

# Factors used for the cleaned-data experiment, and the set listed with the method description.
CLEANED_FACTORS = (1.5, 0.8, 1.2)
METHOD_FACTORS = (1.5, 0.9, 1.2)


@dataclass(frozen=True)
class StretchSpec:
    factors: tuple = CLEANED_FACTORS
    keep_original: bool = True

    def __post_init__(self):
        factors = tuple(float(f) for f in self.factors)
        for f in factors:
            if not f > 0:
                raise InvalidArgument(f"stretch factors must be positive, got {f}")
            if f == 1.0:
                raise InvalidArgument("factor 1.0 duplicates the original; use keep_original")
        object.__setattr__(self, "factors", factors)

    @property
    def multiplier(self) -> int:
        return len(self.factors) + int(self.keep_original)


def phase_vocoder(grid: StftGrid, factor: float) -> StftGrid:
    """Resample STFT frames at ``factor`` steps, interpolating magnitude and accumulating phase."""
    D = grid.frames  # (frames, bins)
    n_frames, n_bins = D.shape
    steps = np.arange(0, n_frames, factor)
    # Expected phase advance per hop for each bin centre.
    advance = np.linspace(0, np.pi * grid.hop, n_bins)
    padded = np.concatenate([D, np.zeros((2, n_bins), dtype=D.dtype)])
    acc = np.angle(D[0])
    out = np.empty((len(steps), n_bins), dtype=np.complex128)
    for t, step in enumerate(steps):
        i = int(step)
        c0, c1 = padded[i], padded[i + 1]
        frac = step - i
        mag = (1.0 - frac) * np.abs(c0) + frac * np.abs(c1)
        out[t] = mag * np.exp(1j * acc)
        dphi = np.angle(c1) - np.angle(c0) - advance
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        acc = acc + advance + dphi
    return StftGrid(out, grid.n_fft, grid.win_length, grid.hop, grid.sample_rate)


def time_stretch(clip: MonoClip, factor: float, n_fft: int = VOCODER_N_FFT,
                 hop: int = VOCODER_HOP, max_gain: float | None = MAX_PEAK_GAIN) -> MonoClip:
    """Change duration by ``1 / factor`` without changing pitch.

    Output length is ``round(len(clip) / factor)``. Phase re-synthesis raises the
    crest factor of noise-like input (peaks up to ~2x); when the output peak
    exceeds ``max_gain`` times the input peak the whole clip is scaled down to
    that bound. Pass ``max_gain=None`` to disable.
    """
    if not factor > 0:
        raise InvalidArgument(f"stretch factor must be positive, got {factor}")
    grid = stft(clip, n_fft=n_fft, win_length=n_fft, hop=hop)
    length = int(round(len(clip) / factor))
    y = istft(phase_vocoder(grid, factor), length)
    if max_gain is not None:
        limit = max_gain * float(np.max(np.abs(clip.samples)))
        peak = float(np.max(np.abs(y))) if y.size else 0.0
        if peak > limit:
            y = y * (limit / peak)
    return MonoClip(y, clip.sample_rate)


def stretched_path(path: str, factor: float) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}_ts{int(round(factor * 100)):03d}{p.suffix or '.wav'}"))


def augment_set(records, spec: StretchSpec, loader=None,
                seconds: float = CLIP_SECONDS) -> list[SampleRecord]:
    """Originals (when ``spec.keep_original``) followed by one stretched copy per factor, per record.

    Stretched copies carry the audio in memory, a ``_tsNNN`` path suffix and ``synthetic=True``.
    They inherit the original's split, except that copies of test records become unassigned.
    """
    loader = loader or SampleRecord.load
    out = []
    for r in records:
        if spec.keep_original:
            out.append(r)
        if not spec.factors:
            continue
        clip = loader(r)
        for f in spec.factors:
            stretched = fix_duration(time_stretch(clip, f), seconds)
            out.append(dataclasses.replace(r, path=stretched_path(r.path, f), synthetic=True,
                                           split="unassigned" if r.split == "test" else r.split,
                                           clip=stretched))
    return out
