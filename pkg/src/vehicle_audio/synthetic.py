"""A generated stand-in corpus with the same shape as the real recordings.

Three "vehicle" classes are harmonic stacks on distinct fundamentals with a
slow pass-by envelope and a little broadband noise; the no-vehicle class is
band-limited noise. Clips are 2 s, 16-bit mono at 22 050 Hz.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .audio_io import CLIP_SECONDS, WORKING_RATE, MonoClip, write_wav
from .dataset import CLASS_ORDER, MICS, ROADS, SPEEDS, ClassLabel, SampleRecord, write_manifest

FUNDAMENTALS = {ClassLabel.CAR: 110.0, ClassLabel.TRUCK: 55.0, ClassLabel.MOTORCYCLE: 220.0}
N_HARMONICS = 12


def harmonic_stack(f0, n, rate, rng, n_harmonics=N_HARMONICS, jitter=0.03):
    t = np.arange(n) / rate
    f = f0 * (1 + rng.uniform(-jitter, jitter))
    y = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        if h * f >= rate / 2:
            break
        y += rng.uniform(0.3, 1.0) / h * np.sin(2 * np.pi * h * f * t + rng.uniform(0, 2 * np.pi))
    centre = rng.uniform(0.3, 0.7) * t[-1]
    width = rng.uniform(0.4, 1.0)
    return y * np.exp(-0.5 * ((t - centre) / width) ** 2)


def band_noise(n, rate, rng, lo=300.0, hi=3000.0):
    sos = signal.butter(4, [lo, hi], btype="bandpass", fs=rate, output="sos")
    return signal.sosfilt(sos, rng.standard_normal(n))


def synth_clip(label: ClassLabel, rng, rate=WORKING_RATE, seconds=CLIP_SECONDS, snr_db=20.0) -> MonoClip:
    n = int(round(rate * seconds))
    if label == ClassLabel.NONE:
        y = band_noise(n, rate, rng, lo=rng.uniform(200, 500), hi=rng.uniform(2000, 4000))
    else:
        y = harmonic_stack(FUNDAMENTALS[label], n, rate, rng)
        noise = rng.standard_normal(n)
        y += noise * np.sqrt(np.mean(y ** 2) / np.mean(noise ** 2)) * 10 ** (-snr_db / 20)
    y *= rng.uniform(0.2, 0.8) / np.max(np.abs(y))
    return MonoClip(y, rate)


def make_corpus(root, per_class=200, seed=0, classes=CLASS_ORDER) -> list[SampleRecord]:
    """Write ``per_class`` clips for each class under ``root`` plus ``root/manifest.csv``.

    Speed, microphone and road metadata cycle so every class is present at every speed.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for label in classes:
        (root / label.value).mkdir(exist_ok=True)
        for i in range(per_class):
            path = root / label.value / f"{label.value}_{i:04d}.wav"
            write_wav(path, synth_clip(label, rng))
            records.append(SampleRecord(str(path.relative_to(root)), label, SPEEDS[i % 3],
                                        MICS[i % 2], ROADS[(i // 2) % 2]))
    write_manifest(root / "manifest.csv", records, extended=False)
    return records
