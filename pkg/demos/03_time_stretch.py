"""
Time stretching without changing pitch
======================================

The augmentation step plays a clip faster or slower with a phase vocoder;
``augment_set`` then pads or trims each copy back to 2 s. Pitch should not move. This checks it on a
220 Hz tone and shows how a record set grows.

    python demos/03_time_stretch.py
"""

import numpy as np

from vehicle_audio import ClassLabel, SampleRecord, StretchSpec, augment_set, time_stretch
from vehicle_audio.audio_io import MonoClip

RATE = 22050
tone = MonoClip(0.5 * np.sin(2 * np.pi * 220.0 * np.arange(2 * RATE) / RATE), RATE)


def peak_hz(clip):
    mag = np.abs(np.fft.rfft(clip.samples * np.hanning(len(clip))))
    return np.argmax(mag) * RATE / len(clip)


for factor in (1.5, 0.8, 1.2):
    out = time_stretch(tone, factor)
    print(f"factor {factor}: {len(tone)} -> {len(out)} samples, peak at {peak_hz(out):.1f} Hz")

# Three factors plus the original quadruple a set: 67 clean trucks become 268.
records = [SampleRecord(f"truck_{i}.wav", ClassLabel.TRUCK, clip=tone) for i in range(67)]
grown = augment_set(records, StretchSpec((1.5, 0.8, 1.2)))
print(f"{len(records)} records -> {len(grown)}; synthetic {sum(r.synthetic for r in grown)}")
print("example names:", [r.path for r in grown[:4]])
