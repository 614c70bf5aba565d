"""
Three views of a passing vehicle
================================

Synthesizes one clip per class and computes the three network inputs:
a dB mel spectrogram, MFCCs and GFCCs. Each matrix is written as a PGM
image (frames across, coefficients up) so it can be opened in any viewer.

    python demos/01_feature_tour.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from vehicle_audio import CLASS_ORDER, extract
from vehicle_audio.synthetic import synth_clip

out = Path(sys.argv[1] if len(sys.argv) > 1 else "feature_tour")
out.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(0)

# every clip is 2 s at 22 050 Hz, i.e. 44 100 samples and 87 STFT frames
for label in CLASS_ORDER:
    clip = synth_clip(label, rng)
    print(f"{label.value:<11} {len(clip)} samples, peak {np.max(np.abs(clip.samples)):.2f}")
    for kind in ("mel", "mfcc", "gfcc"):
        fm = extract(clip, kind)
        fm.to_pgm(out / f"{label.value}_{kind}.pgm")
        print(f"  {kind:<5} {fm.shape}  range [{fm.values.min():8.1f}, {fm.values.max():8.1f}]")

# The mel rows are dB relative to the loudest cell, so the top is 0 and the
# floor sits 80 dB below. Harmonic classes show horizontal stripes at
# multiples of their fundamental; the no-vehicle class is a smooth band.
print(f"images in {out}/")
