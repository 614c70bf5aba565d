"""
Separating clean and faint truck recordings
===========================================

Builds a truck set where a third of the clips are recorded far from the road
(much quieter), then runs the RMSE / k-means quality gate. Each clip becomes
an 87-value frame-RMSE curve; two clusters are found and the one with the
higher mean energy is kept.

    python demos/02_quality_gate.py
"""

import numpy as np

from vehicle_audio import ClassLabel, SampleRecord, filter_by_quality, frame_rmse
from vehicle_audio.audio_io import MonoClip
from vehicle_audio.synthetic import synth_clip

rng = np.random.default_rng(1)
records = []
for i in range(60):
    clip = synth_clip(ClassLabel.TRUCK, rng)
    faint = i % 3 == 0
    # same peak level for every near clip, a twentieth of it for the far ones
    gain = 0.6 / np.max(np.abs(clip.samples)) * (0.05 if faint else 1.0)
    clip = MonoClip(gain * clip.samples, clip.sample_rate)
    records.append(SampleRecord(f"truck_{i:02d}{'_faint' if faint else ''}.wav", ClassLabel.TRUCK, clip=clip))
# the gate only touches the target class; other classes pass straight through
records += [SampleRecord(f"car_{i}.wav", ClassLabel.CAR, clip=synth_clip(ClassLabel.CAR, rng)) for i in range(5)]

kept, rejected, model = filter_by_quality(records, ClassLabel.TRUCK, seed=0)
print("cluster sizes", model.sizes().tolist())
print(f"kept {len(kept)} records ({sum(r.label == ClassLabel.TRUCK for r in kept)} trucks), "
      f"rejected {len(rejected)}")
print("all rejected clips are faint:", all(r.path.endswith("_faint.wav") for r in rejected))

# a look at the curves the clusters were formed on
loud, quiet = frame_rmse(records[1].clip).values, frame_rmse(records[0].clip).values
print(f"mean RMSE loud {loud.mean():.4f} vs faint {quiet.mean():.4f}")
