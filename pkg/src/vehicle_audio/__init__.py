"""Acoustic vehicle sub-type classification.

Decode and normalize clips, compute mel / MFCC / GFCC features, gate a noisy
class with an RMSE k-means filter, grow it with time-stretched copies, train a
small 1-D CNN written in numpy, and score it against published tables.
"""

from .audio_io import MonoClip, RawClip, decode_wav, encode_wav, fix_duration, load_clip, read_wav, resample, write_wav
from .augment import StretchSpec, augment_set, phase_vocoder, time_stretch
from .config import RunConfig, load_config
from .dataset import (CLASS_ORDER, ClassLabel, SampleRecord, balanced_subsample, load_manifest, shuffle_split,
                      split_by_speed, write_manifest)
from .errors import (DecodeError, InvalidArgument, ManifestError, SplitError, SubsampleError, TrainingError,
                     UnsupportedFormat, VehicleAudioError)
from .eval_report import ConfusionMatrix, EvalReport, confusion, fixture_report, get_fixture, metrics, render_comparison
from .features import (FeatureMatrix, FilterBank, GammatoneParams, StftGrid, extract, gammatone_filterbank, gfcc,
                       mel_filterbank, mel_spectrogram, mfcc, stft)
from .nn import Model, TrainConfig, build_model, load_checkpoint, predict, save_checkpoint, train
from .pipeline import run_pipeline
from .quality import ClusterModel, QualityLabel, filter_by_quality, frame_rmse, kmeans, label_clusters

__version__ = "0.1.0"
