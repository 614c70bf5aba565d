"""Spectral features: STFT, mel-spectrogram, MFCC and GFCC.

Defaults follow the classifier's front end: 22 050 Hz audio, FFT size 2048,
window 1024, hop 512, 128 mel bands / MFCCs, 128 gammatone filters and 64
GFCCs. A two second clip yields 87 frames.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from .audio_io import MonoClip
from .errors import InvalidArgument

N_FFT = 2048
WIN_LENGTH = 1024
HOP = 512
N_MELS = 128
N_MFCC = 128
N_GAMMATONE = 128
N_GFCC = 64
TOP_DB = 80.0
AMIN = 1e-10
GFCC_EPS = 1e-10
GAMMATONE_ORDER = 4
GAMMATONE_BW_SCALE = 1.019
GAMMATONE_IR_SECONDS = 0.05

FEATURE_KINDS = ("mel", "mfcc", "gfcc")


def _samples(clip):
    if isinstance(clip, MonoClip):
        return clip.samples
    return np.asarray(clip, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class StftGrid:
    frames: np.ndarray  # (n_frames, n_fft // 2 + 1) complex
    n_fft: int
    win_length: int
    hop: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.frames) ** 2


@dataclass(frozen=True, eq=False)
class FilterBank:
    weights: np.ndarray  # (n_filters, n_bins)
    kind: str
    center_freqs: np.ndarray
    sample_rate: int
    n_fft: int

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class GammatoneParams:
    a: float = 1.0
    n: int = GAMMATONE_ORDER
    b: float = 100.0
    f_c: float = 1000.0
    phi: float = 0.0

    def __post_init__(self):
        if self.b <= 0 or self.f_c <= 0 or self.n < 1:
            raise InvalidArgument(f"invalid gammatone parameters {self}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Frames x coefficients. Feed to the network transposed (coefficients as channels)."""

    values: np.ndarray
    kind: str
    frame_hop: int = HOP
    sample_rate: int = 22050

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise InvalidArgument(f"unknown feature kind {self.kind!r}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path=None) -> str:
        """One frame per row, coefficient columns ``c0..cN``."""
        header = ",".join(f"c{i}" for i in range(self.values.shape[1]))
        rows = [",".join(repr(float(x)) for x in row) for row in self.values]
        text = "\n".join([header, *rows]) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_pgm(self, path=None) -> bytes:
        """8-bit binary PGM, width = frames, height = coefficients (coefficient 0 at the bottom)."""
        return write_pgm(self.values.T[::-1], path)


def write_pgm(image: np.ndarray, path=None) -> bytes:
    """Min-max scale a 2-D array to 0..255 and encode it as a P5 PGM (rows top to bottom)."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(image)
    h, w = image.shape
    data = f"P5\n{w} {h}\n255\n".encode("ascii") + scaled.astype(np.uint8).tobytes()
    if path is not None:
        Path(path).write_bytes(data)
    return data


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    if n < 1:
        raise InvalidArgument(f"window length must be >= 1, got {n}")
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _padded_window(win_length, n_fft):
    w = np.zeros(n_fft)
    start = (n_fft - win_length) // 2
    w[start:start + win_length] = hann_window(win_length)
    return w


def stft(clip, n_fft: int = N_FFT, win_length: int = WIN_LENGTH, hop: int = HOP,
         sample_rate: int | None = None) -> StftGrid:
    """Centered short-time Fourier transform.

    The signal is reflect-padded by ``n_fft // 2`` on both ends, so frame ``t``
    is centered on sample ``t * hop`` and there are ``1 + len // hop`` frames.
    The Hann window of ``win_length`` sits in the middle of each ``n_fft`` frame.
    """
    if hop <= 0:
        raise InvalidArgument(f"hop must be positive, got {hop}")
    if win_length > n_fft or win_length < 1:
        raise InvalidArgument(f"win_length {win_length} must be in [1, n_fft={n_fft}]")
    x = _samples(clip)
    if x.size == 0:
        raise InvalidArgument("cannot transform an empty clip")
    if sample_rate is None:
        sample_rate = clip.sample_rate if isinstance(clip, MonoClip) else 22050

    pad = n_fft // 2
    padded = np.pad(x, pad, mode="reflect")
    n_frames = 1 + len(x) // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    spec = np.fft.rfft(frames * _padded_window(win_length, n_fft), axis=1)
    return StftGrid(spec, n_fft, win_length, hop, sample_rate)


def istft(grid: StftGrid, length: int | None = None) -> np.ndarray:
    """Inverse of :func:`stft` by windowed overlap-add with squared-window normalisation."""
    n_fft, hop = grid.n_fft, grid.hop
    window = _padded_window(grid.win_length, n_fft)
    frames = np.fft.irfft(grid.frames, n=n_fft, axis=1) * window
    n_frames = frames.shape[0]
    total = n_fft + hop * (n_frames - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    w2 = window ** 2
    for t in range(n_frames):
        y[t * hop:t * hop + n_fft] += frames[t]
        wsum[t * hop:t * hop + n_fft] += w2
    nz = wsum > 1e-10
    y[nz] /= wsum[nz]
    y = y[n_fft // 2:]
    if length is None:
        return y[:len(y) - n_fft // 2]
    if len(y) >= length:
        return y[:length]
    return np.concatenate([y, np.zeros(length - len(y))])


def magnitude_spectrum(clip) -> np.ndarray:
    """One-sided |DFT| of the whole clip; bin ``k`` sits at ``k * sample_rate / N`` Hz."""
    x = _samples(clip)
    if x.size == 0:
        raise InvalidArgument("cannot transform an empty clip")
    return np.abs(np.fft.rfft(x))


def spectrum_frequencies(n_samples: int, sample_rate: int) -> np.ndarray:
    return np.fft.rfftfreq(n_samples, 1.0 / sample_rate)


# Slaney mel scale: linear below 1 kHz, logarithmic above.
_F_SP = 200.0 / 3
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = _MIN_LOG_HZ / _F_SP
_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    lin = f / _F_SP
    log = _MIN_LOG_MEL + np.log(np.maximum(f, _MIN_LOG_HZ) / _MIN_LOG_HZ) / _LOGSTEP
    return np.where(f >= _MIN_LOG_HZ, log, lin)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    lin = _F_SP * m
    log = _MIN_LOG_HZ * np.exp(_LOGSTEP * (np.maximum(m, _MIN_LOG_MEL) - _MIN_LOG_MEL))
    return np.where(m >= _MIN_LOG_MEL, log, lin)


def _check_band(sample_rate, n_filters, f_min, f_max):
    if f_max is None:
        f_max = sample_rate / 2.0
    if n_filters < 1:
        raise InvalidArgument(f"need at least one filter, got {n_filters}")
    if not (0 <= f_min < f_max <= sample_rate / 2.0):
        raise InvalidArgument(f"need 0 <= f_min < f_max <= {sample_rate / 2}, got {f_min}, {f_max}")
    return float(f_max)


def mel_filterbank(sample_rate: int = 22050, n_fft: int = N_FFT, n_mels: int = N_MELS,
                   f_min: float = 0.0, f_max: float | None = None) -> FilterBank:
    """Area-normalised triangular filters with centers evenly spaced in mel."""
    f_max = _check_band(sample_rate, n_mels, f_min, f_max)
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))

    fdiff = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]

    empty = np.flatnonzero(weights.max(axis=1) == 0)
    if empty.size:
        warnings.warn(f"{empty.size} mel filters are empty; n_mels={n_mels} is too high for n_fft={n_fft}",
                      stacklevel=2)
    return FilterBank(weights, "mel", edges[1:-1], sample_rate, n_fft)


def power_to_db(power: np.ndarray, top_db: float = TOP_DB) -> np.ndarray:
    """10*log10(power / max), floored at ``max - top_db``. Zero power maps through AMIN."""
    power = np.asarray(power, dtype=np.float64)
    ref = max(float(power.max()), AMIN)
    db = 10.0 * np.log10(np.maximum(power, AMIN)) - 10.0 * np.log10(ref)
    return np.maximum(db, db.max() - top_db)


def _power(clip, n_fft, win_length, hop):
    return stft(clip, n_fft, win_length, hop).power


def mel_spectrogram(clip: MonoClip, n_mels: int = N_MELS, n_fft: int = N_FFT,
                    win_length: int = WIN_LENGTH, hop: int = HOP,
                    filterbank: FilterBank | None = None) -> FeatureMatrix:
    """dB-scaled mel power spectrogram, shape (n_frames, n_mels)."""
    fb = filterbank or _cached_mel(clip.sample_rate, n_fft, n_mels)
    mel = _power(clip, n_fft, win_length, hop) @ fb.weights.T
    return FeatureMatrix(power_to_db(mel), "mel", hop, clip.sample_rate)


def dct_ii(v, n_out: int | None = None, axis: int = -1) -> np.ndarray:
    """Orthonormal DCT-II along ``axis``, truncated to the first ``n_out`` coefficients."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[axis]
    if n_out is None:
        n_out = n
    if not 0 < n_out <= n:
        raise InvalidArgument(f"n_out must be in [1, {n}], got {n_out}")
    y = scipy.fft.dct(v, type=2, norm="ortho", axis=axis)
    return np.take(y, np.arange(n_out), axis=axis)


def idct_ii(y, axis: int = -1) -> np.ndarray:
    return scipy.fft.idct(np.asarray(y, dtype=np.float64), type=2, norm="ortho", axis=axis)


def mfcc(clip: MonoClip, n_mfcc: int = N_MFCC, n_mels: int = N_MELS, **stft_kwargs) -> FeatureMatrix:
    if n_mfcc > n_mels:
        raise InvalidArgument(f"n_mfcc={n_mfcc} exceeds n_mels={n_mels}")
    mel_db = mel_spectrogram(clip, n_mels=n_mels, **stft_kwargs)
    return FeatureMatrix(dct_ii(mel_db.values, n_mfcc, axis=1), "mfcc", mel_db.frame_hop, clip.sample_rate)


def erb_bandwidth(f_c):
    """Glasberg & Moore equivalent rectangular bandwidth in Hz."""
    return 24.7 * (1.0 + 4.37 * np.asarray(f_c, dtype=np.float64) / 1000.0)


def hz_to_erb_rate(f):
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(f, dtype=np.float64))


def erb_rate_to_hz(e):
    return (10.0 ** (np.asarray(e, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def gammatone_ir(p: GammatoneParams, t, analytic: bool = False):
    """Gammatone impulse response a * t^(n-1) * exp(-2 pi b t) * cos(2 pi f_c t + phi).

    With ``analytic=True`` the cosine is replaced by exp(i(2 pi f_c t + phi)),
    whose real part is the response above.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidArgument("gammatone_ir is defined for t >= 0")
    env = p.a * t ** (p.n - 1) * np.exp(-2.0 * np.pi * p.b * t)
    arg = 2.0 * np.pi * p.f_c * t + p.phi
    if analytic:
        return env * np.exp(1j * arg)
    return env * np.cos(arg)


def gammatone_filterbank(sample_rate: int = 22050, n_fft: int = N_FFT, n_filters: int = N_GAMMATONE,
                         f_min: float = 20.0, f_max: float | None = None,
                         order: int = GAMMATONE_ORDER) -> FilterBank:
    """Magnitude responses of 50 ms sampled gammatone impulse responses, ERB-rate spaced.

    The analytic impulse response is transformed so the response near Nyquist
    is not folded back by its negative-frequency image (filters there are >1 kHz wide).
    Each row is peak-normalised to 1.
    """
    f_max = _check_band(sample_rate, n_filters, f_min, f_max)
    if f_min <= 0:
        raise InvalidArgument("gammatone f_min must be > 0")
    centers = erb_rate_to_hz(np.linspace(hz_to_erb_rate(f_min), hz_to_erb_rate(f_max), n_filters))
    t = np.arange(int(round(GAMMATONE_IR_SECONDS * sample_rate))) / sample_rate
    n_bins = n_fft // 2 + 1
    weights = np.empty((n_filters, n_bins))
    for i, fc in enumerate(centers):
        p = GammatoneParams(a=1.0, n=order, b=GAMMATONE_BW_SCALE * float(erb_bandwidth(fc)), f_c=float(fc))
        h = np.abs(np.fft.fft(gammatone_ir(p, t, analytic=True), n_fft)[:n_bins])
        weights[i] = h / h.max()
    return FilterBank(weights, "gammatone", centers, sample_rate, n_fft)


def gfcc(clip: MonoClip, n_ceps: int = N_GFCC, n_filters: int = N_GAMMATONE, n_fft: int = N_FFT,
         win_length: int = WIN_LENGTH, hop: int = HOP,
         filterbank: FilterBank | None = None) -> FeatureMatrix:
    """DCT of log gammatone band energies, shape (n_frames, n_ceps)."""
    if n_ceps > n_filters:
        raise InvalidArgument(f"n_ceps={n_ceps} exceeds n_filters={n_filters}")
    fb = filterbank or _cached_gammatone(clip.sample_rate, n_fft, n_filters)
    energy = _power(clip, n_fft, win_length, hop) @ fb.weights.T
    ceps = dct_ii(np.log(energy + GFCC_EPS), n_ceps, axis=1)
    return FeatureMatrix(ceps, "gfcc", hop, clip.sample_rate)


_FB_CACHE: dict = {}


def _cached(key, build):
    fb = _FB_CACHE.get(key)
    if fb is None:
        fb = _FB_CACHE[key] = build()
        fb.weights.setflags(write=False)
    return fb


def _cached_mel(sample_rate, n_fft, n_mels):
    return _cached(("mel", sample_rate, n_fft, n_mels), lambda: mel_filterbank(sample_rate, n_fft, n_mels))


def _cached_gammatone(sample_rate, n_fft, n_filters):
    return _cached(("gt", sample_rate, n_fft, n_filters),
                   lambda: gammatone_filterbank(sample_rate, n_fft, n_filters))


def extract(clip: MonoClip, kind: str) -> FeatureMatrix:
    """Dispatch on feature kind with the default parameterisation."""
    if kind == "mel":
        return mel_spectrogram(clip)
    if kind == "mfcc":
        return mfcc(clip)
    if kind == "gfcc":
        return gfcc(clip)
    raise InvalidArgument(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
