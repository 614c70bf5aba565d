"""WAV decoding and clip normalisation: stereo downmix, resampling, fixed duration.

The processing order used throughout the toolkit is
decode -> downmix -> resample -> fix_duration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import DecodeError, InvalidArgument, UnsupportedFormat

WORKING_RATE = 22050
CLIP_SECONDS = 2.0

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE

# Kaiser beta for the polyphase anti-alias low-pass. 5.0 gives ~-50 dB stopband,
# plenty for downstream spectral features.
KAISER_BETA = 5.0


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RawClip:
    """Decoded multi-channel audio; ``channels`` has shape (n_channels, n_samples)."""

    channels: np.ndarray
    sample_rate: int

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=np.float64))
        if self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "channels", _frozen(ch))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]


@dataclass(frozen=True, eq=False)
class MonoClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise InvalidArgument(f"MonoClip needs a 1-D sample array, got shape {s.shape}")
        if self.sample_rate <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        yield cid, size, body
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes) -> RawClip:
    """Decode a RIFF/WAVE byte string holding s16le or f32le PCM, mono or stereo.

    Integer PCM is scaled by 1/32768; float PCM is clipped to [-1, 1].
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DecodeError("not a RIFF/WAVE container")

    fmt = None
    pcm = None
    for cid, size, body in _iter_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise DecodeError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            tag = fmt[0]
            if tag == _EXTENSIBLE:
                if len(body) < 26:
                    raise DecodeError("WAVE_FORMAT_EXTENSIBLE chunk too short")
                (tag,) = struct.unpack_from("<H", body, 24)
            fmt = (tag,) + fmt[1:]
        elif cid == b"data":
            if len(body) < size:
                raise DecodeError(f"data chunk truncated: header says {size} bytes, found {len(body)}")
            pcm = body
    if fmt is None:
        raise DecodeError("missing fmt chunk")
    if pcm is None:
        raise DecodeError("missing data chunk")

    tag, n_channels, rate, _, block_align, bits = fmt
    if n_channels not in (1, 2):
        raise UnsupportedFormat(f"{n_channels} channels; only mono and stereo are accepted")
    if rate <= 0:
        raise DecodeError(f"invalid sample rate {rate}")
    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormat(f"format tag {tag} with {bits} bits per sample")
    if block_align != n_channels * dtype.itemsize:
        raise DecodeError(f"block_align {block_align} inconsistent with {n_channels}x{bits} bit")

    n_frames = len(pcm) // block_align
    raw = np.frombuffer(pcm[:n_frames * block_align], dtype=dtype)
    samples = raw.astype(np.float64).reshape(n_frames, n_channels).T * scale
    if tag == _IEEE_FLOAT:
        samples = np.clip(np.nan_to_num(samples), -1.0, 1.0)
    return RawClip(samples, int(rate))


def encode_wav(clip: RawClip | MonoClip) -> bytes:
    """Encode as 16-bit PCM WAV. Inverse of :func:`decode_wav` for 16-bit input."""
    if isinstance(clip, MonoClip):
        channels = clip.samples[None, :]
    else:
        channels = clip.channels
    n_ch, n = channels.shape
    ints = np.clip(np.round(channels * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.T.tobytes()
    fmt = struct.pack("<HHIIHH", _PCM, n_ch, clip.sample_rate, clip.sample_rate * 2 * n_ch, 2 * n_ch, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path) -> RawClip:
    return decode_wav(Path(path).read_bytes())


def write_wav(path, clip: RawClip | MonoClip) -> None:
    Path(path).write_bytes(encode_wav(clip))


def downmix(clip: RawClip | MonoClip) -> MonoClip:
    """Average the channels into one. Mono input passes through unchanged."""
    if isinstance(clip, MonoClip):
        return clip
    if clip.n_channels == 1:
        return MonoClip(clip.channels[0], clip.sample_rate)
    return MonoClip(clip.channels.mean(axis=0), clip.sample_rate)


def resample(clip: MonoClip, target_rate: int) -> MonoClip:
    """Band-limited polyphase resampling (Kaiser-windowed sinc low-pass).

    Output length is ``ceil(len(clip) * target_rate / clip.sample_rate)``.
    """
    if target_rate <= 0:
        raise InvalidArgument(f"target_rate must be positive, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    g = gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    out = resample_poly(clip.samples, up, down, window=("kaiser", KAISER_BETA))
    return MonoClip(out, target_rate)


def fix_duration(clip: MonoClip, seconds: float = CLIP_SECONDS) -> MonoClip:
    """Zero-pad the tail or trim it so the clip lasts exactly ``seconds``."""
    if seconds <= 0:
        raise InvalidArgument(f"seconds must be positive, got {seconds}")
    n = int(round(seconds * clip.sample_rate))
    s = clip.samples
    if len(s) == n:
        return clip
    if len(s) > n:
        return MonoClip(s[:n], clip.sample_rate)
    return MonoClip(np.concatenate([s, np.zeros(n - len(s))]), clip.sample_rate)


def normalize_clip(raw: RawClip | MonoClip, target_rate: int = WORKING_RATE,
                   seconds: float = CLIP_SECONDS) -> MonoClip:
    return fix_duration(resample(downmix(raw), target_rate), seconds)


def load_clip(path, target_rate: int = WORKING_RATE, seconds: float = CLIP_SECONDS) -> MonoClip:
    """Read a WAV file and bring it to the working rate and fixed duration."""
    return normalize_clip(read_wav(path), target_rate, seconds)
