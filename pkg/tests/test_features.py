import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from vehicle_audio.audio_io import MonoClip
from vehicle_audio.errors import InvalidArgument
from vehicle_audio.features import (FeatureMatrix, GammatoneParams, dct_ii, erb_bandwidth, extract,
                                    gammatone_filterbank, gammatone_ir, gfcc, hann_window, hz_to_mel, idct_ii,
                                    istft, magnitude_spectrum, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc,
                                    power_to_db, spectrum_frequencies, stft)

RATE = 22050


def noise_clip(n, seed=0):
    return MonoClip(np.random.default_rng(seed).uniform(-1, 1, n), RATE)


# ---------------------------------------------------------------- windows and STFT

def test_hann_closed_form():
    assert np.allclose(hann_window(4), [0, 0.5, 1, 0.5])
    for n in (2, 5, 64, 1024):
        w = hann_window(n)
        assert w[0] == 0 and w.min() >= 0 and w.max() <= 1
        if n % 2 == 0:
            assert w[n // 2] == 1.0
    with pytest.raises(InvalidArgument):
        hann_window(0)


def test_stft_frame_count_and_bins():
    g = stft(noise_clip(44100))
    assert g.frames.shape == (87, 1025)
    with pytest.raises(InvalidArgument):
        stft(noise_clip(100), hop=0)
    with pytest.raises(InvalidArgument):
        stft(noise_clip(100), n_fft=512, win_length=1024)
    with pytest.raises(InvalidArgument):
        stft(MonoClip(np.zeros(0), RATE))


@settings(max_examples=30, deadline=None)
@given(st.integers(1025, 20000))
def test_frame_count_law(n):
    x = noise_clip(n, seed=n)
    assert stft(x).n_frames == 1 + n // 512


def test_stft_impulse_at_frame_center_is_flat():
    x = np.zeros(44100)
    x[10 * 512] = 1.0
    mag = np.abs(stft(MonoClip(x, RATE)).frames[10])
    assert np.allclose(mag, 1.0, atol=1e-12)


def test_stft_matches_direct_dft():
    x = np.random.default_rng(3).uniform(-1, 1, 4096)
    got = stft(MonoClip(x, RATE)).frames
    for t in (0, 3, 8):
        want = oracles.direct_dft(oracles.stft_frame(x, t))
        assert np.max(np.abs(got[t] - want)) < 1e-9


def test_stft_linearity_and_shift():
    rng = np.random.default_rng(4)
    x, y = rng.uniform(-1, 1, 8192), rng.uniform(-1, 1, 8192)
    sx, sy, sxy = (stft(MonoClip(v, RATE)).frames for v in (x, y, x + y))
    assert np.max(np.abs(sxy - (sx + sy))) < 1e-9
    shifted = np.concatenate([np.zeros(512), x[:-512]])
    a = np.abs(stft(MonoClip(x, RATE)).frames)
    b = np.abs(stft(MonoClip(shifted, RATE)).frames)
    assert np.max(np.abs(b[4:-4] - a[3:-5])) < 1e-6


def test_istft_round_trip():
    x = np.random.default_rng(5).uniform(-1, 1, 10000)
    g = stft(MonoClip(x, RATE), n_fft=2048, win_length=2048)
    assert np.max(np.abs(istft(g, len(x)) - x)) < 1e-10


# ---------------------------------------------------------------- spectrum

def test_magnitude_spectrum_sine_and_parseval():
    n, a, k = 4096, 0.7, 37
    x = a * np.sin(2 * np.pi * k * np.arange(n) / n)
    mag = magnitude_spectrum(MonoClip(x, RATE))
    assert len(mag) == n // 2 + 1
    assert abs(mag[k] - a * n / 2) < 1e-9
    assert spectrum_frequencies(n, RATE)[k] == k * RATE / n
    assert not magnitude_spectrum(MonoClip(np.zeros(64), RATE)).any()
    y = np.random.default_rng(6).standard_normal(1000)
    X = magnitude_spectrum(MonoClip(y, RATE))
    rhs = (X[0] ** 2 + 2 * np.sum(X[1:500] ** 2) + X[500] ** 2) / 1000
    assert abs(np.sum(y ** 2) - rhs) / rhs < 1e-6


# ---------------------------------------------------------------- mel

def test_mel_scale_round_trip():
    f = np.array([0.0, 200.0, 999.0, 1000.0, 4000.0, 11025.0])
    assert np.allclose(mel_to_hz(hz_to_mel(f)), f)
    assert np.allclose([oracles.slaney_hz_to_mel(v) for v in f], hz_to_mel(f))


def test_mel_filterbank_shape_and_direct_values():
    fb = mel_filterbank()
    assert fb.weights.shape == (128, 1025) and fb.kind == "mel"
    assert (fb.weights >= 0).all()
    assert np.all(np.diff(fb.center_freqs) > 0) and fb.center_freqs[-1] <= RATE / 2
    for i, k in [(0, 1), (5, 10), (40, 90), (100, 450), (127, 1000)]:
        assert abs(fb.weights[i, k] - oracles.mel_triangle_weight(i, k)) < 1e-12
    for row in fb.weights:
        nz = np.flatnonzero(row)
        peak = np.argmax(row[nz])
        seg = row[nz]
        assert np.all(np.diff(seg[:peak + 1]) >= 0) and np.all(np.diff(seg[peak:]) <= 0)


def test_mel_filterbank_full_matrix_matches_oracle():
    assert np.max(np.abs(mel_filterbank().weights - oracles.mel_matrix())) < 1e-12


def test_mel_filterbank_warns_on_empty_filters():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fb = mel_filterbank(22050, 64, 128)
    assert any("empty" in str(w.message) for w in caught)
    assert (fb.weights.max(axis=1) == 0).any()
    with pytest.raises(InvalidArgument):
        mel_filterbank(22050, 2048, 128, f_min=5000, f_max=4000)


def test_power_to_db():
    p = np.array([[1.0, 0.1], [1e-12, 0.0]])
    db = power_to_db(p)
    assert db.max() == 0.0 and abs(db[0, 1] + 10) < 1e-12
    assert db.min() == -80.0


def test_mel_spectrogram_properties():
    m = mel_spectrogram(noise_clip(44100))
    assert m.shape == (87, 128) and m.kind == "mel"
    assert m.values.max() == 0.0 and m.values.min() >= -80.0
    z = mel_spectrogram(MonoClip(np.zeros(44100), RATE)).values
    assert np.all(z == z[0, 0])


# ---------------------------------------------------------------- DCT and MFCC

def test_dct_examples():
    v = np.full(16, 2.5)
    y = dct_ii(v)
    assert abs(y[0] - 2.5 * 4) < 1e-12 and np.max(np.abs(y[1:])) < 1e-12
    r = np.random.default_rng(7).standard_normal(8)
    assert np.max(np.abs(dct_ii(r) - oracles.dct2_ortho(r))) < 1e-12
    assert np.max(np.abs(dct_ii(r, 3) - oracles.dct2_ortho(r, 3))) < 1e-12
    assert abs(np.sum(dct_ii(r) ** 2) - np.sum(r ** 2)) < 1e-9
    with pytest.raises(InvalidArgument):
        dct_ii(r, 9)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=64))
def test_dct_inverse_identity(values):
    v = np.array(values)
    assert np.max(np.abs(idct_ii(dct_ii(v)) - v), initial=0) < 1e-9 * max(1.0, np.abs(v).max())


def test_mfcc_shapes_and_zero_clip():
    assert mfcc(noise_clip(44100)).shape == (87, 128)
    z = mfcc(MonoClip(np.zeros(44100), RATE)).values
    floor_db = mel_spectrogram(MonoClip(np.zeros(44100), RATE)).values[0, 0]
    assert np.allclose(z[:, 0], floor_db * np.sqrt(128)) and np.max(np.abs(z[:, 1:])) < 1e-12
    with pytest.raises(InvalidArgument):
        mfcc(noise_clip(4096), n_mfcc=129)


# ---------------------------------------------------------------- gammatone and GFCC

def test_erb_bandwidth():
    assert abs(erb_bandwidth(1000.0) - 132.639) < 1e-9
    assert abs(erb_bandwidth(1e-9) - 24.7) < 1e-6
    f = np.linspace(1, 11025, 200)
    assert np.all(np.diff(erb_bandwidth(f)) > 0)


def test_gammatone_ir_closed_form():
    p = GammatoneParams(a=1.0, n=4, b=100.0, f_c=1000.0)
    assert gammatone_ir(p, 0.0) == 0.0
    t = np.linspace(0, 0.02, 301)
    g = gammatone_ir(p, t)
    want = t ** 3 * np.exp(-2 * np.pi * 100 * t) * np.cos(2 * np.pi * 1000 * t)
    assert np.max(np.abs(g - want)) < 1e-18
    p2 = GammatoneParams(a=2.0, n=4, b=100.0, f_c=1000.0)
    assert np.array_equal(gammatone_ir(p2, t), 2 * g)
    assert np.allclose(gammatone_ir(p, t, analytic=True).real, g, rtol=0, atol=1e-20)
    with pytest.raises(InvalidArgument):
        GammatoneParams(b=0)
    with pytest.raises(InvalidArgument):
        gammatone_ir(p, -1.0)


@pytest.mark.parametrize("n,b,fc", [(4, 100.0, 1000.0), (4, 250.0, 3000.0), (2, 50.0, 500.0), (6, 80.0, 200.0)])
def test_gammatone_envelope_peak(n, b, fc):
    t_star = (n - 1) / (2 * np.pi * b)
    p = GammatoneParams(a=1.0, n=n, b=b, f_c=fc, phi=-2 * np.pi * fc * t_star)
    step = 1e-6
    t = np.arange(0, 4 * t_star, step)
    peak = t[np.argmax(np.abs(gammatone_ir(p, t)))]
    assert abs(peak - t_star) <= step


def test_gammatone_filterbank_properties():
    fb = gammatone_filterbank()
    assert fb.weights.shape == (128, 1025)
    assert fb.weights.min() >= 0 and np.allclose(fb.weights.max(axis=1), 1.0)
    assert np.all(np.diff(fb.center_freqs) > 0)
    assert abs(fb.center_freqs[0] - 20) < 1e-9 and abs(fb.center_freqs[-1] - RATE / 2) < 1e-6
    peak_bins = fb.weights.argmax(axis=1)
    fc_bins = fb.center_freqs * 2048 / RATE
    assert np.max(np.abs(peak_bins - fc_bins)) <= 2


def test_gammatone_filterbank_matches_oracle():
    want, centers = oracles.gammatone_matrix()
    fb = gammatone_filterbank()
    assert np.max(np.abs(fb.center_freqs - centers)) < 1e-9
    assert np.max(np.abs(fb.weights - want)) < 1e-9


def test_gfcc_shape_and_zero_clip():
    assert gfcc(noise_clip(44100)).shape == (87, 64)
    z = gfcc(MonoClip(np.zeros(44100), RATE)).values
    assert np.allclose(z[:, 0], np.log(1e-10) * np.sqrt(128)) and np.max(np.abs(z[:, 1:])) < 1e-9
    with pytest.raises(InvalidArgument):
        gfcc(noise_clip(4096), n_ceps=200)


# ---------------------------------------------------------------- composed oracles

@pytest.mark.parametrize("kind", ["mel", "mfcc", "gfcc"])
def test_composed_feature_oracle(kind):
    x = np.random.default_rng(11).uniform(-1, 1, 2048)
    frame = 2
    want = oracles.features_by_direct_sums(x, kind, frames=[frame])
    got = extract(MonoClip(x, RATE), kind).values
    assert np.max(np.abs(got[frame] - want[frame])) < 1e-6


@pytest.mark.parametrize("kind,coeffs", [("mel", 128), ("mfcc", 128), ("gfcc", 64)])
def test_extract_shapes_and_determinism(kind, coeffs):
    clip = noise_clip(44100, 2)
    a, b = extract(clip, kind), extract(clip, kind)
    assert a.shape == (87, coeffs)
    assert a.values.tobytes() == b.values.tobytes()


def test_extract_unknown_kind():
    with pytest.raises(InvalidArgument):
        extract(noise_clip(4096), "lpc")


def test_feature_matrix_exports(tmp_path):
    fm = FeatureMatrix(np.arange(6.0).reshape(3, 2), "mfcc")
    text = fm.to_csv(tmp_path / "f.csv")
    assert text.splitlines()[0] == "c0,c1" and text.splitlines()[1] == "0.0,1.0"
    assert len(text.splitlines()) == 4
    pgm = fm.to_pgm(tmp_path / "f.pgm")
    header, pixels = pgm[:11], pgm[11:]
    assert header == b"P5\n3 2\n255\n"
    # coefficient 1 on the top row, coefficient 0 at the bottom
    assert list(pixels) == [51, 153, 255, 0, 102, 204]
    assert (tmp_path / "f.pgm").read_bytes() == pgm
    with pytest.raises(InvalidArgument):
        FeatureMatrix(np.zeros((2, 2)), "chroma")
