"""Testes do front-end espectral (STFT, Mel, MFCC, redimensionamento)."""

import numpy as np
import pytest

from audio.io import AudioClip
from core.config import FeatureConfig
from core.errors import ContractError
from features.image import FeatureImage, FeatureKind, resize_bilinear
from features.spectral import (
    dct_matrix,
    extract,
    hz_to_mel,
    mel_center_frequencies,
    mel_filterbank,
    mel_spectrogram,
    mfcc,
    stft_magnitude,
    to_db,
)

CFG = FeatureConfig()


def tone(freq: float, rate: int = 16000, seconds: float = 1.0, amplitude: float = 0.5) -> AudioClip:
    t = np.arange(int(rate * seconds)) / rate
    return AudioClip(samples=amplitude * np.sin(2 * np.pi * freq * t), sample_rate=rate)


def test_stft_shape_and_peak_bin():
    img = stft_magnitude(tone(1000.0), CFG)

    assert img.shape == (513, 63, 1)
    assert np.all(np.argmax(img.data[:, 5:-5, 0], axis=0) == 64)


def test_stft_of_silence_is_zero():
    img = stft_magnitude(AudioClip(samples=np.zeros(16000), sample_rate=16000), CFG)
    assert np.all(img.data == 0.0)


def test_to_db_reference_points():
    img = FeatureImage(data=np.array([[1.0, 0.1, 0.0]]))

    out = to_db(img, CFG).data[0, :, 0]

    np.testing.assert_allclose(out, [0.0, -20.0, -80.0], atol=1e-9)


def test_to_db_of_zero_input_is_constant():
    out = to_db(FeatureImage(data=np.zeros((4, 5))), CFG).data
    assert np.all(out == out.flat[0])


def test_to_db_rejects_negative():
    with pytest.raises(ContractError):
        to_db(FeatureImage(data=np.array([[-1.0]])), CFG)


def test_hz_to_mel_htk():
    assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2), abs=1e-6)
    assert hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)


def test_filterbank_triangles_peak_at_one():
    bank = mel_filterbank(CFG)

    assert bank.shape == (128, 513)
    assert np.all(bank >= 0.0)
    np.testing.assert_allclose(bank.max(axis=1), 1.0)


def test_dct_is_orthonormal():
    d = dct_matrix(40)
    np.testing.assert_allclose(d @ d.T, np.eye(40), atol=1e-12)


def test_mel_tone_lands_near_center_band():
    img = mel_spectrogram(tone(1000.0), CFG)
    centers = mel_center_frequencies(CFG)
    expected = int(np.argmin(np.abs(centers - 1000.0)))

    assert img.shape == (128, 63, 1)
    assert img.data.max() == pytest.approx(0.0)
    assert img.data.min() >= -80.0
    peak_rows = np.argmax(img.data[:, 5:-5, 0], axis=0)
    assert np.all(np.abs(peak_rows - expected) <= 1)


def test_mfcc_is_z_scored_per_coefficient():
    rng = np.random.default_rng(3)
    clip = AudioClip(samples=0.3 * rng.standard_normal(16000), sample_rate=16000)

    img = mfcc(clip, CFG)
    coeffs = img.data[:, :, 0]

    assert img.shape == (40, 63, 1)
    np.testing.assert_allclose(coeffs.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(coeffs.std(axis=1), 1.0, atol=1e-6)


def test_resize_keeps_corners_and_constants():
    data = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = resize_bilinear(FeatureImage(data=data), 5, 7).data[:, :, 0]

    assert out.shape == (5, 7)
    assert out[0, 0] == pytest.approx(data[0, 0])
    assert out[-1, -1] == pytest.approx(data[-1, -1])
    assert out[0, -1] == pytest.approx(data[0, -1])

    flat = resize_bilinear(FeatureImage(data=np.full((10, 3), 2.5)), 32, 32).data
    np.testing.assert_allclose(flat, 2.5)


def test_resize_interpolates_linear_ramp():
    ramp = np.tile(np.arange(4, dtype=np.float64), (2, 1))
    out = resize_bilinear(FeatureImage(data=ramp), 2, 7).data[0, :, 0]
    np.testing.assert_allclose(out, np.linspace(0.0, 3.0, 7))


def test_resize_same_size_is_identity():
    data = np.random.default_rng(0).normal(size=(6, 6, 2))
    out = resize_bilinear(FeatureImage(data=data), 6, 6).data
    np.testing.assert_allclose(out, data)


@pytest.mark.parametrize("kind", ["stft", "mel", "mfcc"])
def test_extract_output_shape(kind):
    img = extract(tone(440.0), kind, CFG)

    assert img.shape == (32, 32, 1)
    assert img.kind is FeatureKind(kind)
    assert np.all(np.isfinite(img.data))


def test_extract_rejects_other_rates():
    with pytest.raises(ContractError):
        extract(tone(440.0, rate=8000), "mel", CFG)


@pytest.mark.parametrize("extra", [1, 100, 255])
def test_stft_ignores_short_trailing_silence(extra):
    samples = tone(1000.0).samples.copy()
    samples[-CFG.n_fft:] = 0.0
    clip = AudioClip(samples=samples, sample_rate=16000)
    padded = AudioClip(samples=np.concatenate([samples, np.zeros(extra)]), sample_rate=16000)

    base = stft_magnitude(clip, CFG).data
    longer = stft_magnitude(padded, CFG).data

    assert longer.shape[1] - base.shape[1] in (0, 1)
    np.testing.assert_allclose(longer[:, :base.shape[1]], base, atol=1e-12)


def test_to_db_is_monotone_and_bounded():
    values = np.sort(np.random.default_rng(5).exponential(size=200) * np.logspace(-6, 0, 200))
    values[:3] = 0.0

    out = to_db(FeatureImage(data=values[None, :]), CFG).data[0, :, 0]

    assert np.all(np.diff(out) >= 0.0)
    assert out.min() >= -80.0 and out.max() == pytest.approx(0.0)


def test_filterbank_rows_have_contiguous_support():
    for row in mel_filterbank(CFG):
        support = np.flatnonzero(row > 0.0)
        assert support.size > 0
        np.testing.assert_array_equal(support, np.arange(support[0], support[-1] + 1))


@pytest.mark.parametrize("kind", ["stft", "mel", "mfcc"])
def test_extract_is_pure(kind):
    a = extract(tone(440.0), kind, CFG)
    b = extract(tone(440.0), kind, CFG)
    np.testing.assert_array_equal(a.data, b.data)


def test_mel_uses_twenty_log10_of_energies():
    clip = tone(1000.0)
    energies = mel_filterbank(CFG) @ stft_magnitude(clip, CFG).data[:, :, 0] ** 2
    expected = 20 * np.log10(np.maximum(energies, 1e-10) / energies.max())

    out = mel_spectrogram(clip, CFG).data[:, :, 0]

    np.testing.assert_allclose(out, np.maximum(expected, -80.0), atol=1e-6)
