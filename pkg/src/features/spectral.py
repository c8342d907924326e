"""
Front-end Espectral - STFT, Mel e MFCC
======================================

Transforma um AudioClip nas três representações usadas no treino:
STFT em dB, log-Mel e MFCC normalizado, todas redimensionadas para 32x32.
"""

from functools import lru_cache
from typing import Iterable, List, Union

import librosa
import numpy as np
import scipy.fft

from audio.io import AudioClip
from core.config import FeatureConfig
from core.errors import ContractError
from features.image import FeatureImage, FeatureKind, resize_bilinear

MFCC_STD_FLOOR = 1e-8


def _check_rate(clip: AudioClip, cfg: FeatureConfig):
    if clip.sample_rate != cfg.sample_rate:
        raise ContractError(
            f"taxa {clip.sample_rate} Hz difere de {cfg.sample_rate} Hz: reamostre o clip primeiro"
        )


def _complex_stft(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    _check_rate(clip, cfg)
    y = clip.samples.astype(np.float64)
    if y.size < cfg.n_fft:
        y = np.pad(y, (0, cfg.n_fft - y.size))
    return librosa.stft(
        y,
        n_fft=cfg.n_fft,
        hop_length=cfg.hop_length,
        win_length=cfg.win_length,
        window="hann",
        center=True,
        pad_mode="reflect",
    )


def stft_magnitude(clip: AudioClip, cfg: FeatureConfig) -> FeatureImage:
    """Magnitude |STFT| com janela Hann periódica e quadros centrados."""
    return FeatureImage(data=np.abs(_complex_stft(clip, cfg)), kind=FeatureKind.STFT)


def to_db(img: FeatureImage, cfg: FeatureConfig = FeatureConfig()) -> FeatureImage:
    """20·log10 relativo ao máximo global, limitado a [-top_db, 0]."""
    if np.any(img.data < 0):
        raise ContractError("to_db exige valores >= 0")
    data = librosa.amplitude_to_db(img.data, ref=np.max, amin=cfg.amin, top_db=cfg.top_db)
    return FeatureImage(data=data, kind=img.kind)


def hz_to_mel(frequency):
    """Escala Mel HTK: 2595·log10(1 + f/700)."""
    return librosa.hz_to_mel(frequency, htk=True)


@lru_cache(maxsize=8)
def _mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    bank = librosa.filters.mel(
        sr=sample_rate, n_fft=n_fft, n_mels=n_mels, fmin=fmin, fmax=fmax, htk=True, norm=None,
        dtype=np.float64,
    )
    peaks = bank.max(axis=1, keepdims=True)
    bank = np.divide(bank, peaks, out=np.zeros_like(bank), where=peaks > 0)
    bank.setflags(write=False)
    return bank


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Banco triangular (n_mels x n_bins) com pico 1.0 por filtro."""
    return _mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.fmin, cfg.fmax)


def mel_center_frequencies(cfg: FeatureConfig) -> np.ndarray:
    """Frequências centrais (Hz) dos filtros Mel."""
    edges = librosa.mel_frequencies(n_mels=cfg.n_mels + 2, fmin=cfg.fmin, fmax=cfg.fmax, htk=True)
    return edges[1:-1]


def mel_spectrogram(clip: AudioClip, cfg: FeatureConfig) -> FeatureImage:
    """Log-Mel em dB: |S|² → banco Mel → to_db (a mesma escala 20·log10 da STFT)."""
    power = np.abs(_complex_stft(clip, cfg)) ** 2
    energies = mel_filterbank(cfg) @ power
    return to_db(FeatureImage(data=energies, kind=FeatureKind.MEL), cfg)


@lru_cache(maxsize=4)
def dct_matrix(n: int) -> np.ndarray:
    """Matriz DCT-II ortonormal (n x n)."""
    matrix = scipy.fft.dct(np.eye(n), type=2, norm="ortho", axis=0)
    matrix.setflags(write=False)
    return matrix


def cepstral_coefficients(log_mel: np.ndarray, n_mfcc: int) -> np.ndarray:
    """DCT-II ortonormal ao longo do eixo Mel, coeficientes 0..n_mfcc-1."""
    return librosa.feature.mfcc(S=log_mel, n_mfcc=n_mfcc, dct_type=2, norm="ortho")


def mfcc(clip: AudioClip, cfg: FeatureConfig) -> FeatureImage:
    """MFCC com normalização z-score por coeficiente ao longo do tempo."""
    log_mel = mel_spectrogram(clip, cfg).data[:, :, 0]
    coeffs = cepstral_coefficients(log_mel, cfg.n_mfcc)
    mean = coeffs.mean(axis=1, keepdims=True)
    std = np.maximum(coeffs.std(axis=1, keepdims=True), MFCC_STD_FLOOR)
    return FeatureImage(data=(coeffs - mean) / std, kind=FeatureKind.MFCC)


def extract(clip: AudioClip, kind: Union[FeatureKind, str], cfg: FeatureConfig) -> FeatureImage:
    """Imagem final out_height x out_width x 1 para o tipo de feature pedido."""
    kind = FeatureKind(kind)
    if kind is FeatureKind.STFT:
        img = to_db(stft_magnitude(clip, cfg), cfg)
    elif kind is FeatureKind.MEL:
        img = mel_spectrogram(clip, cfg)
    elif kind is FeatureKind.MFCC:
        img = mfcc(clip, cfg)
    else:
        raise ContractError(f"tipo de feature não extraível: {kind.value}")
    return resize_bilinear(img, cfg.out_height, cfg.out_width)


def extract_batch(clips: Iterable[AudioClip], kind: Union[FeatureKind, str],
                  cfg: FeatureConfig) -> List[FeatureImage]:
    return [extract(clip, kind, cfg) for clip in clips]
