"""
Corpus Sintético - Bonafide vs Spoof
====================================

Substituto determinístico do ASVspoof para testes em escala de bancada.

- bonafide: 3-5 harmônicos com vibrato lento de amplitude + ruído baixo
- spoof: mesma construção + artefatos de vocoder (quantização espectral
  por quadro e descontinuidades periódicas de fase)
"""

from pathlib import Path
from typing import Dict, List, Union

import librosa
import numpy as np
from loguru import logger

from audio.io import AudioClip, write_wav
from audio.protocol import Dataset, Label, Split, TrialEntry, format_protocol
from core.errors import ContractError

SAMPLE_RATE = 16000
DURATION = 1.0
NOISE_STD = 0.002
PEAK = 0.9

# artefatos de spoof
PHASE_JUMP_PERIOD = 160      # amostras (10 ms)
QUANT_STEP_DB = 6.0
QUANT_N_FFT = 512
QUANT_HOP = 128


def _rng(seed: int, label: Label, index: int, split: Split = Split.TRAIN) -> np.random.Generator:
    class_key = 1 if label is Label.BONAFIDE else 2
    entropy = [seed, class_key, index] + ([1] if split is Split.EVAL else [])
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _harmonic_stack(rng: np.random.Generator, n: int, sr: int, phase_jumps: bool) -> np.ndarray:
    t = np.arange(n) / sr
    f0 = rng.uniform(110.0, 260.0)
    n_harmonics = int(rng.integers(3, 6))
    vibrato_rate = rng.uniform(3.0, 6.0)
    vibrato_depth = rng.uniform(0.1, 0.3)
    envelope = 1.0 + vibrato_depth * np.sin(2 * np.pi * vibrato_rate * t + rng.uniform(0, 2 * np.pi))

    n_segments = n // PHASE_JUMP_PERIOD + 1
    segment = np.arange(n) // PHASE_JUMP_PERIOD
    x = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        phase = rng.uniform(0, 2 * np.pi)
        jumps = rng.uniform(0.5 * np.pi, 1.5 * np.pi, size=n_segments).cumsum()
        if phase_jumps:
            phase = phase + jumps[segment]
        x += np.sin(2 * np.pi * k * f0 * t + phase) / k
    return x * envelope


def _quantize_spectrum(x: np.ndarray) -> np.ndarray:
    """Quantizar a magnitude de cada quadro em degraus de QUANT_STEP_DB."""
    spec = librosa.stft(x, n_fft=QUANT_N_FFT, hop_length=QUANT_HOP)
    magnitude, phase = np.abs(spec), np.angle(spec)
    level_db = 20 * np.log10(np.maximum(magnitude, 1e-8))
    quantized = 10 ** (np.round(level_db / QUANT_STEP_DB) * QUANT_STEP_DB / 20)
    return librosa.istft(quantized * np.exp(1j * phase), hop_length=QUANT_HOP, length=x.size)


def synth_clip(seed: int, label: Label, index: int, sample_rate: int = SAMPLE_RATE,
               duration: float = DURATION, split: Split = Split.TRAIN) -> np.ndarray:
    """Gerar as amostras de um clip sintético (fluxos aleatórios distintos por split)."""
    rng = _rng(seed, label, index, split)
    n = int(round(sample_rate * duration))
    spoof = label is Label.SPOOF

    x = _harmonic_stack(rng, n, sample_rate, phase_jumps=spoof)
    if spoof:
        x = _quantize_spectrum(x)
    x = x + rng.normal(0.0, NOISE_STD, size=n) * np.abs(x).max()
    return PEAK * x / np.abs(x).max()


def synth_dataset(n_per_class: int, seed: int, split: Union[Split, str] = Split.TRAIN) -> Dataset:
    """Dataset sintético determinístico com n_per_class clips por classe."""
    if n_per_class < 1:
        raise ContractError("n_per_class deve ser >= 1")
    split = Split(split)
    prefix = "SYN_T" if split is Split.TRAIN else "SYN_E"

    entries: List[TrialEntry] = []
    clips: Dict[str, AudioClip] = {}
    for label in (Label.BONAFIDE, Label.SPOOF):
        for i in range(n_per_class):
            utt = f"{prefix}_{len(entries):07d}"
            samples = synth_clip(seed, label, i, split=split)
            clips[utt] = AudioClip(samples=samples, sample_rate=SAMPLE_RATE, source_id=utt)
            entries.append(TrialEntry(
                utterance_id=utt,
                label=label,
                attack_id="S01" if label is Label.SPOOF else None,
                split=split,
                speaker_id=f"SYN_{i % 10:04d}",
            ))

    logger.info(f"🎭 corpus sintético: {n_per_class} bonafide + {n_per_class} spoof (seed {seed}, {split.value})")
    return Dataset(entries=entries, clip_resolver=clips)


def write_dataset(dataset: Dataset, out_dir: Union[str, Path], protocol_name: str,
                  subtype: str = "PCM_16") -> Path:
    """Gravar `<utterance_id>.wav` + protocolo CM em out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in dataset.entries:
        write_wav(out_dir / f"{entry.utterance_id}.wav", dataset.clip(entry.utterance_id), subtype)

    protocol_path = out_dir / protocol_name
    protocol_path.write_text(format_protocol(dataset.entries), encoding="utf-8")
    logger.info(f"💾 {len(dataset)} clips gravados em {out_dir}")
    return protocol_path


def spectral_flatness(clip: AudioClip) -> float:
    """Planicidade espectral média do clip."""
    return float(librosa.feature.spectral_flatness(y=clip.samples.astype(np.float64)).mean())
