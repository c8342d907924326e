"""
Audio I/O - Leitura, Escrita e Reamostragem
===========================================

Lê arquivos WAV (PCM 16-bit ou float 32-bit), faz downmix para mono
e reamostra para a taxa canônica de 16 kHz.
"""

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf
from loguru import logger
from scipy import signal

from core.errors import ContractError, DataError, UnsupportedFormatError, WavFormatError

PathLike = Union[str, Path]

SUPPORTED_SUBTYPES = {"PCM_16", "FLOAT"}


@dataclass(frozen=True)
class AudioClip:
    """Sinal mono com taxa de amostragem."""
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ContractError(f"sample_rate inválido: {self.sample_rate}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ContractError("AudioClip exige amostras mono não vazias")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size


def _check_riff_header(path: Path):
    """Validar chunks RIFF/WAVE, 'fmt ' e 'data' antes de decodificar."""
    with path.open("rb") as f:
        head = f.read(12)
        if len(head) < 12 or head[:4] != b"RIFF":
            raise WavFormatError(path, "RIFF", "assinatura ausente")
        if head[8:12] != b"WAVE":
            raise WavFormatError(path, "RIFF", f"tipo '{head[8:12]!r}' em vez de WAVE")

        seen = set()
        while True:
            chunk = f.read(8)
            if len(chunk) < 8:
                break
            chunk_id, size = struct.unpack("<4sI", chunk)
            name = chunk_id.decode("ascii", errors="replace")
            if name == "fmt ":
                body = f.read(size)
                if len(body) < 16:
                    raise WavFormatError(path, "fmt ", f"tamanho {size} < 16")
                _, channels = struct.unpack("<HH", body[:4])
                if channels == 0:
                    raise WavFormatError(path, "fmt ", "0 canais")
            else:
                f.seek(size + (size & 1), 1)
            seen.add(name)
            if "fmt " in seen and "data" in seen:
                return

    for required in ("fmt ", "data"):
        if required not in seen:
            raise WavFormatError(path, required, "chunk ausente")


def read_wav(path: PathLike) -> AudioClip:
    """Ler WAV mono ou estéreo como AudioClip em [-1, 1]."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"arquivo não encontrado: {path}")

    _check_riff_header(path)
    info = sf.info(str(path))
    if info.format != "WAV" or info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedFormatError(path, f"{info.format}/{info.subtype}")

    # libsndfile escala PCM16 dividindo por 32768
    data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)
    if data.shape[0] == 0:
        raise WavFormatError(path, "data", "nenhuma amostra")

    samples = data.mean(axis=1) if data.shape[1] > 1 else data[:, 0]
    if not np.all(np.isfinite(samples)):
        raise DataError(f"{path}: amostras não finitas")
    samples = np.clip(samples, -1.0, 1.0)

    logger.debug(f"🎤 {path.name}: {samples.size} amostras @ {sample_rate} Hz ({data.shape[1]} canal/is)")
    return AudioClip(samples=samples, sample_rate=int(sample_rate), source_id=path.stem)


def write_wav(path: PathLike, clip: AudioClip, subtype: str = "PCM_16"):
    """Gravar AudioClip como WAV mono."""
    if subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedFormatError(path, subtype)
    sf.write(str(path), np.clip(clip.samples, -1.0, 1.0), clip.sample_rate,
             format="WAV", subtype=subtype)


def _polyphase_filter(up: int, down: int, taps_per_phase: int, beta: float) -> np.ndarray:
    """FIR passa-baixas sinc com janela Kaiser para reamostragem polifásica."""
    max_rate = max(up, down)
    n_taps = taps_per_phase * max_rate + 1
    h = signal.firwin(n_taps, 1.0 / max_rate, window=("kaiser", beta))
    return h


def resample(clip: AudioClip, target_rate: int, taps_per_phase: int = 64,
             kaiser_beta: float = 8.6) -> AudioClip:
    """Reamostrar por interpolação sinc polifásica (janela Kaiser)."""
    if target_rate <= 0:
        raise ContractError(f"taxa alvo inválida: {target_rate}")
    if clip.sample_rate == target_rate:
        return clip

    g = gcd(clip.sample_rate, target_rate)
    up, down = target_rate // g, clip.sample_rate // g
    h = _polyphase_filter(up, down, taps_per_phase, kaiser_beta)
    out = signal.resample_poly(clip.samples, up, down, window=h)
    out = np.clip(out, -1.0, 1.0)

    logger.debug(f"🔄 reamostragem {clip.sample_rate} → {target_rate} Hz ({clip.samples.size} → {out.size})")
    return AudioClip(samples=out, sample_rate=target_rate, source_id=clip.source_id)
