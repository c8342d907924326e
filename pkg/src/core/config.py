"""
Configurações Globais do QV-Spoof
=================================

Gerencia todas as configurações da aplicação:
áudio, extração de features, bloco QV, modelos, treino e runtime.
"""

import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

import psutil
from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

FeatureKind = Literal["stft", "mel", "mfcc"]
Arch = Literal["cnn", "qv_cnn", "vit", "qv_vit"]

GRID_BATCH_SIZES = (8, 16, 32, 64)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class AudioConfig(_Section):
    """Configurações de áudio."""
    sample_rate: int = Field(16000, gt=0)
    taps_per_phase: int = Field(64, gt=0)
    kaiser_beta: float = 8.6


class FeatureConfig(_Section):
    """Parâmetros do front-end tempo-frequência."""
    sample_rate: int = Field(16000, gt=0)
    win_length: int = Field(1024, gt=0)
    hop_length: int = Field(256, gt=0)
    n_fft: int = Field(1024, gt=0)
    n_mels: int = Field(128, gt=0)
    fmin: float = Field(0.0, ge=0)
    fmax: float = Field(8000.0, gt=0)
    n_mfcc: int = Field(40, gt=0)
    out_height: int = Field(32, gt=0)
    out_width: int = Field(32, gt=0)
    top_db: float = Field(80.0, gt=0)
    amin: float = Field(1e-10, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if self.fmax > self.sample_rate / 2:
            raise ValueError("fmax deve ser <= sample_rate / 2")
        if self.fmin >= self.fmax:
            raise ValueError("fmin deve ser < fmax")
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc deve ser <= n_mels")
        if self.win_length > self.n_fft:
            raise ValueError("win_length deve ser <= n_fft")
        return self

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


class QVConfig(_Section):
    """Bloco Quantum Vision: deslocamentos, filtros e profundidade dos ramos."""
    shifts: Tuple[int, ...] = (-1, 1, -2, 2)
    filters: int = Field(128, gt=0)
    depth: Literal[1, 3] = 1
    kernel: int = Field(3, gt=0)
    in_channels: int = Field(1, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if 0 in self.shifts:
            raise ValueError("m = 0 não produz função de onda")
        if len(set(self.shifts)) != len(self.shifts):
            raise ValueError("deslocamentos repetidos")
        if sorted(self.shifts) != sorted(-m for m in self.shifts):
            raise ValueError("deslocamentos devem ser simétricos em torno de 0")
        if self.kernel % 2 == 0:
            raise ValueError("kernel deve ser ímpar (padding 'same')")
        return self

    @property
    def reach(self) -> int:
        return max(abs(m) for m in self.shifts)


class ModelConfig(_Section):
    """Arquitetura dos quatro classificadores."""
    arch: Arch = "qv_cnn"
    qv: Optional[QVConfig] = None
    in_channels: int = Field(1, gt=0)
    input_size: int = Field(32, gt=0)
    cnn_channels: Tuple[int, ...] = (64, 64, 128, 128, 256, 256)
    cnn_kernel: int = 3
    vit_layers: int = Field(8, gt=0)
    vit_heads: int = Field(4, gt=0)
    vit_patch: int = Field(8, gt=0)
    vit_embed_dim: int = Field(1024, gt=0)
    vit_mlp_dim: int = Field(2048, gt=0)
    token_mode: Literal["patch", "channel"] = "patch"
    classes: int = 2
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        is_qv = self.arch.startswith("qv_")
        if is_qv and self.qv is None:
            raise ValueError(f"arquitetura {self.arch} exige a seção qv")
        if not is_qv and self.qv is not None:
            raise ValueError(f"arquitetura {self.arch} não aceita a seção qv")
        if is_qv and self.qv.in_channels != self.in_channels:
            raise ValueError("qv.in_channels difere de in_channels")
        if self.classes != 2:
            raise ValueError("apenas classificação binária (bonafide/spoof)")
        if self.cnn_kernel % 2 == 0:
            raise ValueError("cnn_kernel deve ser ímpar")
        if self.vit_embed_dim % self.vit_heads:
            raise ValueError("vit_embed_dim deve ser divisível por vit_heads")
        if self.arch in ("vit", "qv_vit") and self.input_size % self.vit_patch:
            raise ValueError("input_size deve ser divisível por vit_patch")
        return self

    @classmethod
    def for_arch(cls, arch: Arch, **values) -> "ModelConfig":
        """Config padrão de uma arquitetura (cria a seção qv quando necessário)."""
        if arch.startswith("qv_") and "qv" not in values:
            values["qv"] = QVConfig(in_channels=values.get("in_channels", 1))
        return cls(arch=arch, **values)


class TrainConfig(_Section):
    """Hiperparâmetros de treino."""
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(100, ge=1)
    lr: float = Field(1e-4, ge=0)
    seed: int = 0
    class_weighting: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.batch_size not in GRID_BATCH_SIZES:
            logger.debug(f"batch_size {self.batch_size} fora da grade {GRID_BATCH_SIZES}")
        return self


class RuntimeConfig(_Section):
    """Execução: threads, precisão numérica e logging."""
    threads: int = Field(default_factory=lambda: psutil.cpu_count(logical=False) or 1, ge=1)
    dtype: Literal["float32", "float64"] = "float32"
    log_level: str = "INFO"
    log_dir: Path = Path("logs")


class Config:
    """Configuração principal do QV-Spoof."""

    def __init__(
        self,
        audio: Optional[AudioConfig] = None,
        features: Optional[FeatureConfig] = None,
        model: Optional[ModelConfig] = None,
        train: Optional[TrainConfig] = None,
        runtime: Optional[RuntimeConfig] = None,
        app_dir: Optional[Path] = None,
    ):
        self.app_dir = Path(app_dir) if app_dir else Path.cwd()
        self.audio = audio or AudioConfig()
        self.features = features or FeatureConfig()
        self.model = model or ModelConfig.for_arch("qv_cnn")
        self.train = train or TrainConfig()
        self.runtime = runtime or RuntimeConfig()

    @classmethod
    def from_env(cls, app_dir: Optional[Path] = None) -> "Config":
        """Carregar runtime a partir de variáveis de ambiente (e `.env`)."""
        load_dotenv()
        runtime: Dict[str, Any] = {}
        if os.getenv("QV_THREADS"):
            runtime["threads"] = os.environ["QV_THREADS"]
        if os.getenv("QV_DTYPE"):
            runtime["dtype"] = os.environ["QV_DTYPE"]
        if os.getenv("QV_LOG_LEVEL"):
            runtime["log_level"] = os.environ["QV_LOG_LEVEL"]
        if os.getenv("QV_LOG_DIR"):
            runtime["log_dir"] = Path(os.environ["QV_LOG_DIR"])
        return cls(runtime=RuntimeConfig(**runtime), app_dir=app_dir)

    def with_overrides(self, section: str, **values) -> "Config":
        """Nova Config com campos de uma seção substituídos."""
        current = getattr(self, section)
        updated = type(current).model_validate({**current.model_dump(), **values})
        sections = {name: getattr(self, name) for name in ("audio", "features", "model", "train", "runtime")}
        sections[section] = updated
        return Config(app_dir=self.app_dir, **sections)

    def get_log_path(self) -> Path:
        """Obter caminho do arquivo de log."""
        log_dir = self.runtime.log_dir
        if not log_dir.is_absolute():
            log_dir = self.app_dir / log_dir
        log_dir.mkdir(parents=True, exist_ok=True)
        return log_dir / "qv.log"

    def to_dict(self) -> Dict[str, Any]:
        """Converter configuração para dicionário (todos os padrões materializados)."""
        return {
            "audio": self.audio.model_dump(mode="json"),
            "features": self.features.model_dump(mode="json"),
            "model": self.model.model_dump(mode="json"),
            "train": self.train.model_dump(mode="json"),
            "runtime": self.runtime.model_dump(mode="json"),
        }
