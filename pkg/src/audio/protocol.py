"""
Protocolos ASVspoof - Listas de Trials
======================================

Formato CM do ASVspoof 2019 LA, um trial por linha:

    <speaker> <utterance_id> <-> <attack_id|-> <bonafide|spoof>
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Union

from loguru import logger

from audio.io import AudioClip
from core.errors import ProtocolParseError

PathLike = Union[str, Path]


class Label(str, Enum):
    BONAFIDE = "bonafide"
    SPOOF = "spoof"

    @property
    def index(self) -> int:
        """Índice de classe usado pelos modelos (1 = bonafide)."""
        return 1 if self is Label.BONAFIDE else 0


class Split(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class TrialEntry:
    """Uma linha do protocolo."""
    utterance_id: str
    label: Label
    attack_id: Optional[str] = None
    split: Split = Split.TRAIN
    speaker_id: str = "-"

    def to_line(self) -> str:
        return f"{self.speaker_id} {self.utterance_id} - {self.attack_id or '-'} {self.label.value}"


@dataclass
class Dataset:
    """Entradas do protocolo + resolução utterance_id → AudioClip."""
    entries: List[TrialEntry]
    clip_resolver: Union[Dict[str, AudioClip], Callable[[str], AudioClip]] = field(default_factory=dict)

    def clip(self, utterance_id: str) -> AudioClip:
        if callable(self.clip_resolver):
            return self.clip_resolver(utterance_id)
        return self.clip_resolver[utterance_id]

    def counts(self, split: Optional[Split] = None) -> Dict[Label, int]:
        """Contagem bonafide/spoof (opcionalmente de um split)."""
        counter = Counter(e.label for e in self.entries if split is None or e.split == split)
        return {label: counter.get(label, 0) for label in Label}

    def __len__(self) -> int:
        return len(self.entries)


def parse_protocol_lines(lines: Iterable[str], split: Split, source: PathLike = "<text>") -> List[TrialEntry]:
    """Converter linhas de protocolo em TrialEntry."""
    entries = []
    for number, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 5:
            raise ProtocolParseError(source, number, f"{len(fields)} campos, esperados >= 5")
        try:
            label = Label(fields[-1])
        except ValueError:
            raise ProtocolParseError(source, number, f"rótulo desconhecido '{fields[-1]}'") from None

        attack = fields[3] if fields[3] != "-" else None
        entries.append(TrialEntry(
            utterance_id=fields[1],
            label=label,
            attack_id=attack,
            split=Split(split),
            speaker_id=fields[0],
        ))
    return entries


def parse_protocol(path: PathLike, split: Union[Split, str]) -> List[TrialEntry]:
    """Ler um arquivo de protocolo CM."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        entries = parse_protocol_lines(f, Split(split), source=path)

    counts = Counter(e.label for e in entries)
    logger.info(f"📋 {path.name}: {counts[Label.BONAFIDE]} bonafide + {counts[Label.SPOOF]} spoof")
    return entries


def format_protocol(entries: Iterable[TrialEntry]) -> str:
    """Serializar entradas no formato CM (inverso de parse_protocol)."""
    return "".join(entry.to_line() + "\n" for entry in entries)
