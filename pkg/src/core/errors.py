"""
Erros do QV-Spoof
=================

Hierarquia única de exceções. Cada classe carrega o código de saída
que a CLI devolve ao sistema operacional:

- 2: erro de validação / contrato
- 3: erro de dados (arquivos, formatos, protocolos)
- 4: erro numérico interno
"""


class QVError(Exception):
    """Erro base da aplicação."""

    exit_code = 4


class ContractError(QVError):
    """Pré-condição violada por quem chamou a operação."""

    exit_code = 2


class ShapeError(ContractError):
    """Formas de tensores incompatíveis."""


class DegenerateBatchError(ContractError):
    """Batch sem elementos suficientes para estatísticas de treino."""


class DataError(QVError):
    """Entrada de dados inválida ou ausente."""

    exit_code = 3


class WavFormatError(DataError):
    """Cabeçalho RIFF/WAVE malformado."""

    def __init__(self, path, chunk: str, detail: str):
        super().__init__(f"{path}: chunk '{chunk}' inválido ({detail})")
        self.path = path
        self.chunk = chunk


class UnsupportedFormatError(DataError):
    """Codificação de áudio fora do suportado."""

    SUPPORTED = ("WAV PCM 16-bit", "WAV IEEE float 32-bit")

    def __init__(self, path, found: str):
        supported = ", ".join(self.SUPPORTED)
        super().__init__(f"{path}: formato '{found}' não suportado (suportados: {supported})")
        self.path = path
        self.found = found


class ProtocolParseError(DataError):
    """Linha inválida em um arquivo de protocolo ASVspoof."""

    def __init__(self, path, line_number: int, detail: str):
        super().__init__(f"{path}:{line_number}: {detail}")
        self.path = path
        self.line_number = line_number


class CacheFormatError(DataError):
    """Arquivo QVFC corrompido ou incompatível."""


class CheckpointFormatError(DataError):
    """Arquivo QVCK corrompido ou incompatível."""


class NumericError(QVError):
    """Valores não finitos durante treino ou pontuação."""

    exit_code = 4
