"""
QV-Spoof - Orquestrador da Aplicação
====================================

Coordena os módulos do pipeline:
- Corpus sintético e extração de features
- Treino e avaliação dos classificadores
- Renderização das ondas de informação
- Varreduras da grade de experimentos

Toda saída é gravada uma única vez (use force para sobrescrever) e vem
acompanhada de um RunManifest JSON.
"""

import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from ai.factory import ARCH_LABELS, build_model
from ai.model_manager import ModelManager
from ai.qv_block import basis_waves, magnitude_square, superposed_stack
from ai.trainer import TrainHistory, train as train_model
from ai.wave_render import render_waves
from audio.io import read_wav, resample
from audio.protocol import Split, parse_protocol
from audio.synth import synth_dataset, write_dataset
from core import __version__
from core.config import Config, FeatureKind, ModelConfig, QVConfig, TrainConfig
from core.errors import ContractError, DataError
from engine.tensor import Tensor, no_grad, set_default_dtype
from evaluation.charts import render_sweep_charts
from evaluation.metrics import ScoreSet
from evaluation.report import (
    EvalReport,
    build_report,
    render_confusion,
    write_confusion_csv,
    write_report,
)
from features.cache import FeatureCache, missing_path, read_cache, write_cache
from features.spectral import extract

PROTOCOL_NAME = "protocol.txt"
SUMMARY_COLUMNS = ["features", "classifier", "batch", "epochs", "accuracy", "eer", "status"]


class RunManifest(BaseModel):
    """Registro reprodutível de uma execução."""
    command: str
    config: Dict[str, Any]
    seeds: Dict[str, int]
    inputs: List[str]
    outputs: List[str]
    version: str
    started_at: str
    finished_at: str = ""

    def write(self, path: Path):
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json")


def history_path(checkpoint: Path) -> Path:
    return checkpoint.with_name(checkpoint.stem + ".history.csv")


def report_sidecar(report: Path, suffix: str) -> Path:
    return report.with_name(report.stem + suffix)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def model_config_for(arch: str, in_channels: int, input_size: int, seed: int,
                     **overrides) -> ModelConfig:
    """ModelConfig de uma arquitetura com overrides opcionais (filters/depth vão para qv)."""
    qv_fields = {k: overrides.pop(k) for k in ("filters", "depth") if overrides.get(k) is not None}
    values = {k: v for k, v in overrides.items() if v is not None}
    if arch.startswith("qv_"):
        values["qv"] = QVConfig(in_channels=in_channels, **qv_fields)
    return ModelConfig(arch=arch, in_channels=in_channels, input_size=input_size, seed=seed, **values)


def claim_output(path: Path, force: bool):
    """Saídas são gravadas uma única vez, salvo com force."""
    if path.exists() and not force:
        raise ContractError(f"saída já existe: {path} (use --force para sobrescrever)")
    path.parent.mkdir(parents=True, exist_ok=True)


def _check_cache_geometry(cache: FeatureCache):
    h, w, _ = cache.image_shape
    if h != w:
        raise ContractError(f"features {h}x{w} não quadradas")


@dataclass
class SweepCell:
    """Uma célula da grade: features × arquitetura × batch."""
    features: str
    arch: str
    batch: int
    epochs: int
    seed: int
    train_cache: str
    eval_cache: str
    out_dir: str
    dtype: str
    model_overrides: Dict[str, Any]
    force: bool = False

    @property
    def tag(self) -> str:
        return f"{self.features}_{self.arch}_b{self.batch}"


def run_sweep_cell(cell: SweepCell) -> Dict[str, Any]:
    """Treinar e avaliar uma célula (executa em processo separado)."""
    row = {
        "features": cell.features,
        "classifier": ARCH_LABELS[cell.arch],
        "batch": cell.batch,
        "epochs": cell.epochs,
        "accuracy": "",
        "eer": "",
        "status": "ok",
    }
    try:
        with threadpool_limits(limits=1):
            set_default_dtype(cell.dtype)
            cache = read_cache(cell.train_cache)
            _check_cache_geometry(cache)
            h, _, c = cache.image_shape
            mcfg = model_config_for(cell.arch, c, h, cell.seed, **dict(cell.model_overrides))
            tcfg = TrainConfig(batch_size=cell.batch, epochs=cell.epochs, seed=cell.seed)
            model = build_model(mcfg)
            checkpoint = Path(cell.out_dir) / f"{cell.tag}.qvck"
            claim_output(checkpoint, cell.force)
            claim_output(history_path(checkpoint), cell.force)
            _, history = train_model(model, cache, tcfg, checkpoint,
                                     config={"model": mcfg.model_dump(mode="json"), "train": tcfg.model_dump()})
            history.to_csv(history_path(checkpoint))

            manager = ModelManager()
            manager.load(checkpoint)
            evaluation = read_cache(cell.eval_cache)
            images = evaluation.to_nchw()
            logits = manager.logits(images)
            scores = ScoreSet(scores=logits[:, 1] - logits[:, 0], labels=evaluation.labels)
            report = build_report(scores, logits)
            row["accuracy"] = f"{report.accuracy_argmax:.6f}"
            row["eer"] = f"{report.eer:.6f}"
    except Exception as e:  # célula com falha não interrompe a varredura
        logger.error(f"❌ célula {cell.tag}: {e}")
        row["status"] = f"erro: {type(e).__name__}: {e}"
    return row


class QVApp:
    """Classe principal do pipeline QV-Spoof."""

    def __init__(self, config: Config, log_to_file: bool = True):
        self.config = config
        self.log_to_file = log_to_file
        self.model_manager = ModelManager()
        self._setup_logging()
        set_default_dtype(config.runtime.dtype)

    def _setup_logging(self):
        """Configurar sistema de logging."""
        logger.remove()
        logger.add(
            sys.stderr,
            level=self.config.runtime.log_level,
            format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}",
        )
        if self.log_to_file:
            logger.add(self.config.get_log_path(), level="DEBUG", rotation="10 MB", encoding="utf-8")
        self.logger = logger

    # ----- utilitários -----

    def _manifest(self, command: str, seeds: Dict[str, int], inputs: Sequence[Path],
                  outputs: Sequence[Path]) -> RunManifest:
        return RunManifest(
            command=command,
            config=self.config.to_dict(),
            seeds=seeds,
            inputs=[str(p) for p in inputs],
            outputs=[str(p) for p in outputs],
            version=__version__,
            started_at=_now(),
        )

    @staticmethod
    def _finish(manifest: RunManifest, path: Path):
        manifest.finished_at = _now()
        manifest.write(path)

    # ----- comandos -----

    def synth(self, out_dir: Path, n_per_class: int, seed: int,
              eval_n_per_class: Optional[int] = None, force: bool = False) -> Dict[str, Path]:
        """Gerar o corpus sintético (split train e, opcionalmente, eval)."""
        out_dir = Path(out_dir)
        try:
            self.logger.info(f"🚀 Gerando corpus sintético em {out_dir}...")
            splits = {Split.TRAIN: n_per_class}
            if eval_n_per_class:
                splits[Split.EVAL] = eval_n_per_class

            protocols: Dict[str, Path] = {}
            for split in splits:
                claim_output(out_dir / split.value / PROTOCOL_NAME, force)
            manifest = self._manifest("synth", {"seed": seed}, [], [out_dir])
            for split, n in splits.items():
                dataset = synth_dataset(n, seed, split)
                protocols[split.value] = write_dataset(dataset, out_dir / split.value, PROTOCOL_NAME)

            self._finish(manifest, out_dir / "synth.manifest.json")
            self.logger.info("✅ Corpus sintético gerado")
            return protocols
        except Exception as e:
            self.logger.error(f"❌ Erro na geração do corpus: {e}")
            raise

    def extract(self, in_dir: Path, protocol: Path, kind: FeatureKind, out: Path,
                split: str = "train", force: bool = False, progress: bool = False) -> FeatureCache:
        """Extrair um cache QVFC com um registro por arquivo de áudio presente."""
        in_dir, protocol, out = Path(in_dir), Path(protocol), Path(out)
        try:
            self.logger.info(f"🚀 Extraindo features {kind} de {in_dir}...")
            if not protocol.exists():
                raise DataError(f"protocolo não encontrado: {protocol}")
            if not in_dir.is_dir():
                raise DataError(f"diretório de áudio não encontrado: {in_dir}")
            claim_output(out, force)
            entries = parse_protocol(protocol, split)

            present, missing = [], []
            for entry in entries:
                wav = in_dir / f"{entry.utterance_id}.wav"
                (present if wav.exists() else missing).append((entry, wav))
            if not present:
                raise DataError(f"nenhum arquivo do protocolo encontrado em {in_dir}")

            manifest = self._manifest("extract", {}, [in_dir, protocol], [out])
            cfg = self.config.features
            images, labels, ids = [], [], []
            for entry, wav in tqdm(present, desc=f"features {kind}", unit="clip", disable=not progress):
                clip = resample(read_wav(wav), cfg.sample_rate,
                                self.config.audio.taps_per_phase, self.config.audio.kaiser_beta)
                images.append(extract(clip, kind, cfg))
                labels.append(entry.label.index)
                ids.append(entry.utterance_id)

            cache = FeatureCache.from_images(images, labels, ids)
            write_cache(out, cache)
            sidecar = missing_path(out)
            if missing:
                self.logger.warning(f"⚠️ {len(missing)} arquivos ausentes listados em {sidecar.name}")
                sidecar.write_text("".join(f"{e.utterance_id}\t{p}\n" for e, p in missing), encoding="utf-8")
            elif sidecar.exists():
                sidecar.unlink()

            self._finish(manifest, manifest_path(out))
            self.logger.info(f"✅ {len(cache)} registros extraídos")
            return cache
        except Exception as e:
            self.logger.error(f"❌ Erro na extração: {e}")
            raise

    def train(self, cache_path: Path, out: Path, arch: str, train_cfg: TrainConfig,
              val_cache_path: Optional[Path] = None, force: bool = False, progress: bool = False,
              **model_overrides) -> TrainHistory:
        """Treinar um classificador; grava QVCK + histórico CSV + manifest."""
        cache_path, out = Path(cache_path), Path(out)
        try:
            self.logger.info(f"🚀 Treinando {ARCH_LABELS.get(arch, arch)}...")
            claim_output(out, force)
            cache = read_cache(cache_path)
            _check_cache_geometry(cache)
            h, _, c = cache.image_shape
            mcfg = model_config_for(arch, c, h, train_cfg.seed, **model_overrides)
            self.config = self.config.with_overrides("train", **train_cfg.model_dump())
            self.config.model = mcfg
            val_cache = read_cache(val_cache_path) if val_cache_path else None

            inputs = [cache_path] + ([Path(val_cache_path)] if val_cache_path else [])
            manifest = self._manifest("train", {"model": mcfg.seed, "train": train_cfg.seed}, inputs,
                                      [out, history_path(out)])
            model = build_model(mcfg)
            config = {"model": mcfg.model_dump(mode="json"), "train": train_cfg.model_dump()}
            _, history = train_model(model, cache, train_cfg, out, config, val_cache=val_cache, progress=progress)
            history.to_csv(history_path(out))

            self._finish(manifest, manifest_path(out))
            self.logger.info(f"✅ Checkpoint gravado em {out}")
            return history
        except Exception as e:
            self.logger.error(f"❌ Erro no treino: {e}")
            raise

    def evaluate(self, cache_path: Path, checkpoint: Path, out: Path, force: bool = False) -> EvalReport:
        """Pontuar o cache e gravar relatório JSON + confusão CSV/PNG + scores."""
        cache_path, checkpoint, out = Path(cache_path), Path(checkpoint), Path(out)
        try:
            self.logger.info(f"🚀 Avaliando {checkpoint.name} em {cache_path.name}...")
            claim_output(out, force)
            cache = read_cache(cache_path)
            self.model_manager.load(checkpoint)
            images = cache.to_nchw()
            logits = self.model_manager.logits(images)

            scores = ScoreSet(scores=logits[:, 1] - logits[:, 0], labels=cache.labels, ids=cache.ids)
            report = build_report(scores, logits)
            outputs = [out, report_sidecar(out, ".confusion.csv"), report_sidecar(out, ".confusion.png"),
                       report_sidecar(out, ".scores.txt")]
            manifest = self._manifest("eval", {}, [cache_path, checkpoint], outputs)

            write_report(report, out)
            write_confusion_csv(report.confusion, outputs[1])
            render_confusion(report.confusion, outputs[2])
            outputs[3].write_text(
                "".join(f"{i} {s:.9g} {'bonafide' if y == 1 else 'spoof'}\n"
                        for i, s, y in zip(scores.ids, scores.scores, scores.labels)),
                encoding="utf-8",
            )
            self._finish(manifest, manifest_path(out))
            self.logger.info(f"✅ EER {report.eer:.4f}, acurácia {report.accuracy_argmax:.4f}")
            return report
        except Exception as e:
            self.logger.error(f"❌ Erro na avaliação: {e}")
            raise
        finally:
            self.model_manager.cleanup()

    def waves(self, wav: Path, kind: FeatureKind, out_dir: Path, squared: bool = False,
              checkpoint: Optional[Path] = None, limit: int = 16, force: bool = False) -> List[Path]:
        """Renderizar os mapas base (ou as saídas do bloco QV treinado) de um clip."""
        wav, out_dir = Path(wav), Path(out_dir)
        try:
            self.logger.info(f"🚀 Renderizando ondas de {wav.name}...")
            if out_dir.exists() and any(out_dir.iterdir()) and not force:
                raise ContractError(f"diretório de saída não vazio: {out_dir} (use --force)")
            cfg = self.config.features
            clip = resample(read_wav(wav), cfg.sample_rate,
                            self.config.audio.taps_per_phase, self.config.audio.kaiser_beta)
            image = extract(clip, kind, cfg)
            x = Tensor(image.to_chw()[np.newaxis])

            inputs = [wav] + ([Path(checkpoint)] if checkpoint else [])
            manifest = self._manifest("waves", {}, inputs, [out_dir])
            with no_grad():
                if checkpoint is None:
                    stack = basis_waves(x, QVConfig(in_channels=image.channels))
                    if squared:
                        stack = magnitude_square(stack)
                    written = render_waves(stack, out_dir)
                else:
                    model = self.model_manager.load(checkpoint)
                    if getattr(model, "qv", None) is None:
                        raise ContractError(f"checkpoint {checkpoint.name} não tem bloco QV")
                    self.model_manager.check_input(x.data)
                    written = render_waves(superposed_stack(model.qv(x)), out_dir, limit=limit)

            self._finish(manifest, out_dir / "waves.manifest.json")
            return written
        except Exception as e:
            self.logger.error(f"❌ Erro na renderização: {e}")
            raise
        finally:
            self.model_manager.cleanup()

    def sweep(self, caches: Dict[str, Path], archs: Sequence[str], batches: Sequence[int], epochs: int,
              out_dir: Path, seed: int = 0, eval_caches: Optional[Dict[str, Path]] = None,
              force: bool = False, **model_overrides) -> List[Dict[str, Any]]:
        """Executar a grade features × arquitetura × batch; grava summary.csv."""
        out_dir = Path(out_dir)
        summary = out_dir / "summary.csv"
        try:
            self.logger.info(f"🚀 Varredura: {len(caches)} features × {len(archs)} arqs × {len(batches)} batches")
            if not caches or not archs or not batches:
                raise ContractError("grade vazia")
            if epochs < 1:
                raise ContractError("epochs deve ser >= 1")
            claim_output(summary, force)
            eval_caches = eval_caches or {}

            cells = [
                SweepCell(
                    features=kind, arch=arch, batch=batch, epochs=epochs, seed=seed,
                    train_cache=str(path), eval_cache=str(eval_caches.get(kind, path)),
                    out_dir=str(out_dir), dtype=self.config.runtime.dtype,
                    model_overrides=dict(model_overrides), force=force,
                )
                for kind, path in caches.items() for arch in archs for batch in batches
            ]
            inputs = list(caches.values()) + list(eval_caches.values())
            manifest = self._manifest("sweep", {"seed": seed}, inputs, [summary])

            workers = min(self.config.runtime.threads, len(cells))
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    rows = list(tqdm(pool.map(run_sweep_cell, cells), total=len(cells), desc="varredura"))
            else:
                rows = [run_sweep_cell(cell) for cell in cells]

            with summary.open("w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
                writer.writeheader()
                writer.writerows(rows)
            charts = render_sweep_charts(rows, out_dir)
            manifest.outputs.extend(str(p) for p in charts)
            self._finish(manifest, manifest_path(summary))

            failed = sum(1 for r in rows if r["status"] != "ok")
            if failed:
                self.logger.warning(f"⚠️ {failed} de {len(rows)} células falharam")
            self.logger.info(f"✅ Resumo gravado em {summary}")
            return rows
        except Exception as e:
            self.logger.error(f"❌ Erro na varredura: {e}")
            raise

    def shutdown(self):
        """Encerrar aplicação graciosamente."""
        self.logger.info("🔄 Encerrando QV-Spoof...")
        self.model_manager.cleanup()
        self.logger.info("✅ QV-Spoof encerrado")

