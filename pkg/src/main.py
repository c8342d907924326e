"""
QV-Spoof - Ponto de Entrada Principal
=====================================

CLI do pipeline: synth, extract, train, eval, waves e sweep.

Códigos de saída: 0 sucesso, 2 validação, 3 dados, 4 erro numérico/interno.
"""

import functools
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

# Adicionar src ao path para imports absolutos
sys.path.insert(0, str(Path(__file__).parent))

import click  # noqa: E402
from pydantic import ValidationError  # noqa: E402
from rich.console import Console  # noqa: E402
from rich.table import Table  # noqa: E402

from core.application import QVApp  # noqa: E402
from core.config import Config, TrainConfig  # noqa: E402
from core.errors import ContractError, QVError  # noqa: E402

FEATURES = ["stft", "mel", "mfcc"]
ARCHS = {"cnn": "cnn", "qv-cnn": "qv_cnn", "vit": "vit", "qv-vit": "qv_vit"}

console = Console(stderr=True)


def normalize_arch(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in ARCHS:
        raise ContractError(f"arquitetura desconhecida '{name}' (opções: {', '.join(ARCHS)})")
    return ARCHS[key]


def parse_int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ContractError(f"lista de inteiros inválida: '{text}'") from None
    if not values or min(values) < 1:
        raise ContractError(f"lista deve conter inteiros >= 1: '{text}'")
    return values


def parse_grid(grid: str) -> Tuple[List[str], List[int]]:
    """'cnn,qv-cnn x 8,16' → (['cnn', 'qv_cnn'], [8, 16])."""
    parts = re.split(r"\s*[x×]\s*", grid.strip())
    if len(parts) != 2:
        raise ContractError(f"grade inválida '{grid}' (formato: arqs×batches)")
    return [normalize_arch(a) for a in parts[0].split(",") if a.strip()], parse_int_list(parts[1])


def parse_caches(values: Tuple[str, ...]) -> Dict[str, Path]:
    """'mel=path' ou 'path' (tipo inferido do nome do arquivo)."""
    caches: Dict[str, Path] = {}
    for value in values:
        if "=" in value:
            kind, path = value.split("=", 1)
        else:
            path = value
            stem = Path(value).stem
            kind = stem if stem in FEATURES else "features"
        if kind in caches:
            raise ContractError(f"cache repetido para '{kind}'")
        caches[kind] = Path(path)
    return caches


def handled(command):
    """Traduzir exceções em códigos de saída."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except QVError as e:
            console.print(f"[red]❌ {e}[/red]")
            raise SystemExit(e.exit_code)
        except ValidationError as e:
            console.print(f"[red]❌ configuração inválida:[/red] {e}")
            raise SystemExit(2)
        except (click.exceptions.Exit, click.ClickException, SystemExit):
            raise
        except Exception as e:
            console.print(f"[red]❌ erro interno: {type(e).__name__}: {e}[/red]")
            raise SystemExit(4)

    return wrapper


def model_options(command):
    """Overrides de arquitetura para experimentos em escala de bancada."""
    options = [
        click.option("--filters", type=click.IntRange(min=1), default=None, help="Mapas de saída do bloco QV"),
        click.option("--depth", type=click.Choice(["1", "3"]), default=None, help="Estágios conv por ramo QV"),
        click.option("--token-mode", type=click.Choice(["patch", "channel"]), default=None),
        click.option("--vit-layers", type=click.IntRange(min=1), default=None),
        click.option("--vit-heads", type=click.IntRange(min=1), default=None),
        click.option("--vit-dim", type=click.IntRange(min=1), default=None, help="Dimensão do embedding"),
        click.option("--vit-mlp", type=click.IntRange(min=1), default=None, help="Dimensão interna do MLP"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def collect_overrides(filters, depth, token_mode, vit_layers, vit_heads, vit_dim, vit_mlp) -> Dict:
    return {
        "filters": filters,
        "depth": int(depth) if depth else None,
        "token_mode": token_mode,
        "vit_layers": vit_layers,
        "vit_heads": vit_heads,
        "vit_embed_dim": vit_dim,
        "vit_mlp_dim": vit_mlp,
    }


def app_from(ctx: click.Context) -> QVApp:
    if ctx.obj is None:
        params = ctx.find_root().params
        config = Config.from_env()
        runtime = {k: v for k, v in (("log_level", params.get("log_level")),
                                     ("dtype", params.get("dtype")),
                                     ("threads", params.get("threads"))) if v is not None}
        if runtime:
            config = config.with_overrides("runtime", **runtime)
        ctx.obj = QVApp(config, log_to_file=not params.get("no_log_file", False))
        ctx.find_root().call_on_close(ctx.obj.shutdown)
    return ctx.obj


@click.group()
@click.option("--log-level", default=None, help="Nível de log (padrão: QV_LOG_LEVEL ou INFO)")
@click.option("--dtype", type=click.Choice(["float32", "float64"]), default=None)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Células paralelas na varredura")
@click.option("--no-log-file", is_flag=True, help="Não gravar logs/qv.log")
@click.pass_context
def cli(ctx, log_level, dtype, threads, no_log_file):
    """QV-Spoof: detecção de áudio falsificado com Quantum Vision."""
    ctx.obj = None


@cli.command()
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--n-per-class", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--eval-n-per-class", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--force", is_flag=True)
@click.pass_context
@handled
def synth(ctx, out_dir, n_per_class, eval_n_per_class, seed, force):
    """Gerar o corpus sintético bonafide/spoof."""
    protocols = app_from(ctx).synth(out_dir, n_per_class, seed, eval_n_per_class or None, force)
    for split, path in protocols.items():
        click.echo(f"{split}\t{path}")


@cli.command()
@click.option("--in", "in_dir", type=click.Path(path_type=Path), required=True)
@click.option("--protocol", type=click.Path(path_type=Path), required=True)
@click.option("--features", type=click.Choice(FEATURES), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--split", type=click.Choice(["train", "eval"]), default="train", show_default=True)
@click.option("--force", is_flag=True)
@click.pass_context
@handled
def extract(ctx, in_dir, protocol, features, out, split, force):
    """Extrair um cache de features QVFC."""
    cache = app_from(ctx).extract(in_dir, protocol, features, out, split, force, progress=True)
    click.echo(f"{len(cache)} registros {tuple(cache.image_shape)} → {out}")


@cli.command()
@click.option("--cache", type=click.Path(path_type=Path), required=True)
@click.option("--arch", required=True, help="cnn | qv-cnn | vit | qv-vit")
@click.option("--batch", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--epochs", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lr", type=click.FloatRange(min=0), default=1e-4, show_default=True)
@click.option("--class-weighting", is_flag=True, help="Pesos inversos à frequência das classes")
@click.option("--val-cache", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--force", is_flag=True)
@model_options
@click.pass_context
@handled
def train(ctx, cache, arch, batch, epochs, seed, lr, class_weighting, val_cache, out, force, **model):
    """Treinar um classificador e gravar o checkpoint QVCK."""
    tcfg = TrainConfig(batch_size=batch, epochs=epochs, lr=lr, seed=seed, class_weighting=class_weighting)
    history = app_from(ctx).train(cache, out, normalize_arch(arch), tcfg, val_cache, force,
                                  progress=True, **collect_overrides(**model))
    last = history.records[-1]
    click.echo(f"{len(history)} épocas, loss final {last.loss:.4f}, acc {last.acc:.4f} → {out}")


@cli.command(name="eval")
@click.option("--cache", type=click.Path(path_type=Path), required=True)
@click.option("--ckpt", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--force", is_flag=True)
@click.pass_context
@handled
def evaluate(ctx, cache, ckpt, out, force):
    """Avaliar um checkpoint: relatório JSON + matriz de confusão."""
    report = app_from(ctx).evaluate(cache, ckpt, out, force)
    table = Table(title="📊 Avaliação")
    table.add_column("métrica")
    table.add_column("valor", justify="right")
    table.add_row("acurácia (argmax)", f"{report.accuracy_argmax:.4f}")
    table.add_row("acurácia (limiar EER)", f"{report.accuracy_at_eer:.4f}")
    table.add_row("EER", f"{report.eer:.4f}")
    table.add_row("limiar EER", f"{report.eer_threshold:.6g}")
    table.add_row("bonafide / spoof", f"{report.n_bonafide} / {report.n_spoof}")
    Console().print(table)


@cli.command()
@click.option("--in", "wav", type=click.Path(path_type=Path), required=True)
@click.option("--features", type=click.Choice(FEATURES), default="mel", show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--squared", is_flag=True, help="Renderizar |ψ|²")
@click.option("--ckpt", type=click.Path(path_type=Path), default=None, help="Saídas do bloco QV treinado")
@click.option("--limit", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--force", is_flag=True)
@click.pass_context
@handled
def waves(ctx, wav, features, out_dir, squared, ckpt, limit, force):
    """Renderizar mapas de onda de um clip como PGM."""
    written = app_from(ctx).waves(wav, features, out_dir, squared, ckpt, limit, force)
    click.echo(f"{len(written)} mapas → {out_dir}")


@cli.command()
@click.option("--cache", "caches", multiple=True, required=True, help="[tipo=]caminho (repetível)")
@click.option("--eval-cache", "eval_caches", multiple=True, help="[tipo=]caminho do conjunto de avaliação")
@click.option("--grid", default=None, help="arqs×batches, ex.: 'cnn,qv-cnn x 8,16'")
@click.option("--archs", default="cnn,qv-cnn,vit,qv-vit", show_default=True)
@click.option("--batches", default="8,16,32,64", show_default=True)
@click.option("--epochs", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--force", is_flag=True)
@model_options
@click.pass_context
@handled
def sweep(ctx, caches, eval_caches, grid, archs, batches, epochs, seed, out_dir, force, **model):
    """Executar a grade de experimentos e gravar summary.csv."""
    if grid:
        arch_list, batch_list = parse_grid(grid)
    else:
        arch_list = [normalize_arch(a) for a in archs.split(",") if a.strip()]
        batch_list = parse_int_list(batches)

    rows = app_from(ctx).sweep(parse_caches(caches), arch_list, batch_list, epochs, out_dir, seed,
                               parse_caches(eval_caches) or None, force, **collect_overrides(**model))
    table = Table(title="🧪 Varredura")
    for column in ("features", "classifier", "batch", "accuracy", "eer", "status"):
        table.add_column(column)
    for row in rows:
        table.add_row(*(str(row[c]) for c in ("features", "classifier", "batch", "accuracy", "eer", "status")))
    Console().print(table)


def main(argv: Optional[List[str]] = None):
    """Função principal da aplicação."""
    cli.main(args=argv, prog_name="qv-spoof")


if __name__ == "__main__":
    main()
