"""
Gráficos da Varredura
=====================

Figuras PNG gravadas ao lado de summary.csv:
- `accuracy_<features>.png` e `eer_<features>.png`: barras por batch,
  uma cor por classificador
- `batch_size.png`: acurácia em função do batch, uma linha por
  features × classificador

Células com falha (acurácia vazia) ficam de fora.
"""

from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Union

from loguru import logger
from PIL import Image, ImageDraw

from core.errors import DataError

CHART_SIZE = (640, 400)
PALETTE = [(31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189), (140, 86, 75)]
MARGIN = (56, 36, 150, 44)  # esquerda, topo, direita, base
PathLike = Union[str, Path]


def _series(rows: Sequence[Mapping[str, Any]], metric: str) -> "OrderedDict[Tuple[str, str, int], float]":
    values: "OrderedDict[Tuple[str, str, int], float]" = OrderedDict()
    for row in rows:
        if row.get("status", "ok") != "ok" or row.get(metric) in ("", None):
            continue
        values[(str(row["features"]), str(row["classifier"]), int(row["batch"]))] = float(row[metric])
    return values


class _Canvas:
    """Área de plotagem com eixo y em [0, 1]."""

    def __init__(self, title: str):
        self.image = Image.new("RGB", CHART_SIZE, "white")
        self.draw = ImageDraw.Draw(self.image)
        left, top, right, bottom = MARGIN
        self.x0, self.y0 = left, top
        self.x1, self.y1 = CHART_SIZE[0] - right, CHART_SIZE[1] - bottom
        self.draw.text((left, 10), title, fill="black")
        self.draw.rectangle([self.x0, self.y0, self.x1, self.y1], outline="black")
        for tick in range(0, 11, 2):
            y = self.y_of(tick / 10)
            self.draw.line([self.x0 - 4, y, self.x0, y], fill="black")
            self.draw.text((8, y - 6), f"{tick / 10:.1f}", fill="black")

    def y_of(self, value: float) -> int:
        value = min(max(value, 0.0), 1.0)
        return int(round(self.y1 - value * (self.y1 - self.y0)))

    def legend(self, entries: Sequence[Tuple[str, Tuple[int, int, int]]]):
        x = self.x1 + 12
        for i, (label, color) in enumerate(entries):
            y = self.y0 + 4 + 16 * i
            self.draw.rectangle([x, y, x + 10, y + 10], fill=color)
            self.draw.text((x + 16, y - 1), label[:20], fill="black")

    def save(self, path: Path):
        try:
            self.image.save(path, format="PNG")
        except OSError as e:
            raise DataError(f"falha ao gravar {path}: {e}") from e
        logger.debug(f"🖼️ gráfico gravado em {path}")


def render_bars(values: Mapping[Tuple[str, int], float], title: str, path: PathLike):
    """Barras agrupadas por batch: {(classificador, batch): valor em [0, 1]}."""
    classifiers = list(OrderedDict.fromkeys(c for c, _ in values))
    batches = sorted({b for _, b in values})
    canvas = _Canvas(title)
    group_width = (canvas.x1 - canvas.x0) / max(len(batches), 1)
    bar_width = group_width * 0.8 / max(len(classifiers), 1)

    for g, batch in enumerate(batches):
        gx = canvas.x0 + g * group_width + group_width * 0.1
        for k, classifier in enumerate(classifiers):
            value = values.get((classifier, batch))
            if value is None:
                continue
            x = gx + k * bar_width
            canvas.draw.rectangle([int(x), canvas.y_of(value), int(x + bar_width) - 1, canvas.y1],
                                  fill=PALETTE[k % len(PALETTE)], outline="black")
        canvas.draw.text((int(gx + group_width * 0.3), canvas.y1 + 8), f"b={batch}", fill="black")

    canvas.legend([(c, PALETTE[k % len(PALETTE)]) for k, c in enumerate(classifiers)])
    canvas.save(Path(path))


def render_lines(values: Mapping[Tuple[str, int], float], title: str, path: PathLike):
    """Uma linha por série: {(série, batch): valor em [0, 1]}, batches igualmente espaçados."""
    series = list(OrderedDict.fromkeys(s for s, _ in values))
    batches = sorted({b for _, b in values})
    canvas = _Canvas(title)
    step = (canvas.x1 - canvas.x0) / (len(batches) + 1)
    x_of = {b: int(round(canvas.x0 + (i + 1) * step)) for i, b in enumerate(batches)}
    for batch, x in x_of.items():
        canvas.draw.text((x - 12, canvas.y1 + 8), f"b={batch}", fill="black")

    colors = []
    for k, name in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        points = [(x_of[b], canvas.y_of(values[(name, b)])) for b in batches if (name, b) in values]
        if len(points) > 1:
            canvas.draw.line(points, fill=color, width=2)
        for x, y in points:
            canvas.draw.ellipse([x - 3, y - 3, x + 3, y + 3], fill=color)
        colors.append((name, color))

    canvas.legend(colors)
    canvas.save(Path(path))


def render_sweep_charts(rows: Sequence[Mapping[str, Any]], out_dir: PathLike) -> List[Path]:
    """Gráficos de acurácia/EER por features e acurácia × batch; devolve os caminhos gravados."""
    out_dir = Path(out_dir)
    accuracy, eer = _series(rows, "accuracy"), _series(rows, "eer")
    if not accuracy:
        logger.warning("⚠️ nenhuma célula concluída, gráficos não gerados")
        return []

    written: List[Path] = []
    for kind in OrderedDict.fromkeys(f for f, _, _ in accuracy):
        for metric, values in (("accuracy", accuracy), ("eer", eer)):
            subset: Dict[Tuple[str, int], float] = {
                (c, b): v for (f, c, b), v in values.items() if f == kind
            }
            path = out_dir / f"{metric}_{kind}.png"
            render_bars(subset, f"{metric.upper()} - {kind}", path)
            written.append(path)

    by_batch = {(f"{f}/{c}", b): v for (f, c, b), v in accuracy.items()}
    path = out_dir / "batch_size.png"
    render_lines(by_batch, "ACCURACY x batch", path)
    written.append(path)
    return written
