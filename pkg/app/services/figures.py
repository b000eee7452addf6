"""
Figuras de resultados (matplotlib sin display)
"""
from collections import OrderedDict
from io import BytesIO
from pathlib import Path
from typing import Sequence
import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from app.models.reports import FractionRow  # noqa: E402
from app.utils.files import atomic_write  # noqa: E402

logger = logging.getLogger(__name__)

SOURCE_STYLES = {
    'self_only': ('o-', 'tab:blue'),
    'mixed': ('s--', 'tab:orange'),
    'external_only': ('^:', 'tab:green'),
}


def fraction_figure(rows: Sequence[FractionRow], title: str = 'Macro-F1 vs. fracción de etiquetas'):
    """
    Curvas de macro-F1 por fracción, una por (grupo, fuente de pre-entrenamiento)

    Returns:
        matplotlib.figure.Figure
    """
    series = OrderedDict()
    for row in sorted(rows, key=lambda r: r.label_fraction):
        series.setdefault((row.group, row.pretrain_source), []).append(row)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for (group, source), points in series.items():
        marker, color = SOURCE_STYLES.get(source, ('o-', None))
        ax.plot(
            [p.label_fraction * 100 for p in points],
            [p.macro_f1 for p in points],
            marker, color=color, label=f'{group} ({source})',
        )
    ax.set_xlabel('Etiquetas de entrenamiento (%)')
    ax.set_ylabel('Macro-F1')
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def write_fraction_figure(rows: Sequence[FractionRow], path) -> None:
    """Guarda la figura de fracción de etiquetas (formato según la extensión)"""
    fig = fraction_figure(rows)
    buffer = BytesIO()
    try:
        fmt = Path(path).suffix.lstrip('.') or 'png'
        fig.savefig(buffer, format=fmt, dpi=150)
    finally:
        plt.close(fig)
    with atomic_write(path, mode='wb') as handle:
        handle.write(buffer.getvalue())
    logger.info(f"Figura escrita en {path}")
