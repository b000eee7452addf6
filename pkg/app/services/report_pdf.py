"""
Servicio de generación de PDFs con las tablas de resultados
Una tabla por grupo de clasificación con el macro-F1 de cada algoritmo
"""
from collections import OrderedDict
from datetime import datetime
from io import BytesIO
from typing import Dict, List, Optional, Sequence
import logging

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from app.models.reports import FractionRow, ShapeCheck, SummaryRow
from app.utils.files import atomic_write
from app.utils.formatters import format_f1

logger = logging.getLogger(__name__)

TABLE_TITLES = {
    'diffusion': 'Clasificación de modelos de difusión (macro-F1)',
    'network': 'Clasificación de estructuras de red (macro-F1)',
}
ALGO_LABELS = OrderedDict([
    ('rf', 'Random Forest'),
    ('gbt', 'Gradient Boosting'),
    ('gcn', 'GCN'),
    ('contrastive', 'Contrastivo'),
])


class ResultsReportPDFGenerator:
    """Genera el PDF de resultados con el mismo estilo de tablas en toda la salida"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        self.h1_style = self.styles['Heading1']
        self.h2_style = self.styles['Heading2']
        self.normal_style = ParagraphStyle(
            name='Centrado',
            parent=self.styles['BodyText'],
            alignment=1
        )

    def generate_report(
        self,
        summary_rows: Sequence[SummaryRow] = (),
        fraction_rows: Sequence[FractionRow] = (),
        shape_checks: Sequence[ShapeCheck] = (),
        seed: Optional[int] = None,
    ) -> BytesIO:
        """
        Genera el PDF completo

        Args:
            summary_rows: Filas de las tablas de difusión y red
            fraction_rows: Filas del experimento de fracción de etiquetas
            shape_checks: Verificaciones de forma de la curva
            seed: Semilla maestra de la ejecución

        Returns:
            BytesIO con el PDF generado
        """
        buffer = BytesIO()
        doc = SimpleDocTemplate(
            buffer,
            pagesize=letter,
            leftMargin=30,
            rightMargin=30,
            topMargin=40,
            bottomMargin=40
        )

        elementos = [Paragraph('Laboratorio de clasificación de cascadas', self.h1_style)]
        elementos.append(Paragraph(
            f'Generado el: {datetime.now().strftime("%d/%m/%Y %H:%M")}',
            self.normal_style
        ))
        if seed is not None:
            elementos.append(Paragraph(f'Semilla maestra: {seed}', self.normal_style))
        elementos.append(Spacer(1, 20))

        for table, rows in self._rows_by_table(summary_rows).items():
            elementos.extend(self._create_summary_table(rows, TABLE_TITLES.get(table, table)))

        if fraction_rows:
            elementos.extend(self._create_fraction_table(fraction_rows))
        if shape_checks:
            elementos.extend(self._create_shape_table(shape_checks))

        doc.build(elementos)
        buffer.seek(0)
        return buffer

    @staticmethod
    def _rows_by_table(rows: Sequence[SummaryRow]) -> Dict[str, List[SummaryRow]]:
        grouped: Dict[str, List[SummaryRow]] = OrderedDict()
        for row in rows:
            grouped.setdefault(row.table, []).append(row)
        return grouped

    def _create_summary_table(self, rows: Sequence[SummaryRow], title: str) -> List:
        """Tabla grupo x algoritmo; el mejor F1 de cada fila va en negrita"""
        elementos = [Paragraph(title, self.h2_style)]

        algos = [a for a in ALGO_LABELS if any(r.algo == a for r in rows)]
        groups = list(OrderedDict.fromkeys(r.group for r in rows))
        values = {(r.group, r.algo): r.macro_f1 for r in rows}

        data = [['Grupo'] + [ALGO_LABELS[a] for a in algos]]
        bold_cells = []
        for i, group in enumerate(groups, start=1):
            scores = [values.get((group, a)) for a in algos]
            data.append([group] + [format_f1(s) if s is not None else '-' for s in scores])
            present = [s for s in scores if s is not None]
            if present:
                best = max(present)
                bold_cells.extend((j + 1, i) for j, s in enumerate(scores) if s == best)

        widths = [1.2 * inch] + [1.4 * inch] * len(algos)
        tabla = Table(data, hAlign='CENTER', colWidths=widths)
        style = [
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('BACKGROUND', (0, 0), (-1, 0), colors.lightblue),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
        ]
        style.extend(('FONTNAME', cell, cell, 'Helvetica-Bold') for cell in bold_cells)
        tabla.setStyle(TableStyle(style))

        elementos.append(tabla)
        elementos.append(Spacer(1, 20))
        return elementos

    def _create_fraction_table(self, rows: Sequence[FractionRow]) -> List:
        elementos = [Paragraph('Macro-F1 según la fracción de etiquetas', self.h2_style)]

        fractions = sorted({r.label_fraction for r in rows})
        series = list(OrderedDict.fromkeys((r.group, r.pretrain_source) for r in rows))
        values = {(r.group, r.pretrain_source, r.label_fraction): r.macro_f1 for r in rows}

        data = [['Grupo', 'Pre-entrenamiento'] + [f'{f:.0%}' for f in fractions]]
        for group, source in series:
            data.append([group, source] + [
                format_f1(values[(group, source, f)]) if (group, source, f) in values else '-'
                for f in fractions
            ])

        tabla = Table(data, hAlign='CENTER')
        tabla.setStyle(TableStyle([
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('BACKGROUND', (0, 0), (-1, 0), colors.lightgreen),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
        ]))
        elementos.append(tabla)
        elementos.append(Spacer(1, 20))
        return elementos

    def _create_shape_table(self, checks: Sequence[ShapeCheck]) -> List:
        elementos = [Paragraph('Forma de la curva', self.h2_style)]
        data = [['Grupo', 'Pre-entrenamiento', 'Estable en 20%', 'Cae en 10%', 'Reproducida']]
        for check in checks:
            data.append([
                check.group,
                check.pretrain_source,
                self._format_flag(check.stable_at_20),
                self._format_flag(check.decline_at_10),
                self._format_flag(check.reproduced),
            ])
        tabla = Table(data, hAlign='CENTER')
        tabla.setStyle(TableStyle([
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('BACKGROUND', (0, 0), (-1, 0), colors.lightyellow),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
        ]))
        elementos.append(tabla)
        return elementos

    @staticmethod
    def _format_flag(value) -> str:
        if value is None:
            return 'n/a'
        return 'sí' if value else 'no'


def write_report_pdf(path, **report_data) -> None:
    """Genera el PDF de resultados y lo escribe de forma atómica"""
    buffer = ResultsReportPDFGenerator().generate_report(**report_data)
    with atomic_write(path, mode='wb') as handle:
        handle.write(buffer.getvalue())
    logger.info(f"Reporte PDF escrito en {path}")
