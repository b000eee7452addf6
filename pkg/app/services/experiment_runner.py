"""
Servicio de orquestación de experimentos completos

Corre las tablas de clasificación (difusión y red) y el experimento de
fracción de etiquetas a partir de una RunConfig, y escribe todas las salidas:
reportes JSON, resúmenes CSV/TSV, verificación de forma, PDF y figura.
"""
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence
import csv
import json
import logging
import time

import numpy as np

from app.exceptions import InvalidConfigError
from app.models.reports import EvalReport, FractionRow, ShapeCheck, SummaryRow
from app.models.specs import NetworkModel, PretrainSource
from app.services.experiment_harness import build_group, run_group_experiment, run_label_fraction_experiment
from app.services.synthetic_suite import TABLE_DIFFUSION, SyntheticSuite, build_synthetic_suite
from app.utils.files import atomic_write, provenance_path, write_text_atomic
from app.utils.formatters import format_duration, format_float
from app.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ('table', 'group', 'algo', 'macro_f1', 'n_seeds')
FRACTION_COLUMNS = ('group', 'pretrain_source', 'label_fraction', 'macro_f1', 'n_seeds')
# Forma cualitativa esperada de la curva F1 vs. fracción
STABLE_FRACTION = 0.2
DECLINE_FRACTION = 0.1
FULL_FRACTION = 1.0
STABLE_TOLERANCE = 0.10


def group_seed(master_seed: int, table: str, name: str) -> int:
    """Semilla de muestreo de un grupo sintético (compartida por todos los experimentos)"""
    return derive_seed(master_seed, f"group/{table}/{name}")


def run_tables(run_config, out_dir, pdf: bool = False) -> List[SummaryRow]:
    """
    Reproduce las tablas de clasificación de difusión y de red

    Args:
        run_config: RunConfig resuelta
        out_dir: Directorio de salida
        pdf: Si True, también escribe report.pdf

    Returns:
        Filas de summary.csv (media sobre repeticiones)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    experiment = run_config.experiment
    _log_banner('Tablas de clasificación', run_config)

    suite = build_synthetic_suite(
        run_config.network, run_config.diffusion, experiment.cascades_per_source, run_config.seed,
        experiment.networks, experiment.diffusions, run_config.threads,
    )
    specs = run_config.experiment_specs()

    all_rows: List[SummaryRow] = []
    for table in experiment.tables:
        reports_by_group: List[EvalReport] = []
        for name in suite.group_names(table):
            spec = suite.group_spec(table, name, experiment.per_class_count, group_seed(run_config.seed, table, name))
            group = build_group(spec, pools=suite.datasets)
            for repeat in range(experiment.repeats):
                reports = run_group_experiment(
                    group, experiment.algos, specs, run_config.seed, repeat, run_config.threads
                )
                for report in reports:
                    write_report_json(report, out_dir / 'reports' / table / f"{name}-{report.algo}-r{repeat}.json")
                reports_by_group.extend(reports)
        rows = summarize_reports(table, reports_by_group)
        write_summary_csv(rows, out_dir / f"table_{table}.csv")
        all_rows.extend(rows)

    write_summary_csv(all_rows, out_dir / 'summary.csv')
    write_text_atomic(provenance_path(out_dir), run_config.to_ini())
    if pdf:
        from app.services.report_pdf import write_report_pdf
        write_report_pdf(out_dir / 'report.pdf', summary_rows=all_rows, seed=run_config.seed)

    logger.info(f"Tablas completas en {format_duration(time.perf_counter() - started)}: {out_dir}")
    return all_rows


def run_label_fraction(run_config, out_dir, plot: bool = False, pdf: bool = False) -> List[FractionRow]:
    """
    Experimento de fracción de etiquetas para cada grupo y fuente de pre-entrenamiento

    Los grupos son de clasificación de difusión (una red fija). El conjunto
    externo sale de las redes de `external_networks` distintas de la del grupo.

    Returns:
        Filas de label_fraction.tsv (media sobre repeticiones)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    section = run_config.label_fraction
    experiment = run_config.experiment
    _log_banner('Experimento de fracción de etiquetas', run_config)

    group_networks = [NetworkModel(name) for name in section.groups]
    networks = [n for n in NetworkModel if n in group_networks or n in section.external_networks]
    suite = build_synthetic_suite(
        run_config.network, run_config.diffusion, experiment.cascades_per_source, run_config.seed,
        networks, experiment.diffusions, run_config.threads,
    )
    specs = run_config.experiment_specs()

    reports: List[EvalReport] = []
    for name in section.groups:
        spec = suite.group_spec(
            TABLE_DIFFUSION, name, experiment.per_class_count, group_seed(run_config.seed, TABLE_DIFFUSION, name)
        )
        group = build_group(spec, pools=suite.datasets)
        for source in section.pretrain_sources:
            for repeat in range(section.repeats):
                external = _external_pool(suite, run_config, name, source, repeat)
                source_reports = run_label_fraction_experiment(
                    group, section.fractions, source, external, specs, run_config.seed, repeat
                )
                for report in source_reports:
                    filename = f"{name}-{source.value}-f{report.label_fraction:g}-r{repeat}.json"
                    write_report_json(report, out_dir / 'reports' / filename)
                reports.extend(source_reports)

    rows = summarize_fractions(reports)
    checks = check_fraction_shape(rows)
    write_fraction_tsv(rows, out_dir / 'label_fraction.tsv')
    write_text_atomic(
        out_dir / 'shape_check.json',
        json.dumps([c.model_dump() for c in checks], indent=2) + '\n'
    )
    write_text_atomic(provenance_path(out_dir), run_config.to_ini())
    if plot:
        from app.services.figures import write_fraction_figure
        write_fraction_figure(rows, out_dir / 'label_fraction.png')
    if pdf:
        from app.services.report_pdf import write_report_pdf
        write_report_pdf(out_dir / 'report.pdf', fraction_rows=rows, shape_checks=checks, seed=run_config.seed)

    logger.info(f"Fracción de etiquetas completa en {format_duration(time.perf_counter() - started)}: {out_dir}")
    return rows


def _external_pool(suite: SyntheticSuite, run_config, group_name: str, source: PretrainSource, repeat: int):
    if source == PretrainSource.SELF_ONLY:
        return []
    section = run_config.label_fraction
    networks = [n for n in section.external_networks if n.value != group_name]
    if not networks:
        raise InvalidConfigError(
            f"el grupo {group_name} no tiene redes externas para pretrain_source={source.value}",
            field='external_networks'
        )
    seed = derive_seed(run_config.seed, f"external/{group_name}", repeat)
    return suite.external_pool(networks, section.external_count, seed)


def summarize_reports(table: str, reports: Iterable[EvalReport]) -> List[SummaryRow]:
    """Media del macro-F1 por (grupo, algoritmo), en orden de aparición"""
    scores: Dict[tuple, List[float]] = OrderedDict()
    for report in reports:
        scores.setdefault((report.group, report.algo), []).append(report.macro_f1)
    return [
        SummaryRow(table=table, group=group, algo=algo, macro_f1=float(np.mean(values)), n_seeds=len(values))
        for (group, algo), values in scores.items()
    ]


def summarize_fractions(reports: Iterable[EvalReport]) -> List[FractionRow]:
    """Media del macro-F1 por (grupo, fuente, fracción)"""
    scores: Dict[tuple, List[float]] = OrderedDict()
    for report in reports:
        key = (report.group, report.pretrain_source, report.label_fraction)
        scores.setdefault(key, []).append(report.macro_f1)
    rows = [
        FractionRow(group=group, pretrain_source=source, label_fraction=fraction,
                    macro_f1=float(np.mean(values)), n_seeds=len(values))
        for (group, source, fraction), values in scores.items()
    ]
    return sorted(rows, key=lambda r: (r.group, r.pretrain_source, r.label_fraction))


def check_fraction_shape(rows: Sequence[FractionRow]) -> List[ShapeCheck]:
    """
    Verifica la forma cualitativa de cada curva

    stable_at_20: |F1(20%) - F1(100%)| <= 0.10; decline_at_10: F1(10%) < F1(20%).
    Una verificación queda en None si falta alguna de sus fracciones. La curva
    se considera reproducida solo si ambas se cumplen.
    """
    curves: Dict[tuple, Dict[float, float]] = OrderedDict()
    for row in rows:
        curves.setdefault((row.group, row.pretrain_source), {})[row.label_fraction] = row.macro_f1

    checks = []
    for (group, source), f1 in curves.items():
        stable = _compare(f1, STABLE_FRACTION, FULL_FRACTION, lambda a, b: abs(a - b) <= STABLE_TOLERANCE)
        decline = _compare(f1, DECLINE_FRACTION, STABLE_FRACTION, lambda a, b: a < b)
        check = ShapeCheck(
            group=group,
            pretrain_source=source,
            f1_by_fraction={f"{fraction:g}": value for fraction, value in sorted(f1.items())},
            stable_at_20=stable,
            decline_at_10=decline,
            reproduced=bool(stable and decline),
        )
        if not check.reproduced:
            logger.warning(
                f"La curva de {group} ({source}) no reproduce la forma esperada: "
                f"estable en 20% = {stable}, cae en 10% = {decline}"
            )
        checks.append(check)
    return checks


def _compare(f1: Dict[float, float], a: float, b: float, predicate) -> Optional[bool]:
    if a not in f1 or b not in f1:
        return None
    return bool(predicate(f1[a], f1[b]))


def write_report_json(report: EvalReport, path) -> None:
    write_text_atomic(path, json.dumps(report.to_json_dict(), indent=2) + '\n')


def write_summary_csv(rows: Sequence[SummaryRow], path) -> None:
    """summary.csv: una fila por (grupo, algoritmo), sin tiempos de ejecución"""
    with atomic_write(path, newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([row.table, row.group, row.algo, format_float(row.macro_f1), row.n_seeds])
    logger.info(f"Resumen escrito en {path} ({len(rows)} filas)")


def write_fraction_tsv(rows: Sequence[FractionRow], path) -> None:
    with atomic_write(path, newline='') as handle:
        writer = csv.writer(handle, delimiter='\t', lineterminator='\n')
        writer.writerow(FRACTION_COLUMNS)
        for row in rows:
            writer.writerow([
                row.group, row.pretrain_source, format_float(row.label_fraction),
                format_float(row.macro_f1), row.n_seeds,
            ])
    logger.info(f"Tabla de fracciones escrita en {path} ({len(rows)} filas)")


def read_summary_csv(path) -> List[SummaryRow]:
    with open(path, newline='', encoding='utf-8') as handle:
        return [SummaryRow(**row) for row in csv.DictReader(handle)]


def _log_banner(title: str, run_config) -> None:
    logger.info("=" * 60)
    logger.info(title)
    logger.info(f"Preset: {run_config.run.preset} | semilla maestra: {run_config.seed} | hilos: {run_config.threads}")
    logger.info("=" * 60)
