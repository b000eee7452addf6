"""
Comandos de modelos: train (guarda un modelo) y eval (reporte JSON)
"""
from pathlib import Path
import logging

import click

from app.commands import config_option, out_option, resolve_run_config, seed_option, write_provenance
from app.models.specs import Algorithm, ObservationWindow, PretrainSource, build_model
from app.services.cascade_graph import build_graph
from app.services.cascade_io import parse_cascades, read_labels
from app.services.experiment_harness import (
    PreparedSplit, algorithm_seed, evaluate_model, holdout_split, labeled_dataset, train_model,
)
from app.services.experiment_runner import write_report_json
from app.services.model_store import load_model, save_model

logger = logging.getLogger(__name__)


@click.command('train')
@click.option('--cascades', 'cascades_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--labels', 'labels_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--algo', type=click.Choice([a.value for a in Algorithm], case_sensitive=False), required=True)
@click.option('--unlabeled', 'unlabeled_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Cascadas externas sin etiquetar (contrastivo)')
@click.option('--pretrain-source', type=click.Choice([s.value for s in PretrainSource]),
              default=PretrainSource.SELF_ONLY.value, show_default=True)
@seed_option
@out_option
@config_option
@click.pass_context
def train(ctx, cascades_path, labels_path, algo, unlabeled_path, pretrain_source, seed, out_path, config_path):
    """Entrena un clasificador; la validación sale del propio archivo etiquetado"""
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed})
    algo = Algorithm(algo)
    dataset = labeled_dataset(Path(cascades_path).stem, parse_cascades(cascades_path), read_labels(labels_path))
    train_part, val_part = holdout_split(dataset, run_config.split.val_fraction, run_config.seed)
    window = run_config.window
    data = PreparedSplit(train_part.graphs(window), val_part.graphs(window), [], dataset.class_names)
    external = [build_graph(c, window) for c in parse_cascades(unlabeled_path)] if unlabeled_path else []

    algo_seed = algorithm_seed(run_config.seed, dataset.name, algo)
    specs = run_config.experiment_specs().seeded(algo, algo_seed)
    model = train_model(algo, data, specs, run_config.threads, external, pretrain_source)
    save_model(model, out_path, dataset.class_names, extra={
        'window': window.model_dump(),
        'seed': algo_seed,
        'train_ids': train_part.cascade_ids,
        'validation_ids': val_part.cascade_ids,
    })
    write_provenance(out_path, run_config)
    click.echo(f"Modelo {algo.value} ({train_part.size} entrenamiento, {val_part.size} validación) -> {out_path}",
               err=True)


@click.command('eval')
@click.option('--model', 'model_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--cascades', 'cascades_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--labels', 'labels_path', type=click.Path(exists=True, dir_okay=False), required=True)
@out_option
@config_option
@click.pass_context
def evaluate(ctx, model_path, cascades_path, labels_path, out_path, config_path):
    """Evalúa un modelo guardado y escribe el reporte JSON de F1 macro"""
    run_config = resolve_run_config(ctx, config_path)
    stored = load_model(model_path)
    header = stored.header
    window = build_model(ObservationWindow, **header['window']) if 'window' in header else run_config.window

    dataset = labeled_dataset(
        Path(cascades_path).stem, parse_cascades(cascades_path), read_labels(labels_path), stored.classes
    )
    trained_on = set(header.get('train_ids', [])) | set(header.get('validation_ids', []))
    overlap = trained_on.intersection(dataset.cascade_ids)
    if overlap:
        logger.warning(f"{len(overlap)} cascadas de evaluación se usaron en el entrenamiento")

    report = evaluate_model(
        stored.model, dataset.graphs(window), stored.classes, window,
        group=dataset.name, algo=header['algo'], seed=header.get('seed', 0),
    )
    write_report_json(report, out_path)
    write_provenance(out_path, run_config)
    click.echo(f"macro-F1 = {report.macro_f1:.4f} -> {out_path}", err=True)
