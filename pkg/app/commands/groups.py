"""
Comandos de datasets etiquetados: build-group y featurize
"""
from pathlib import Path
import logging

import click

from app.commands import config_option, out_option, resolve_run_config, seed_option, write_provenance
from app.models.specs import GroupSource, GroupSpec, build_model
from app.services.cascade_graph import build_graph
from app.services.cascade_io import parse_cascades, read_labels, serialize_cascades, write_labels
from app.services.graph_features import graph_features, write_feature_csv
from app.services.experiment_harness import build_group

logger = logging.getLogger(__name__)


def labels_path_for(cascades_path) -> Path:
    """Archivo lateral de etiquetas de un archivo de cascadas: <archivo>.labels.csv"""
    path = Path(cascades_path)
    return path.with_name(path.name + '.labels.csv')


def parse_source(value: str) -> GroupSource:
    """
    Convierte 'ARCHIVO:CLASE' en GroupSource (la clase va después del último ':')

    Raises:
        click.BadParameter: Si falta la clase
    """
    path, sep, class_name = value.rpartition(':')
    if not sep or not path or not class_name:
        raise click.BadParameter(f"se esperaba ARCHIVO:CLASE, se recibió '{value}'", param_hint='--source')
    if not Path(path).is_file():
        raise click.BadParameter(f"no existe el archivo {path}", param_hint='--source')
    return GroupSource(path=path, class_name=class_name)


@click.command('build-group')
@click.option('--source', 'sources', multiple=True, required=True,
              help='Fuente ARCHIVO:CLASE (repetir por clase)')
@click.option('--per-class', 'per_class_count', type=click.IntRange(min=1), default=None,
              help='Cascadas por clase')
@click.option('--total', 'total_count', type=click.IntRange(min=1), default=None,
              help='Total de cascadas (residuo repartido round-robin)')
@click.option('--name', default='group', show_default=True, help='Nombre del grupo')
@seed_option
@out_option
@config_option
@click.pass_context
def build_group_command(ctx, sources, per_class_count, total_count, name, seed, out_path, config_path):
    """Muestrea un grupo etiquetado a partir de varios archivos de cascadas"""
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed})
    spec = build_model(
        GroupSpec,
        name=name,
        sources=[parse_source(s) for s in sources],
        per_class_count=per_class_count,
        total_count=total_count,
        seed=run_config.seed,
    )
    group = build_group(spec)
    serialize_cascades(group.cascades, out_path)
    labels_path = labels_path_for(out_path)
    write_labels(((c.cascade_id, label.class_name) for c, label in zip(group.cascades, group.labels)), labels_path)
    write_provenance(out_path, run_config)
    click.echo(f"Grupo {name}: {group.size} cascadas -> {out_path} (+ {labels_path.name})", err=True)


@click.command('featurize')
@click.option('--cascades', 'cascades_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--labels', 'labels_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Etiquetas CSV (cascade_id,class_name)')
@out_option
@config_option
@click.pass_context
def featurize(ctx, cascades_path, labels_path, out_path, config_path):
    """Calcula los atributos estructurales de cada cascada dentro de la ventana"""
    run_config = resolve_run_config(ctx, config_path)
    cascades = parse_cascades(cascades_path)
    labels = read_labels(labels_path) if labels_path else {}

    rows = (
        (c.cascade_id, labels.get(c.cascade_id, ''), graph_features(build_graph(c, run_config.window)))
        for c in cascades
    )
    count = write_feature_csv(rows, out_path)
    write_provenance(out_path, run_config)
    click.echo(f"{count} filas de atributos -> {out_path}", err=True)
