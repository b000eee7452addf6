"""
Comandos de la CLI (un módulo por etapa del pipeline)
"""
from pathlib import Path
import logging

import click

from app.config import load_run_config
from app.utils.files import provenance_path, write_text_atomic

logger = logging.getLogger(__name__)

config_option = click.option(
    '--config', 'config_path',
    type=click.Path(exists=True, dir_okay=False),
    help='Archivo de configuración INI (los flags tienen prioridad)'
)
seed_option = click.option(
    '--seed', type=click.IntRange(min=0), default=None,
    help='Semilla (por defecto la del archivo o CASCADELAB_SEED)'
)
out_option = click.option(
    '--out', 'out_path', type=click.Path(dir_okay=False), required=True,
    help='Archivo de salida'
)


def resolve_run_config(ctx: click.Context, config_path=None, **sections):
    """
    Resuelve la RunConfig del comando actual

    Args:
        ctx: Contexto de click (lleva --threads y los argumentos originales)
        config_path: Archivo INI opcional
        sections: Valores de flags por sección, ej: network={'node_count': 200}

    Returns:
        RunConfig
    """
    obj = ctx.find_root().obj or {}
    run = dict(sections.pop('run', {}))
    run.update(threads=obj.get('threads'), command=ctx.command_path, arguments=obj.get('arguments'))
    if obj.get('arguments'):
        logger.info(f"Ejecutando: {obj['arguments']}")
    sections['run'] = run
    return load_run_config(config_path, overrides=sections)


def write_provenance(output, run_config) -> Path:
    """Guarda la configuración resuelta junto a la salida"""
    path = provenance_path(output)
    write_text_atomic(path, run_config.to_ini())
    logger.debug(f"Configuración resuelta guardada en {path}")
    return path
