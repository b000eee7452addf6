"""
Comandos de cascadas: simulate (difusión sobre una red) e import-paths (datos reales)
"""
import logging

import click

from app.commands import config_option, out_option, resolve_run_config, seed_option, write_provenance
from app.models.cascade import TIME_UNITS, TIME_UNIT_STEPS
from app.models.specs import DiffusionModel
from app.services.cascade_io import import_path_cascades, serialize_cascades
from app.services.diffusion_simulator import generate_dataset
from app.services.network_generator import read_network

logger = logging.getLogger(__name__)


@click.command('simulate')
@click.option('--net', 'net_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Red generada con gen-net')
@click.option('--model', type=click.Choice([m.value for m in DiffusionModel], case_sensitive=False),
              default=None, help='Modelo de difusión')
@click.option('--ic-p', type=float, default=None, help='IC: probabilidad por arista')
@click.option('--lt-threshold', type=float, default=None, help='LT: umbral de activación')
@click.option('--profile-q', type=float, default=None, help='Profile: probabilidad de adopción')
@click.option('--count', type=click.IntRange(min=1), required=True, help='Cascadas a generar')
@click.option('--min-size', type=int, default=None, help='Tamaño mínimo aceptado')
@click.option('--max-size', type=int, default=None, help='Tamaño máximo (se trunca)')
@seed_option
@out_option
@config_option
@click.pass_context
def simulate(ctx, net_path, model, count, seed, out_path, config_path, **diffusion):
    """Simula un dataset de cascadas sobre una red"""
    if model is not None:
        diffusion['model'] = model
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed}, diffusion=diffusion)

    net = read_network(net_path)
    cascades = generate_dataset(net, run_config.diffusion, count, run_config.threads)
    serialize_cascades(cascades, out_path, time_unit=TIME_UNIT_STEPS)
    write_provenance(out_path, run_config)
    click.echo(f"{len(cascades)} cascadas {run_config.diffusion.model.value} -> {out_path}", err=True)


@click.command('import-paths')
@click.option('--input', 'input_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Cascadas reales en formato de rutas (a/b/c:t)')
@click.option('--time-unit', type=click.Choice(TIME_UNITS), default='seconds', show_default=True)
@seed_option
@out_option
@config_option
@click.pass_context
def import_paths(ctx, input_path, time_unit, seed, out_path, config_path):
    """Convierte cascadas en formato de rutas al formato del laboratorio"""
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed})

    cascades = import_path_cascades(input_path, time_unit=time_unit)
    serialize_cascades(cascades, out_path, time_unit=time_unit)
    write_provenance(out_path, run_config)
    click.echo(f"{len(cascades)} cascadas importadas -> {out_path}", err=True)
