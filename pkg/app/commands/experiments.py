"""
Comandos de experimentos completos: tablas de clasificación y fracción de etiquetas
"""
import logging

import click

from app.commands import config_option, resolve_run_config, seed_option
from app.services.experiment_runner import run_label_fraction, run_tables

logger = logging.getLogger(__name__)

out_dir_option = click.option(
    '--out', 'out_dir', type=click.Path(file_okay=False), required=True,
    help='Directorio de salida'
)


@click.group('experiment')
def experiment():
    """Experimentos de extremo a extremo desde un archivo de configuración"""


@experiment.command('tables')
@config_option
@seed_option
@out_dir_option
@click.option('--pdf', is_flag=True, help='Escribir además report.pdf')
@click.pass_context
def tables(ctx, config_path, seed, out_dir, pdf):
    """Tablas de clasificación de difusión y de red (summary.csv y table_*.csv)"""
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed})
    rows = run_tables(run_config, out_dir, pdf=pdf)
    click.echo(f"{len(rows)} filas de resumen -> {out_dir}", err=True)


@experiment.command('label-fraction')
@config_option
@seed_option
@out_dir_option
@click.option('--plot', is_flag=True, help='Escribir además label_fraction.png')
@click.option('--pdf', is_flag=True, help='Escribir además report.pdf')
@click.pass_context
def label_fraction(ctx, config_path, seed, out_dir, plot, pdf):
    """Macro-F1 del modelo contrastivo según la fracción de etiquetas"""
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed})
    rows = run_label_fraction(run_config, out_dir, plot=plot, pdf=pdf)
    click.echo(f"{len(rows)} filas de fracción -> {out_dir}", err=True)
