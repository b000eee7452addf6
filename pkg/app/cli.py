"""
Punto de entrada de la CLI del laboratorio de cascadas
Registra los comandos y traduce errores a códigos de salida
"""
import logging
import shlex
import sys

import click
import torch

from app import __version__, setup_logging
from app.config import Config
from app.exceptions import EXIT_OK, handle_cli_error

logger = logging.getLogger(__name__)


@click.group('cascadelab')
@click.version_option(__version__, prog_name='cascadelab')
@click.option('--threads', type=click.IntRange(min=1), default=None,
              help='Máximo de hilos (1 = modo de referencia reproducible)')
@click.option('--verbose', '-v', is_flag=True, help='Logs en nivel DEBUG')
@click.pass_context
def cli(ctx, threads, verbose):
    """Redes sintéticas, simulación de difusión y clasificación del origen de cascadas"""
    ctx.ensure_object(dict)
    setup_logging('DEBUG' if verbose else Config.LOG_LEVEL)
    for problem in Config.validate():
        logger.warning(f"Configuración de entorno: {problem}")
    threads = threads or Config.THREADS
    ctx.obj['threads'] = threads
    torch.set_num_threads(threads)
    logger.debug(f"cascadelab {__version__}: {threads} hilos")


def register_commands(group: click.Group) -> click.Group:
    """Registra los comandos de cada etapa del pipeline"""
    from app.commands.experiments import experiment
    from app.commands.groups import build_group_command, featurize
    from app.commands.models import evaluate, train
    from app.commands.network import gen_net
    from app.commands.simulation import import_paths, simulate

    for command in (gen_net, simulate, import_paths, build_group_command, featurize, train, evaluate, experiment):
        group.add_command(command)
    return group


register_commands(cli)


def main(argv=None) -> int:
    """
    Ejecuta la CLI y retorna el código de salida

    Args:
        argv: Argumentos (por defecto sys.argv[1:])

    Returns:
        int: 0 éxito, 1 error de uso o configuración, 2 fallo de ejecución
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(
            args=argv,
            prog_name='cascadelab',
            standalone_mode=False,
            obj={'arguments': shlex.join(argv)},
        )
    except click.exceptions.Abort:
        return handle_cli_error(click.UsageError('ejecución cancelada'))
    except Exception as e:
        return handle_cli_error(e)
    return result if isinstance(result, int) else EXIT_OK
