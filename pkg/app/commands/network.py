"""
Comando gen-net: genera una red sintética (BA, WS o LFR)
"""
import logging

import click

from app.commands import config_option, out_option, resolve_run_config, seed_option, write_provenance
from app.models.specs import NetworkModel
from app.services.network_generator import generate_network, mixing_fraction, write_network

logger = logging.getLogger(__name__)


@click.command('gen-net')
@click.option('--model', type=click.Choice([m.value for m in NetworkModel], case_sensitive=False),
              default=None, help='Modelo de red')
@click.option('--nodes', 'node_count', type=int, default=None, help='Número de nodos')
@click.option('--ba-m', type=int, default=None, help='BA: aristas por nodo nuevo')
@click.option('--ws-k', type=int, default=None, help='WS: grado del anillo (par)')
@click.option('--ws-beta', type=float, default=None, help='WS: probabilidad de recableado')
@click.option('--lfr-mu', type=float, default=None, help='LFR: parámetro de mezcla')
@click.option('--lfr-gamma', type=float, default=None, help='LFR: exponente de grados')
@click.option('--lfr-beta', 'lfr_beta_c', type=float, default=None, help='LFR: exponente de comunidades')
@click.option('--lfr-avg-deg', type=float, default=None, help='LFR: grado medio')
@click.option('--lfr-max-deg', type=int, default=None, help='LFR: grado máximo')
@click.option('--lfr-min-comm', type=int, default=None, help='LFR: tamaño mínimo de comunidad')
@click.option('--lfr-max-comm', type=int, default=None, help='LFR: tamaño máximo de comunidad')
@seed_option
@out_option
@config_option
@click.pass_context
def gen_net(ctx, model, seed, out_path, config_path, **network):
    """Genera una red y la escribe como lista de aristas"""
    if model is not None:
        network['model'] = model
    run_config = resolve_run_config(ctx, config_path, run={'seed': seed}, network=network)
    config = run_config.network
    config.check()

    net = generate_network(config)
    write_network(net, out_path)
    write_provenance(out_path, run_config)
    if net.communities is not None:
        logger.info(f"Mezcla empírica de la red LFR: {mixing_fraction(net):.3f}")
    click.echo(f"{config.model.value}: {net.node_count} nodos, {net.edge_count} aristas -> {out_path}", err=True)
