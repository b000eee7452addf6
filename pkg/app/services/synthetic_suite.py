"""
Servicio de la suite sintética: tres redes por nueve datasets de difusión

Los datasets se nombran <RED>-<DIFUSIÓN> (ej: BA-IC) y sus cascadas
<RED>-<DIFUSIÓN>-<k>. Los grupos de clasificación de difusión fijan la red;
los de clasificación de red fijan el modelo de difusión.
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence
import logging

from app.models.cascade import Cascade, Network
from app.models.specs import (
    DiffusionConfig, DiffusionModel, GroupSource, GroupSpec, NetGenConfig, NetworkModel, build_model,
)
from app.services.diffusion_simulator import generate_dataset
from app.services.network_generator import generate_networks
from app.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

TABLE_DIFFUSION = 'diffusion'
TABLE_NETWORK = 'network'
TABLES = (TABLE_DIFFUSION, TABLE_NETWORK)


def dataset_name(network: NetworkModel, diffusion: DiffusionModel) -> str:
    return f"{network.value}-{diffusion.value}"


@dataclass
class SyntheticSuite:
    """Redes generadas y datasets de cascadas por combinación"""

    networks: Dict[NetworkModel, Network]
    datasets: Dict[str, List[Cascade]]
    network_models: Sequence[NetworkModel]
    diffusion_models: Sequence[DiffusionModel]

    def group_spec(self, table: str, name: str, per_class_count: int, seed: int) -> GroupSpec:
        """
        Especificación del grupo `name` de la tabla indicada

        Tabla 'diffusion': name es una red y las clases son los modelos de difusión.
        Tabla 'network': name es un modelo de difusión y las clases son las redes.
        """
        if table == TABLE_DIFFUSION:
            net = NetworkModel(name)
            sources = [GroupSource(path=dataset_name(net, d), class_name=d.value) for d in self.diffusion_models]
        else:
            diff = DiffusionModel(name)
            sources = [GroupSource(path=dataset_name(n, diff), class_name=n.value) for n in self.network_models]
        return build_model(GroupSpec, name=name, sources=sources, per_class_count=per_class_count, seed=seed)

    def group_names(self, table: str) -> List[str]:
        models = self.network_models if table == TABLE_DIFFUSION else self.diffusion_models
        return [m.value for m in models]

    def external_pool(self, networks: Sequence[NetworkModel], count: int, seed: int) -> List[Cascade]:
        """
        Cascadas sin etiquetar de las redes indicadas (todas las difusiones)

        Sirven como conjunto externo de pre-entrenamiento; se muestrean sin
        reemplazo hasta `count`.
        """
        candidates = [
            cascade
            for net in networks
            for diff in self.diffusion_models
            for cascade in self.datasets[dataset_name(net, diff)]
        ]
        if count >= len(candidates):
            return candidates
        chosen = sorted(make_rng(seed).choice(len(candidates), size=count, replace=False))
        return [candidates[int(i)] for i in chosen]


def build_synthetic_suite(
    network_config: NetGenConfig,
    diffusion_config: DiffusionConfig,
    cascades_per_source: int,
    master_seed: int,
    network_models: Sequence[NetworkModel] = tuple(NetworkModel),
    diffusion_models: Sequence[DiffusionModel] = tuple(DiffusionModel),
    threads: int = 1,
) -> SyntheticSuite:
    """
    Genera las redes y todos los datasets (red x difusión)

    Args:
        network_config: Parámetros de red (el modelo y la semilla se reemplazan por red)
        diffusion_config: Parámetros de difusión (modelo y semilla por dataset)
        cascades_per_source: Cascadas por dataset
        master_seed: Semilla maestra de la que se derivan todas las demás
        threads: Hilos para redes y simulación

    Returns:
        SyntheticSuite
    """
    network_models = list(network_models)
    diffusion_models = list(diffusion_models)
    configs = [
        network_config.model_copy(update={'model': net, 'seed': derive_seed(master_seed, f"network/{net.value}")})
        for net in network_models
    ]
    for config in configs:
        config.check()
    networks = dict(zip(network_models, generate_networks(configs, threads)))

    datasets = {}
    for net in network_models:
        for diff in diffusion_models:
            name = dataset_name(net, diff)
            config = diffusion_config.model_copy(update={
                'model': diff, 'seed': derive_seed(master_seed, f"diffusion/{name}")
            })
            cascades = generate_dataset(networks[net], config, cascades_per_source, threads)
            datasets[name] = [c.renamed(f"{name}-{i}") for i, c in enumerate(cascades)]
    logger.info(
        f"Suite sintética: {len(networks)} redes, {len(datasets)} datasets de {cascades_per_source} cascadas"
    )
    return SyntheticSuite(networks, datasets, network_models, diffusion_models)
