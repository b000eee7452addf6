"""
Servicio de simulación de difusión (IC, LT, Profile) y construcción de datasets
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List
import logging

import numpy as np

from app.exceptions import InvalidConfigError, InvalidInputError, ProgressFailureError
from app.models.cascade import TIME_UNIT_STEPS, Cascade, Event, Network
from app.models.specs import DiffusionConfig, DiffusionModel
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

# Intentos de simulación que se despachan juntos al pool de hilos
ATTEMPT_CHUNK = 64


def simulate_ic(net: Network, config: DiffusionConfig, seed_node: int, rng=None) -> Cascade:
    """
    Modelo de Cascada Independiente en rondas síncronas

    Cada nodo activado en la ronda s tiene exactamente un intento Bernoulli(ic_p)
    sobre cada vecino inactivo en la ronda s+1. Si varios lo logran en la
    misma ronda, el padre se elige al azar entre ellos.

    Args:
        net: Red de difusión
        config: DiffusionConfig (usa ic_p y max_size)
        seed_node: Nodo origen
        rng: numpy Generator (por defecto derivado de config.seed y seed_node)

    Returns:
        Cascade con tiempos = índice de ronda
    """
    _check_seed_node(net, seed_node)
    rng = rng if rng is not None else _default_rng(config, seed_node)
    neighbors = net.neighbors
    p = config.ic_p
    max_size = config.max_size

    active = {seed_node}
    events = [Event(seed_node, None, 0)]
    frontier = [seed_node]
    step = 0
    while frontier and len(events) < max_size:
        step += 1
        activators: Dict[int, List[int]] = {}
        for u in frontier:
            candidates = [v for v in neighbors[u] if v not in active]
            if not candidates or p <= 0:
                continue
            draws = rng.random(len(candidates))
            for v, draw in zip(candidates, draws):
                if draw < p:
                    activators.setdefault(v, []).append(u)
        frontier = _commit_round(activators, active, events, step, max_size, rng)

    return Cascade(f"{DiffusionModel.IC.value}-{seed_node}", seed_node, tuple(events), TIME_UNIT_STEPS)


def simulate_lt(net: Network, config: DiffusionConfig, seed_node: int, rng=None) -> Cascade:
    """
    Modelo de Umbral Lineal con pesos 1/grado(v)

    Un nodo inactivo v se activa en la ronda s+1 si la suma de pesos de sus
    vecinos activos alcanza lt_threshold. El padre es el vecino activo más
    antiguo (desempate por menor id). Es determinista: `rng` se ignora.

    Args:
        net: Red de difusión
        config: DiffusionConfig (usa lt_threshold y max_size)
        seed_node: Nodo origen

    Returns:
        Cascade con tiempos = índice de ronda
    """
    _check_seed_node(net, seed_node)
    neighbors = net.neighbors
    threshold = config.lt_threshold
    max_size = config.max_size

    activation_time = {seed_node: 0}
    active_count = {}
    events = [Event(seed_node, None, 0)]
    frontier = [seed_node]
    step = 0
    while frontier and len(events) < max_size:
        step += 1
        touched = set()
        for u in frontier:
            for v in neighbors[u]:
                if v in activation_time:
                    continue
                active_count[v] = active_count.get(v, 0) + 1
                touched.add(v)

        newly = []
        for v in sorted(touched):
            if active_count[v] / len(neighbors[v]) >= threshold:
                newly.append(v)

        frontier = []
        for v in newly:
            if len(events) >= max_size:
                break
            parent = min(
                (w for w in neighbors[v] if w in activation_time),
                key=lambda w: (activation_time[w], w)
            )
            events.append(Event(v, parent, step))
            frontier.append(v)
        for v in frontier:
            activation_time[v] = step

    return Cascade(f"{DiffusionModel.LT.value}-{seed_node}", seed_node, tuple(events), TIME_UNIT_STEPS)


def simulate_profile(net: Network, config: DiffusionConfig, seed_node: int, rng=None) -> Cascade:
    """
    Modelo Profile: probabilidad del lado del receptor

    Cada vez que un vecino de un nodo inactivo v se activa, v recibe un ensayo
    Bernoulli(profile_q) en la ronda siguiente; si acierta, se activa con ese
    vecino como padre (varios aciertos: padre al azar entre ellos).

    Args:
        net: Red de difusión
        config: DiffusionConfig (usa profile_q y max_size)
        seed_node: Nodo origen
        rng: numpy Generator (por defecto derivado de config.seed y seed_node)

    Returns:
        Cascade con tiempos = índice de ronda
    """
    _check_seed_node(net, seed_node)
    rng = rng if rng is not None else _default_rng(config, seed_node)
    neighbors = net.neighbors
    q = config.profile_q
    max_size = config.max_size

    active = {seed_node}
    events = [Event(seed_node, None, 0)]
    frontier = [seed_node]
    step = 0
    while frontier and len(events) < max_size:
        step += 1
        # Exposiciones por receptor, en orden de activación del emisor
        exposures: Dict[int, List[int]] = {}
        for u in frontier:
            for v in neighbors[u]:
                if v not in active:
                    exposures.setdefault(v, []).append(u)

        activators: Dict[int, List[int]] = {}
        if q > 0:
            for v, sources in exposures.items():
                draws = rng.random(len(sources))
                hits = [u for u, draw in zip(sources, draws) if draw < q]
                if hits:
                    activators[v] = hits
        frontier = _commit_round(activators, active, events, step, max_size, rng)

    return Cascade(f"{DiffusionModel.PROFILE.value}-{seed_node}", seed_node, tuple(events), TIME_UNIT_STEPS)


SIMULATORS = {
    DiffusionModel.IC: simulate_ic,
    DiffusionModel.LT: simulate_lt,
    DiffusionModel.PROFILE: simulate_profile,
}


def simulate(net: Network, config: DiffusionConfig, seed_node: int, rng=None) -> Cascade:
    """Despacha al simulador según config.model"""
    return SIMULATORS[config.model](net, config, seed_node, rng)


def truncate_cascade(cascade: Cascade, max_size: int) -> Cascade:
    """
    Conserva los primeros max_size eventos (prefijo temporal estable)

    Como los padres se activan antes que los hijos, el prefijo sigue siendo
    una cascada válida.
    """
    return cascade.truncated(max_size)


def generate_dataset(net: Network, config: DiffusionConfig, count: int, threads: int = 1) -> List[Cascade]:
    """
    Genera exactamente `count` cascadas que pasan el filtro de tamaño

    Cada intento j usa su propio generador derivado de (config.seed, j): elige
    un nodo origen uniforme, simula, descarta si hay menos de min_size eventos
    y trunca a max_size. Los ids son `<modelo>-<índice>`.

    Args:
        net: Red de difusión
        config: DiffusionConfig
        count: Número de cascadas a producir
        threads: Hilos para simular intentos en paralelo (no cambia el resultado)

    Returns:
        Lista de Cascade

    Raises:
        ProgressFailureError: Si hay más de config.max_rejections rechazos consecutivos
    """
    if count < 1:
        raise InvalidConfigError(f"count debe ser >= 1: {count}", field='count')

    model_name = config.model.value
    cascades: List[Cascade] = []
    consecutive_rejections = 0
    total_attempts = 0
    attempt = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def run_attempt(index):
        rng = make_rng(config.seed, index)
        seed_node = int(rng.integers(net.node_count))
        return simulate(net, config, seed_node, rng)

    try:
        while len(cascades) < count:
            indices = range(attempt, attempt + ATTEMPT_CHUNK)
            attempt += ATTEMPT_CHUNK
            results = pool.map(run_attempt, indices) if pool else map(run_attempt, indices)
            for raw in results:
                total_attempts += 1
                if raw.size < config.min_size:
                    consecutive_rejections += 1
                    if consecutive_rejections > config.max_rejections:
                        raise ProgressFailureError(
                            f"{consecutive_rejections} rechazos consecutivos generando {model_name} "
                            f"(min_size={config.min_size}); tasa de aceptación demasiado baja",
                            rejections=consecutive_rejections
                        )
                    continue
                consecutive_rejections = 0
                kept = truncate_cascade(raw, config.max_size)
                cascades.append(kept.renamed(f"{model_name}-{len(cascades)}"))
                if len(cascades) == count:
                    break
    finally:
        if pool:
            pool.shutdown(wait=True)

    logger.info(
        f"Dataset {model_name}: {count} cascadas aceptadas de {total_attempts} intentos "
        f"(tasa {count / total_attempts:.3f})"
    )
    return cascades


def _commit_round(activators, active, events, step, max_size, rng) -> List[int]:
    """
    Registra las activaciones de una ronda eligiendo un padre por nodo

    Returns:
        Nueva frontera (nodos activados en esta ronda)
    """
    frontier = []
    for v, sources in activators.items():
        if len(events) >= max_size:
            break
        parent = sources[0] if len(sources) == 1 else sources[int(rng.integers(len(sources)))]
        events.append(Event(v, parent, step))
        active.add(v)
        frontier.append(v)
    return frontier


def _check_seed_node(net: Network, seed_node: int) -> None:
    if not 0 <= seed_node < net.node_count:
        raise InvalidInputError(f"seed_node {seed_node} fuera de rango (node_count={net.node_count})")


def _default_rng(config: DiffusionConfig, seed_node: int) -> np.random.Generator:
    return make_rng(config.seed, seed_node)
