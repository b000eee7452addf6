"""
Servicio de generación de redes sintéticas (BA, WS, LFR)
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Sequence
import logging
import math

import numpy as np

from app.exceptions import CascadeParseError, GenerationFailureError, InvalidConfigError
from app.models.cascade import Network
from app.models.specs import NetGenConfig, NetworkModel
from app.utils.files import atomic_write
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

# Rondas de re-emparejamiento de stubs rechazados en el modelo de configuración
STUB_REMATCH_ROUNDS = 50


def generate_ba(config: NetGenConfig) -> Network:
    """
    Red Barabási–Albert por adjunción preferencial

    Los ba_m nodos iniciales están aislados; cada nodo nuevo se conecta a ba_m
    nodos distintos muestreados de una urna donde cada extremo de arista
    aparece una vez (probabilidad proporcional al grado).

    Args:
        config: NetGenConfig con model = BA

    Returns:
        Network con (node_count - ba_m) * ba_m aristas
    """
    _expect_model(config, NetworkModel.BA)
    config.check()
    n, m = config.node_count, config.ba_m
    rng = make_rng(config.seed, 0)

    urn: List[int] = []
    edges = []
    for new_node in range(m, n):
        if not urn:
            # Primer nodo: todos los grados son cero, se conecta a los m iniciales
            targets = list(range(m))
        else:
            chosen = set()
            targets = []
            while len(targets) < m:
                candidate = urn[int(rng.integers(len(urn)))]
                if candidate not in chosen:
                    chosen.add(candidate)
                    targets.append(candidate)
        for target in targets:
            edges.append((target, new_node))
            urn.append(target)
            urn.append(new_node)

    network = Network.from_pairs(n, edges)
    logger.debug(f"Red BA generada: n={n}, m={m}, aristas={network.edge_count}")
    return network


def generate_ws(config: NetGenConfig) -> Network:
    """
    Red Watts–Strogatz: anillo regular con recableado aleatorio

    Cada arista del anillo (u, u+j) se recablea con probabilidad ws_beta hacia
    un destino uniforme que no sea u ni un vecino actual; el número de
    aristas se conserva.

    Args:
        config: NetGenConfig con model = WS

    Returns:
        Network con node_count * ws_k / 2 aristas
    """
    _expect_model(config, NetworkModel.WS)
    config.check()
    n, half = config.node_count, config.ws_k // 2
    rng = make_rng(config.seed, 0)

    adjacency = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, half + 1):
            v = (u + j) % n
            adjacency[u].add(v)
            adjacency[v].add(u)

    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= config.ws_beta:
                continue
            if v not in adjacency[u] or len(adjacency[u]) >= n - 1:
                continue
            while True:
                w = int(rng.integers(n))
                if w != u and w not in adjacency[u]:
                    break
            adjacency[u].discard(v)
            adjacency[v].discard(u)
            adjacency[u].add(w)
            adjacency[w].add(u)

    pairs = [(u, v) for u in range(n) for v in adjacency[u] if u < v]
    network = Network.from_pairs(n, pairs)
    logger.debug(f"Red WS generada: n={n}, k={config.ws_k}, beta={config.ws_beta}")
    return network


def generate_lfr(config: NetGenConfig) -> Network:
    """
    Red de referencia LFR con comunidades plantadas

    Secuencia de grados con ley de potencias truncada (exponente lfr_gamma,
    media ~ lfr_avg_deg, máximo lfr_max_deg), tamaños de comunidad con ley de
    potencias en [lfr_min_comm, lfr_max_comm] y cableado por modelo de
    configuración dentro y entre comunidades con rechazo de lazos y aristas
    múltiples. La partición se reintenta hasta lfr_max_iters veces.

    Args:
        config: NetGenConfig con model = LFR

    Returns:
        Network con el vector de comunidades adjunto

    Raises:
        GenerationFailureError: Si no se logra una partición válida
    """
    _expect_model(config, NetworkModel.LFR)
    config.check()
    n = config.node_count
    rng = make_rng(config.seed, 0)

    degrees = _sample_degree_sequence(config, rng)
    internal = np.rint((1.0 - config.lfr_mu) * degrees).astype(np.int64)

    membership = None
    iterations = 0
    for iterations in range(1, config.lfr_max_iters + 1):
        sizes = _sample_community_sizes(config, rng)
        if sizes is None:
            continue
        membership = _assign_communities(sizes, internal, rng)
        if membership is not None:
            break

    if membership is None:
        raise GenerationFailureError(
            f"No se logró una partición LFR válida tras {iterations} iteraciones "
            f"(comunidades en [{config.lfr_min_comm}, {config.lfr_max_comm}], n={n})",
            iterations=iterations
        )

    internal, external = _balance_stubs(degrees, internal, membership)
    edges = set()
    for community in np.unique(membership):
        members = np.flatnonzero(membership == community)
        stubs = np.repeat(members, internal[members])
        _match_stubs(stubs, rng, edges, membership=None)
    stubs = np.repeat(np.arange(n), external)
    _match_stubs(stubs, rng, edges, membership=membership)

    network = Network.from_pairs(n, edges, communities=membership.tolist())
    logger.debug(
        f"Red LFR generada: n={n}, comunidades={len(np.unique(membership))}, "
        f"aristas={network.edge_count}, iteraciones={iterations}"
    )
    return network


def generate_network(config: NetGenConfig) -> Network:
    """Despacha al generador según config.model"""
    generators = {
        NetworkModel.BA: generate_ba,
        NetworkModel.WS: generate_ws,
        NetworkModel.LFR: generate_lfr,
    }
    return generators[config.model](config)


def generate_networks(configs: Sequence[NetGenConfig], threads: int = 1) -> List[Network]:
    """
    Genera varias redes, opcionalmente en paralelo

    Cada red usa su propia semilla, así que el resultado no depende del
    número de hilos.
    """
    if threads <= 1 or len(configs) <= 1:
        return [generate_network(c) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(generate_network, configs))


def mixing_fraction(network: Network) -> float:
    """
    Fracción de aristas que cruzan comunidades (mezcla empírica)

    Returns:
        float en [0, 1]; 0 si la red no tiene comunidades o aristas
    """
    if network.communities is None or not network.edges:
        return 0.0
    communities = network.communities
    crossing = sum(1 for u, v in network.edges if communities[u] != communities[v])
    return crossing / network.edge_count


def write_network(network: Network, path) -> None:
    """
    Escribe la red en formato texto

    Formato: primera línea "# nodes=<N>" y luego una arista "u v" por línea con u < v.
    """
    with atomic_write(path) as handle:
        handle.write(f"# nodes={network.node_count}\n")
        for u, v in network.edges:
            handle.write(f"{u} {v}\n")
    logger.info(f"Red guardada en {path}: {network.node_count} nodos, {network.edge_count} aristas")


def read_network(path) -> Network:
    """
    Lee una red en formato texto

    Raises:
        CascadeParseError: Si el encabezado o alguna arista están mal formados
    """
    path = Path(path)
    with open(path, encoding='utf-8') as handle:
        header = handle.readline()
        if not header.startswith('# nodes='):
            raise CascadeParseError("falta el encabezado '# nodes=<N>'", line_number=1, path=path)
        try:
            node_count = int(header.strip().split('=', 1)[1])
        except ValueError:
            raise CascadeParseError(f"encabezado inválido: {header.strip()}", line_number=1, path=path)
        pairs = []
        for line_number, line in enumerate(handle, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise CascadeParseError(f"arista mal formada: {line.strip()}", line_number=line_number, path=path)
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise CascadeParseError(f"arista no numérica: {line.strip()}", line_number=line_number, path=path)
    return Network.from_pairs(node_count, pairs)


def _expect_model(config: NetGenConfig, model: NetworkModel) -> None:
    if config.model != model:
        raise InvalidConfigError(
            f"se esperaba model={model.value}, se recibió {config.model.value}", field='model'
        )


def _power_law_mean(x_min: float, x_max: float, exponent: float) -> float:
    """Media de la ley de potencias continua truncada en [x_min, x_max]"""
    a = 1.0 - exponent
    b = 2.0 - exponent
    if abs(b) < 1e-12:
        num = math.log(x_max / x_min)
    else:
        num = (x_max ** b - x_min ** b) / b
    if abs(a) < 1e-12:
        den = math.log(x_max / x_min)
    else:
        den = (x_max ** a - x_min ** a) / a
    return num / den


def _sample_power_law(rng, size: int, x_min: float, x_max: float, exponent: float) -> np.ndarray:
    """Muestreo por CDF inversa de la ley de potencias continua truncada"""
    u = rng.random(size)
    a = 1.0 - exponent
    lo, hi = x_min ** a, x_max ** a
    return (lo + u * (hi - lo)) ** (1.0 / a)


def _sample_degree_sequence(config: NetGenConfig, rng) -> np.ndarray:
    """Secuencia de grados con media ~ lfr_avg_deg y máximo lfr_max_deg, suma par"""
    k_max = float(config.lfr_max_deg)
    lo, hi = 1.0, k_max
    if _power_law_mean(lo, k_max, config.lfr_gamma) > config.lfr_avg_deg:
        x_min = lo
    else:
        # Bisección: la media crece con x_min
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if _power_law_mean(mid, k_max, config.lfr_gamma) < config.lfr_avg_deg:
                lo = mid
            else:
                hi = mid
        x_min = 0.5 * (lo + hi)

    raw = _sample_power_law(rng, config.node_count, x_min, k_max, config.lfr_gamma)
    degrees = np.clip(np.rint(raw), 1, config.lfr_max_deg).astype(np.int64)
    if degrees.sum() % 2 == 1:
        below_max = np.flatnonzero(degrees < config.lfr_max_deg)
        if below_max.size:
            degrees[below_max[0]] += 1
        else:
            degrees[0] -= 1
    return degrees


def _sample_community_sizes(config: NetGenConfig, rng):
    """
    Tamaños de comunidad que suman exactamente node_count

    Returns:
        Lista de tamaños o None si el intento no es factible
    """
    n = config.node_count
    lo, hi = config.lfr_min_comm, config.lfr_max_comm
    sizes = []
    total = 0
    while total < n:
        size = int(np.clip(np.rint(_sample_power_law(rng, 1, lo, hi, config.lfr_beta_c)[0]), lo, hi))
        sizes.append(size)
        total += size

    excess = total - n
    # Quitar el exceso repartiéndolo sin bajar del mínimo
    for i in range(len(sizes) - 1, -1, -1):
        if excess == 0:
            break
        removable = min(excess, sizes[i] - lo)
        sizes[i] -= removable
        excess -= removable
    if excess > 0:
        return None
    if any(s < lo or s > hi for s in sizes):
        return None
    return sizes


def _assign_communities(sizes, internal, rng):
    """
    Asigna nodos a comunidades respetando grado interno <= tamaño - 1

    Returns:
        np.ndarray con la comunidad de cada nodo o None si no cabe
    """
    n = len(internal)
    capacity = np.asarray(sizes, dtype=np.int64)
    sizes_arr = capacity.copy()
    membership = np.full(n, -1, dtype=np.int64)
    # Primero los nodos con mayor grado interno (desempate aleatorio)
    order = np.lexsort((rng.random(n), -internal))
    for node in order:
        fits = np.flatnonzero((capacity > 0) & (sizes_arr - 1 >= internal[node]))
        if fits.size == 0:
            return None
        community = int(fits[int(rng.integers(fits.size))])
        membership[node] = community
        capacity[community] -= 1
    return membership


def _balance_stubs(degrees, internal, membership):
    """Ajusta grados internos para que cada comunidad y el total externo tengan suma par"""
    internal = internal.copy()
    for community in np.unique(membership):
        members = np.flatnonzero(membership == community)
        if internal[members].sum() % 2 == 1:
            # Pasar un stub interno a externo en el nodo de mayor grado interno
            node = members[np.argmax(internal[members])]
            internal[node] -= 1
    external = degrees - internal
    if external.sum() % 2 == 1:
        node = int(np.argmax(external))
        external[node] -= 1
    return internal, external


def _match_stubs(stubs: np.ndarray, rng, edges: set, membership=None) -> None:
    """
    Empareja stubs al azar agregando aristas válidas a `edges`

    Rechaza lazos, aristas repetidas y (si membership no es None) pares de la
    misma comunidad; los stubs rechazados se re-barajan algunas rondas y los
    sobrantes se descartan.
    """
    pending = stubs.copy()
    for _ in range(STUB_REMATCH_ROUNDS):
        if pending.size < 2:
            break
        rng.shuffle(pending)
        if pending.size % 2 == 1:
            pending = pending[:-1]
        rejected = []
        for u, v in pending.reshape(-1, 2):
            u, v = int(u), int(v)
            key = (u, v) if u < v else (v, u)
            if u == v or key in edges or (membership is not None and membership[u] == membership[v]):
                rejected.extend((u, v))
                continue
            edges.add(key)
        if not rejected:
            return
        pending = np.asarray(rejected, dtype=np.int64)
    if pending.size:
        logger.debug(f"Stubs descartados en el cableado LFR: {pending.size}")
