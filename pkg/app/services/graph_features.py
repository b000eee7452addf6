"""
Servicio de atributos de grafos de cascada

Atributos globales (grado medio, longitud media de camino, densidad y
clustering) para los modelos de árboles, y atributos por nodo (grado,
distancia media y tiempo normalizado) para la GCN y el codificador contrastivo.
Todas las métricas se calculan sobre la vista no dirigida.
"""
from typing import Iterable, Sequence, Tuple
import csv
import logging

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, shortest_path

from app.exceptions import InvalidInputError
from app.models.cascade import CascadeGraph, FeatureVector, NodeFeatureMatrix
from app.models.specs import ObservationWindow
from app.utils.files import atomic_write

logger = logging.getLogger(__name__)

NODE_FEATURE_DIM = 3
FEATURE_CSV_HEADER = (
    'cascade_id', 'class_name', 'avg_degree', 'avg_path_length', 'link_density', 'clustering'
)


def graph_features(g: CascadeGraph) -> FeatureVector:
    """
    Atributos globales del grafo de cascada

    Args:
        g: CascadeGraph no vacío

    Returns:
        FeatureVector(avg_degree, avg_path_length, link_density, clustering_coefficient)

    Raises:
        InvalidInputError: Si el grafo está vacío

    Ejemplos:
        Camino 0-1-2 -> (4/3, 4/3, 2/3, 0)
    """
    if not g.nodes:
        raise InvalidInputError(f"grafo {g.cascade_id} vacío")
    return features_from_edges(g.size, g.index_edges)


def features_from_edges(node_count: int, edges) -> FeatureVector:
    """
    Atributos globales de un grafo no dirigido conexo dado como lista de aristas

    Args:
        node_count: Número de nodos (posiciones 0..node_count-1)
        edges: Pares (i, j) sin repetir

    Returns:
        FeatureVector
    """
    if node_count < 1:
        raise InvalidInputError("el grafo no tiene nodos")
    edges = _as_edge_array(edges)
    n, m = node_count, len(edges)
    if n == 1:
        return FeatureVector(0.0, 0.0, 0.0, 0.0)

    distance_sums = _distance_sums(n, edges)
    avg_path_length = float(distance_sums.sum()) / (n * (n - 1))
    return FeatureVector(
        avg_degree=2.0 * m / n,
        avg_path_length=avg_path_length,
        link_density=2.0 * m / (n * (n - 1)),
        clustering_coefficient=float(_local_clustering(n, edges).mean()),
    )


def node_features(g: CascadeGraph, window: ObservationWindow) -> NodeFeatureMatrix:
    """
    Atributos por nodo alineados con g.nodes

    Columnas: grado, distancia media a los demás nodos y tiempo de activación
    dividido por la cota de la ventana (recortado a [0, 1]).

    Args:
        g: CascadeGraph no vacío
        window: Ventana de observación usada al construir el grafo

    Returns:
        NodeFeatureMatrix de forma (|V|, 3)

    Ejemplos:
        Estrella K1,4: centro -> grado 4, distancia 1; hoja -> grado 1, distancia 7/4
    """
    if not g.nodes:
        raise InvalidInputError(f"grafo {g.cascade_id} vacío")
    n = g.size
    edges = g.index_edges
    degree, avg_sp = node_structure(n, edges)
    bound = window.bound_for(g.time_unit)
    timestamp = np.clip(g.times / bound, 0.0, 1.0)
    values = np.column_stack([degree, avg_sp, timestamp])
    return NodeFeatureMatrix(g.nodes, values)


def node_structure(node_count: int, edges) -> Tuple[np.ndarray, np.ndarray]:
    """
    Grado y distancia media de cada nodo de un grafo no dirigido conexo

    Returns:
        (grados, distancias medias); un grafo de un nodo da distancia 0
    """
    edges = _as_edge_array(edges)
    degree = np.bincount(edges.ravel(), minlength=node_count).astype(np.float64)
    if node_count == 1:
        return degree, np.zeros(1)
    avg_sp = _distance_sums(node_count, edges) / (node_count - 1)
    return degree, avg_sp


def model_inputs(matrix: NodeFeatureMatrix) -> np.ndarray:
    """
    Matriz de entrada para las redes: log1p sobre grado y distancia media

    El tiempo normalizado ya está en [0, 1] y se deja igual.
    """
    values = np.array(matrix.values, dtype=np.float64, copy=True)
    values[:, :2] = np.log1p(values[:, :2])
    return values


def write_feature_csv(rows: Iterable[Tuple[str, str, FeatureVector]], path) -> int:
    """
    Escribe el CSV de atributos (una fila por cascada, precisión completa)

    Args:
        rows: Tuplas (cascade_id, class_name, FeatureVector)
        path: Ruta destino

    Returns:
        Número de filas escritas
    """
    count = 0
    with atomic_write(path, newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(FEATURE_CSV_HEADER)
        for cascade_id, class_name, vector in rows:
            writer.writerow([cascade_id, class_name or ''] + [repr(float(v)) for v in vector])
            count += 1
    logger.info(f"{count} filas de atributos escritas en {path}")
    return count


def _as_edge_array(edges) -> np.ndarray:
    array = np.asarray(edges, dtype=np.int64)
    return array.reshape(-1, 2)


def _adjacency(n: int, edges: np.ndarray) -> sparse.csr_matrix:
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(len(rows), dtype=np.float64)
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def _distance_sums(n: int, edges: np.ndarray) -> np.ndarray:
    """
    Suma de distancias de cada nodo a todos los demás

    En árboles usa re-enraizamiento en O(n); en otros grafos, BFS de todos
    contra todos con scipy.

    Raises:
        InvalidInputError: Si el grafo no es conexo
    """
    adjacency = _adjacency(n, edges)
    if len(edges) == n - 1:
        order, predecessors = breadth_first_order(adjacency, 0, directed=False, return_predecessors=True)
        if len(order) == n:
            return _tree_distance_sums(n, order, predecessors)
    distances = shortest_path(adjacency, method='D', directed=False, unweighted=True)
    if np.isinf(distances).any():
        raise InvalidInputError("el grafo no es conexo")
    return distances.sum(axis=1)


def _tree_distance_sums(n: int, order: Sequence[int], predecessors: np.ndarray) -> np.ndarray:
    subtree = np.ones(n, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)
    for v in order[1:]:
        depth[v] = depth[predecessors[v]] + 1
    for v in order[:0:-1]:
        subtree[predecessors[v]] += subtree[v]

    sums = np.zeros(n, dtype=np.int64)
    sums[order[0]] = depth.sum()
    # Al bajar a un hijo, su subárbol se acerca y el resto se aleja
    for v in order[1:]:
        sums[v] = sums[predecessors[v]] + n - 2 * subtree[v]
    return sums.astype(np.float64)


def _local_clustering(n: int, edges: np.ndarray) -> np.ndarray:
    """Clustering local por nodo; grado < 2 aporta 0"""
    if len(edges) < 3:
        return np.zeros(n)
    adjacency = _adjacency(n, edges)
    triangles = np.asarray((adjacency @ adjacency).multiply(adjacency).sum(axis=1)).ravel() / 2.0
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    pairs = degree * (degree - 1) / 2.0
    clustering = np.zeros(n)
    mask = pairs > 0
    clustering[mask] = triangles[mask] / pairs[mask]
    return clustering
