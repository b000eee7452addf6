"""
Tipos de dominio: redes, cascadas y grafos de cascada
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from app.exceptions import InvalidInputError

TIME_UNIT_STEPS = 'steps'
TIME_UNIT_SECONDS = 'seconds'
TIME_UNITS = (TIME_UNIT_STEPS, TIME_UNIT_SECONDS)


@dataclass(frozen=True)
class Network:
    """Red no dirigida estática sobre la que corre la difusión"""

    node_count: int
    edges: Tuple[Tuple[int, int], ...]
    communities: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    @classmethod
    def from_pairs(cls, node_count: int, pairs, communities=None) -> 'Network':
        """
        Construye una red canónica (u < v, aristas ordenadas) desde pares

        Args:
            node_count: Número de nodos
            pairs: Iterable de pares (u, v)
            communities: Comunidad de cada nodo (solo LFR)

        Returns:
            Network validada
        """
        canon = sorted({(u, v) if u < v else (v, u) for u, v in ((int(a), int(b)) for a, b in pairs)})
        network = cls(
            node_count=int(node_count),
            edges=tuple(canon),
            communities=tuple(int(c) for c in communities) if communities is not None else None
        )
        network.check_invariants()
        return network

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> Tuple[Tuple[int, ...], ...]:
        """Listas de adyacencia ordenadas por id de vecino"""
        adjacency = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return tuple(tuple(sorted(a)) for a in adjacency)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        if self.edges:
            arr = np.asarray(self.edges, dtype=np.int64)
            np.add.at(deg, arr[:, 0], 1)
            np.add.at(deg, arr[:, 1], 1)
        return deg

    def check_invariants(self) -> None:
        """Sin lazos, sin aristas duplicadas y extremos < node_count"""
        if self.node_count <= 0:
            raise InvalidInputError(f"node_count debe ser positivo: {self.node_count}")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise InvalidInputError(f"lazo en el nodo {u}")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise InvalidInputError(f"arista ({u}, {v}) fuera de rango para {self.node_count} nodos")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise InvalidInputError(f"arista duplicada ({u}, {v})")
            seen.add(key)
        if self.communities is not None and len(self.communities) != self.node_count:
            raise InvalidInputError("el vector de comunidades no cubre todos los nodos")


class Event(NamedTuple):
    """Evento de activación (nodo, padre, tiempo)"""

    node: int
    parent: Optional[int]
    time: float


@dataclass(frozen=True)
class Cascade:
    """Secuencia ordenada de activaciones con raíz en el nodo origen (t0 = 0)"""

    cascade_id: str
    origin_node: int
    events: Tuple[Event, ...]
    time_unit: Optional[str] = None

    @property
    def size(self) -> int:
        """Número de eventos M, contando el origen"""
        return len(self.events)

    @property
    def origin_time(self):
        return self.events[0].time if self.events else 0

    def check_invariants(self) -> None:
        """
        Valida la cascada

        Raises:
            InvalidInputError: Si se viola alguna invariante de orden, padre o unicidad
        """
        if not self.events:
            raise InvalidInputError(f"cascada {self.cascade_id} vacía")
        first = self.events[0]
        if first.node != self.origin_node or first.parent is not None or first.time != 0:
            raise InvalidInputError(
                f"cascada {self.cascade_id}: el primer evento debe ser el origen con t=0 y sin padre"
            )
        activated = {first.node: first.time}
        last_time = first.time
        for event in self.events[1:]:
            if event.node in activated:
                raise InvalidInputError(f"cascada {self.cascade_id}: nodo {event.node} repetido")
            if event.parent is None or event.parent == event.node:
                raise InvalidInputError(f"cascada {self.cascade_id}: padre inválido para {event.node}")
            if event.parent not in activated:
                raise InvalidInputError(
                    f"cascada {self.cascade_id}: el padre {event.parent} de {event.node} no aparece antes"
                )
            if event.time < last_time:
                raise InvalidInputError(f"cascada {self.cascade_id}: el tiempo retrocede en {event.node}")
            if event.time < 0:
                raise InvalidInputError(f"cascada {self.cascade_id}: tiempo negativo en {event.node}")
            activated[event.node] = event.time
            last_time = event.time

    def truncated(self, max_size: int) -> 'Cascade':
        """Prefijo temporal con los primeros max_size eventos"""
        if len(self.events) <= max_size:
            return self
        return Cascade(self.cascade_id, self.origin_node, self.events[:max_size], self.time_unit)

    def renamed(self, cascade_id: str) -> 'Cascade':
        return Cascade(cascade_id, self.origin_node, self.events, self.time_unit)


class Label(NamedTuple):
    """Etiqueta L_I: índice de clase y nombre del dataset de origen"""

    class_index: int
    class_name: str


@dataclass(frozen=True)
class CascadeGraph:
    """
    Grafo de cascada G_I(t) = (V, E) dentro de la ventana de observación

    Los nodos se guardan en orden de activación (el primero es la raíz) y las
    aristas son dirigidas padre -> hijo.
    """

    cascade_id: str
    nodes: Tuple[int, ...]
    edges: Tuple[Tuple[int, int], ...]
    node_times: Dict[int, float]
    label: Optional[Label] = None
    time_unit: Optional[str] = None

    @property
    def root(self) -> int:
        return self.nodes[0]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def with_label(self, label: Optional[Label]) -> 'CascadeGraph':
        return CascadeGraph(self.cascade_id, self.nodes, self.edges, self.node_times, label, self.time_unit)

    @cached_property
    def index_edges(self) -> np.ndarray:
        """Aristas (padre, hijo) como posiciones en `nodes`, forma (|E|, 2)"""
        position = {node: i for i, node in enumerate(self.nodes)}
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.asarray([(position[p], position[c]) for p, c in self.edges], dtype=np.int64)

    @cached_property
    def times(self) -> np.ndarray:
        """Tiempos de activación alineados con `nodes`"""
        return np.asarray([self.node_times[n] for n in self.nodes], dtype=np.float64)

    def undirected_adjacency(self):
        """Listas de adyacencia no dirigidas indexadas por posición"""
        adjacency = [[] for _ in self.nodes]
        for i, j in self.index_edges:
            adjacency[i].append(int(j))
            adjacency[j].append(int(i))
        return adjacency

    def check_invariants(self, strict_times: bool = False) -> None:
        """
        Árbol conexo con raíz en el origen y tiempos monótonos padre -> hijo

        Args:
            strict_times: Exigir tiempo del padre < tiempo del hijo (pasos sintéticos)

        Raises:
            InvalidInputError: Si el grafo viola alguna invariante
        """
        if not self.nodes:
            raise InvalidInputError(f"grafo {self.cascade_id} vacío")
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise InvalidInputError(f"grafo {self.cascade_id}: nodos repetidos")
        if len(self.edges) != len(self.nodes) - 1:
            raise InvalidInputError(f"grafo {self.cascade_id}: |E| != |V| - 1")
        if set(self.node_times) != node_set:
            raise InvalidInputError(f"grafo {self.cascade_id}: node_times no coincide con los nodos")
        parents = {}
        for parent, child in self.edges:
            if parent not in node_set or child not in node_set:
                raise InvalidInputError(f"grafo {self.cascade_id}: arista ({parent}, {child}) fuera del grafo")
            if child in parents:
                raise InvalidInputError(f"grafo {self.cascade_id}: {child} tiene dos padres")
            if child == self.root:
                raise InvalidInputError(f"grafo {self.cascade_id}: la raíz tiene padre")
            tp, tc = self.node_times[parent], self.node_times[child]
            if tp > tc or (strict_times and tp >= tc):
                raise InvalidInputError(f"grafo {self.cascade_id}: tiempo no monótono en ({parent}, {child})")
            parents[child] = parent
        # Conexión: cada nodo llega a la raíz
        for node in self.nodes[1:]:
            steps = 0
            current = node
            while current != self.root:
                current = parents.get(current)
                steps += 1
                if current is None or steps > len(self.nodes):
                    raise InvalidInputError(f"grafo {self.cascade_id}: {node} no llega a la raíz")


class FeatureVector(NamedTuple):
    """Atributos globales del grafo para los modelos de árboles"""

    avg_degree: float
    avg_path_length: float
    link_density: float
    clustering_coefficient: float

    def as_array(self) -> np.ndarray:
        return np.asarray(self, dtype=np.float64)


FEATURE_NAMES = ('avg_degree', 'avg_path_length', 'link_density', 'clustering_coefficient')


class NodeFeatureMatrix(NamedTuple):
    """Atributos por nodo (grado, distancia media, tiempo normalizado) alineados con graph.nodes"""

    nodes: Tuple[int, ...]
    values: np.ndarray

    @property
    def degree(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def avg_sp_length(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def timestamp(self) -> np.ndarray:
        return self.values[:, 2]
