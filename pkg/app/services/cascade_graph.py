"""
Construcción del grafo de cascada dentro de la ventana de observación
"""
from typing import Optional
import logging

from app.exceptions import InvalidInputError
from app.models.cascade import Cascade, CascadeGraph, Event, Label
from app.models.specs import ObservationWindow

logger = logging.getLogger(__name__)


def build_graph(cascade: Cascade, window: ObservationWindow, label: Optional[Label] = None) -> CascadeGraph:
    """
    Construye G_I(t) con los eventos dentro de la ventana

    La cota es max_steps para cascadas en pasos, max_time para segundos y el
    mínimo de ambas si la unidad no está declarada. El origen siempre se conserva.

    Args:
        cascade: Cascada válida
        window: Ventana de observación
        label: Etiqueta opcional a adjuntar

    Returns:
        CascadeGraph con nodos en orden de activación y aristas padre -> hijo

    Raises:
        InvalidInputError: Si la cascada está vacía

    Ejemplos:
        Cascada con un evento por paso 0..200 y ventana (100, 1 año) -> 101 nodos
    """
    if not cascade.events:
        raise InvalidInputError(f"cascada {cascade.cascade_id} vacía: no se puede construir el grafo")

    bound = window.bound_for(cascade.time_unit)
    origin = cascade.events[0]
    nodes = [origin.node]
    edges = []
    node_times = {origin.node: origin.time}
    for event in cascade.events[1:]:
        # Los tiempos no decrecen: el resto de eventos también queda fuera
        if event.time > bound:
            break
        nodes.append(event.node)
        edges.append((event.parent, event.node))
        node_times[event.node] = event.time

    return CascadeGraph(
        cascade_id=cascade.cascade_id,
        nodes=tuple(nodes),
        edges=tuple(edges),
        node_times=node_times,
        label=label,
        time_unit=cascade.time_unit,
    )


def graph_to_cascade(graph: CascadeGraph) -> Cascade:
    """
    Cascada equivalente a un grafo (eventos en el orden de sus nodos)

    Permite reconstruir o volver a serializar grafos ya recortados o aumentados.
    """
    parents = {child: parent for parent, child in graph.edges}
    events = [Event(graph.root, None, graph.node_times[graph.root])]
    for node in graph.nodes[1:]:
        events.append(Event(node, parents[node], graph.node_times[node]))
    return Cascade(graph.cascade_id, graph.root, tuple(events), graph.time_unit)
