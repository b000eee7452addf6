"""
Configuración de pytest
"""
import pytest
import sys
import os

# Agregar el directorio raíz al path para imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app.models.cascade import Cascade, CascadeGraph, Event, Label, Network  # noqa: E402


def make_cascade(cascade_id, events, time_unit='steps'):
    """Cascada desde tuplas (nodo, padre, tiempo); la primera es el origen"""
    events = tuple(Event(*e) for e in events)
    return Cascade(cascade_id, events[0].node, events, time_unit)


def make_graph(cascade_id, events, label=None, time_unit='steps'):
    """Grafo de cascada desde tuplas (nodo, padre, tiempo)"""
    events = [Event(*e) for e in events]
    return CascadeGraph(
        cascade_id=cascade_id,
        nodes=tuple(e.node for e in events),
        edges=tuple((e.parent, e.node) for e in events[1:]),
        node_times={e.node: e.time for e in events},
        label=label,
        time_unit=time_unit,
    )


def chain_cascade(cascade_id, length, origin=0, time_unit='steps'):
    """Cascada en cadena origin -> origin+1 -> ... con un evento por paso"""
    events = [(origin, None, 0)] + [(origin + i, origin + i - 1, i) for i in range(1, length)]
    return make_cascade(cascade_id, events, time_unit)


def star_cascade(cascade_id, leaves, origin=0, time_unit='steps'):
    """Cascada en estrella: todas las hojas se activan en el paso 1"""
    events = [(origin, None, 0)] + [(origin + i, origin, 1) for i in range(1, leaves + 1)]
    return make_cascade(cascade_id, events, time_unit)


@pytest.fixture
def runner():
    """Fixture para el runner de la CLI (click)"""
    from click.testing import CliRunner
    return CliRunner()


@pytest.fixture
def star_network():
    """Estrella con centro 0 y 5 hojas"""
    return Network.from_pairs(6, [(0, i) for i in range(1, 6)])


@pytest.fixture
def path_network():
    """Camino 0-1-2-3-4"""
    return Network.from_pairs(5, [(i, i + 1) for i in range(4)])


@pytest.fixture
def triangle_network():
    return Network.from_pairs(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path_graph():
    """Grafo de cascada 0 -> 1 -> 2"""
    return make_graph('path', [(0, None, 0), (1, 0, 1), (2, 1, 2)])


@pytest.fixture
def star_graph():
    """Estrella K1,4 con raíz 0"""
    return make_graph('star', [(0, None, 0)] + [(i, 0, 1) for i in range(1, 5)])


@pytest.fixture
def two_class_graphs():
    """Cadenas (clase 0) y estrellas (clase 1) de tamaños variados"""
    chains = [
        make_graph(f"chain-{n}", [(0, None, 0)] + [(i, i - 1, i) for i in range(1, n)], Label(0, 'chain'))
        for n in range(4, 14)
    ]
    stars = [
        make_graph(f"star-{n}", [(0, None, 0)] + [(i, 0, 1) for i in range(1, n)], Label(1, 'star'))
        for n in range(4, 14)
    ]
    return chains + stars


@pytest.fixture
def testing_config(monkeypatch):
    """Preset de tests sin semilla de entorno"""
    monkeypatch.delenv('CASCADELAB_SEED', raising=False)
    monkeypatch.setenv('CASCADELAB_PRESET', 'testing')
    from app.config import TestingConfig
    return TestingConfig
