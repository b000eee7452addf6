"""
Piezas comunes de las redes sobre grafos de cascada (GCN y codificador contrastivo)

Los grafos de un mini-lote se apilan en una matriz de adyacencia dispersa
diagonal por bloques; el pooling medio usa index_add sobre el índice de grafo.
Todo el cálculo es en float64 sobre CPU.
"""
from typing import Iterable, List, NamedTuple, Optional, Sequence
import copy
import logging

import numpy as np
import torch
from torch import nn

from app.exceptions import InvalidInputError
from app.models.cascade import CascadeGraph
from app.models.specs import ObservationWindow
from app.services.graph_features import model_inputs, node_features
from app.services.metrics import macro_f1_score

logger = logging.getLogger(__name__)

DTYPE = torch.float64
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
PREDICT_CHUNK = 256


class GraphInput(NamedTuple):
    """Grafo listo para la red: atributos de nodo, Â en formato COO y etiqueta (-1 sin etiqueta)"""

    cascade_id: str
    features: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    label: int = -1

    @property
    def node_count(self) -> int:
        return len(self.features)


class GraphBatch(NamedTuple):
    features: torch.Tensor
    adjacency: torch.Tensor
    graph_index: torch.Tensor
    graph_count: int
    labels: torch.Tensor


def normalized_adjacency(node_count: int, edges) -> tuple:
    """
    Â = D̃^(-1/2) (A + I) D̃^(-1/2) de la vista no dirigida, como tripletas COO

    Returns:
        (rows, cols, values)
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    degree = np.bincount(edges.ravel(), minlength=node_count).astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(degree)
    loops = np.arange(node_count, dtype=np.int64)
    rows = np.concatenate([loops, edges[:, 0], edges[:, 1]])
    cols = np.concatenate([loops, edges[:, 1], edges[:, 0]])
    values = inv_sqrt[rows] * inv_sqrt[cols]
    return rows, cols, values


def graph_input(features: np.ndarray, edges, cascade_id: str = '', label: int = -1) -> GraphInput:
    """Construye un GraphInput desde una matriz de atributos y aristas por posición"""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or len(features) == 0:
        raise InvalidInputError(f"matriz de atributos inválida para {cascade_id}: {features.shape}")
    rows, cols, values = normalized_adjacency(len(features), edges)
    return GraphInput(cascade_id, features, rows, cols, values, int(label))


def prepare_graphs(graphs: Iterable[CascadeGraph], window: ObservationWindow) -> List[GraphInput]:
    """
    Convierte grafos de cascada en entradas de red

    Args:
        graphs: CascadeGraphs (con o sin etiqueta)
        window: Ventana usada para normalizar los tiempos

    Returns:
        Lista de GraphInput en el mismo orden
    """
    prepared = []
    for g in graphs:
        matrix = model_inputs(node_features(g, window))
        label = g.label.class_index if g.label is not None else -1
        prepared.append(graph_input(matrix, g.index_edges, g.cascade_id, label))
    return prepared


def make_batch(items: Sequence[GraphInput]) -> GraphBatch:
    """Apila grafos en un lote con adyacencia diagonal por bloques"""
    if not items:
        raise InvalidInputError("lote vacío")
    offsets = np.cumsum([0] + [item.node_count for item in items])
    total = int(offsets[-1])
    rows = np.concatenate([item.rows + offsets[i] for i, item in enumerate(items)])
    cols = np.concatenate([item.cols + offsets[i] for i, item in enumerate(items)])
    values = np.concatenate([item.values for item in items])
    adjacency = torch.sparse_coo_tensor(
        torch.from_numpy(np.vstack([rows, cols])),
        torch.from_numpy(values),
        (total, total),
        dtype=DTYPE,
    ).coalesce()
    features = torch.from_numpy(np.concatenate([item.features for item in items])).to(DTYPE)
    graph_index = torch.from_numpy(np.repeat(np.arange(len(items)), [item.node_count for item in items]))
    labels = torch.tensor([item.label for item in items], dtype=torch.long)
    return GraphBatch(features, adjacency, graph_index, len(items), labels)


def mean_pool(h: torch.Tensor, graph_index: torch.Tensor, graph_count: int) -> torch.Tensor:
    """Promedio de las filas de nodo de cada grafo"""
    pooled = torch.zeros(graph_count, h.shape[1], dtype=h.dtype).index_add_(0, graph_index, h)
    counts = torch.bincount(graph_index, minlength=graph_count).to(h.dtype).clamp(min=1)
    return pooled / counts.unsqueeze(1)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> torch.Tensor:
    """Inicialización Glorot uniforme desde un generador numpy"""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return torch.from_numpy(rng.uniform(-bound, bound, size=(fan_in, fan_out)))


class GraphConv(nn.Module):
    """Capa H' = ReLU(Â H W) sin sesgo"""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = nn.Parameter(glorot(rng, in_dim, out_dim))

    def forward(self, adjacency: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        return torch.relu(torch.sparse.mm(adjacency, h @ self.weight))


def linear(in_dim: int, out_dim: int, rng: np.random.Generator) -> nn.Linear:
    """nn.Linear en float64 con pesos Glorot y sesgo cero"""
    layer = nn.Linear(in_dim, out_dim, dtype=DTYPE)
    with torch.no_grad():
        layer.weight.copy_(glorot(rng, in_dim, out_dim).T)
        layer.bias.zero_()
    return layer


def check_input_dim(items: Sequence[GraphInput], in_dim: int) -> None:
    for item in items:
        if item.features.shape[1] != in_dim:
            raise InvalidInputError(
                f"el grafo {item.cascade_id} tiene {item.features.shape[1]} atributos "
                f"y la primera capa espera {in_dim}"
            )


def minibatches(count: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Índices barajados partidos en lotes de batch_size (el último puede ser menor)"""
    order = rng.permutation(count)
    return [order[i:i + batch_size] for i in range(0, count, batch_size)]


def make_adam(module: nn.Module, learning_rate: float) -> torch.optim.Adam:
    return torch.optim.Adam(module.parameters(), lr=learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS)


def predict_logits(model: nn.Module, items: Sequence[GraphInput]) -> torch.Tensor:
    """Logits de un clasificador de grafos por trozos, sin gradiente"""
    was_training = model.training
    model.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(items), PREDICT_CHUNK):
            chunks.append(model(make_batch(items[start:start + PREDICT_CHUNK])))
    model.train(was_training)
    return torch.cat(chunks) if chunks else torch.zeros((0, 0), dtype=DTYPE)


def predict_proba(model: nn.Module, items: Sequence[GraphInput]) -> np.ndarray:
    """Probabilidades por clase (filas suman 1)"""
    if not items:
        raise InvalidInputError("no hay grafos para predecir")
    check_input_dim(items, model.in_dim)
    return torch.softmax(predict_logits(model, items), dim=1).numpy()


class BestEpochTracker:
    """
    Conserva los parámetros de la época con mejor macro-F1 de validación

    Los empates se resuelven a favor de la época más reciente.
    """

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.best_score = -1.0
        self.best_epoch = 0
        self.best_state: Optional[dict] = None
        self.scores: List[float] = []

    def update(self, model: nn.Module, items: Sequence[GraphInput], epoch: int) -> float:
        labels = np.asarray([item.label for item in items])
        predicted = predict_logits(model, items).argmax(dim=1).numpy()
        score = macro_f1_score(labels, predicted, self.n_classes)
        self.scores.append(score)
        if score >= self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            self.best_state = copy.deepcopy(model.state_dict())
        return score

    def restore(self, model: nn.Module) -> None:
        if self.best_state is not None:
            model.load_state_dict(self.best_state)


def labeled_only(items: Sequence[GraphInput]) -> List[GraphInput]:
    return [item for item in items if item.label >= 0]
