"""
Servicio GCN: tres capas de convolución, pooling medio y cabeza softmax lineal
"""
from typing import List, Optional, Sequence
import logging

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from app.exceptions import InvalidInputError
from app.models.specs import Algorithm, TrainSpec
from app.services.graph_nn import (
    BestEpochTracker, GraphBatch, GraphConv, GraphInput, check_input_dim, linear, make_adam, make_batch,
    mean_pool, minibatches, predict_proba,
)
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

GCN_LAYERS = 3


class GcnModel(nn.Module):
    """GCN para clasificación de grafos de cascada"""

    algo = Algorithm.GCN

    def __init__(self, in_dim: int, hidden: int, n_classes: int, seed: int = 0, layers: int = GCN_LAYERS):
        super().__init__()
        rng = make_rng(seed)
        self.in_dim = in_dim
        self.hidden = hidden
        self.n_classes = n_classes
        dims = [in_dim] + [hidden] * layers
        self.convs = nn.ModuleList(GraphConv(a, b, rng) for a, b in zip(dims[:-1], dims[1:]))
        self.head = linear(hidden, n_classes, rng)
        self.best_epoch = 0
        self.val_scores: List[float] = []
        self.hyperparameters: dict = {}

    def embed(self, batch: GraphBatch) -> torch.Tensor:
        """Embedding de cada grafo (pooling medio tras las convoluciones)"""
        h = batch.features
        for conv in self.convs:
            h = conv(batch.adjacency, h)
        return mean_pool(h, batch.graph_index, batch.graph_count)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        return self.head(self.embed(batch))

    def predict_proba(self, items: Sequence[GraphInput]) -> np.ndarray:
        return predict_proba(self, items)

    def predict(self, items: Sequence[GraphInput]) -> np.ndarray:
        return self.predict_proba(items).argmax(axis=1)


def batch_loss(model: nn.Module, items: Sequence[GraphInput]) -> torch.Tensor:
    """Entropía cruzada media de un mini-lote etiquetado"""
    batch = make_batch(items)
    return F.cross_entropy(model(batch), batch.labels)


def train_gcn(
    train: Sequence[GraphInput],
    val: Sequence[GraphInput],
    spec: TrainSpec,
    n_classes: Optional[int] = None,
) -> GcnModel:
    """
    Entrena la GCN con Adam en mini-lotes y selecciona la mejor época

    Args:
        train: Grafos etiquetados de entrenamiento
        val: Grafos etiquetados de validación (vacío: se usa entrenamiento)
        spec: TrainSpec (hidden, batch_size, epochs, learning_rate, seed)
        n_classes: Número de clases del grupo

    Returns:
        GcnModel con los parámetros de la época de mejor macro-F1 de validación

    Raises:
        InvalidInputError: Entrenamiento vacío o atributos incompatibles con la primera capa
    """
    train = list(train)
    val = list(val) or train
    if not train:
        raise InvalidInputError("el entrenamiento de la GCN está vacío")
    if any(item.label < 0 for item in train + val):
        raise InvalidInputError("la GCN requiere grafos etiquetados")
    in_dim = train[0].features.shape[1]
    check_input_dim(train + val, in_dim)
    n_classes = int(n_classes or max(item.label for item in train) + 1)

    model = GcnModel(in_dim, spec.hidden, n_classes, seed=spec.seed)
    optimizer = make_adam(model, spec.learning_rate)
    rng = make_rng(spec.seed, 1)
    tracker = BestEpochTracker(n_classes)

    model.train()
    for epoch in range(1, spec.epochs + 1):
        losses = []
        for indices in minibatches(len(train), spec.batch_size, rng):
            optimizer.zero_grad()
            loss = batch_loss(model, [train[i] for i in indices])
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        score = tracker.update(model, val, epoch)
        logger.debug(f"GCN época {epoch}: pérdida {np.mean(losses):.4f}, macro-F1 validación {score:.4f}")

    tracker.restore(model)
    model.best_epoch = tracker.best_epoch
    model.val_scores = tracker.scores
    model.hyperparameters = {
        'in_dim': in_dim,
        'hidden': spec.hidden,
        'n_classes': n_classes,
        'batch_size': spec.batch_size,
        'epochs': spec.epochs,
        'learning_rate': spec.learning_rate,
        'seed': spec.seed,
    }
    model.eval()
    logger.info(
        f"GCN entrenada: {len(train)} grafos, mejor época {tracker.best_epoch} "
        f"(macro-F1 validación {tracker.best_score:.4f})"
    )
    return model
