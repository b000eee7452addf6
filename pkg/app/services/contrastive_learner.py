"""
Servicio de aprendizaje contrastivo de cascadas

Aumento de cascadas, pre-entrenamiento con NT-Xent sobre cascadas sin
etiquetar, ajuste supervisado y destilación maestro-estudiante.
"""
from typing import List, Optional, Sequence
import copy
import logging

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from app.exceptions import DegenerateModelError, InvalidInputError
from app.models.cascade import CascadeGraph
from app.models.specs import Algorithm, AugmentConfig, ContrastiveSpec, ObservationWindow
from app.services.graph_features import NODE_FEATURE_DIM
from app.services.graph_nn import (
    DTYPE, BestEpochTracker, GraphBatch, GraphConv, GraphInput, check_input_dim, linear, make_adam,
    make_batch, mean_pool, minibatches, predict_logits, predict_proba, prepare_graphs,
)
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

PHASE_PRETRAINED = 'pretrained'
PHASE_FINETUNED = 'finetuned'
PHASE_DISTILLED = 'distilled'
ENCODER_LAYERS = 2


def augment(g: CascadeGraph, cfg: AugmentConfig, rng: Optional[np.random.Generator] = None) -> CascadeGraph:
    """
    Vista aumentada de un grafo de cascada

    1. Descarta cada hoja actual (no raíz) con probabilidad leaf_drop_rate.
    2. Por cada nodo superviviente, con probabilidad node_add_rate agrega una
       hoja nueva cuyo padre se elige proporcional al grado; su tiempo es el del
       padre más la mediana de los intervalos entre eventos (con ruido).
    3. Multiplica cada tiempo no raíz por (1 + u), u ~ U[-time_jitter, time_jitter],
       corrige hijo >= padre y reordena por tiempo.

    Args:
        g: CascadeGraph válido
        cfg: AugmentConfig
        rng: Generador numpy (por defecto make_rng(cfg.seed))

    Returns:
        CascadeGraph que cumple las invariantes de árbol; la raíz nunca se elimina
    """
    rng = rng if rng is not None else make_rng(cfg.seed)
    root = g.root
    children = {node: 0 for node in g.nodes}
    parent_of = {}
    for parent, child in g.edges:
        children[parent] += 1
        parent_of[child] = parent

    # 1. Hojas descartadas
    if cfg.leaf_drop_rate > 0:
        leaves = [node for node in g.nodes if node != root and children[node] == 0]
        draws = rng.random(len(leaves))
        dropped = {leaf for leaf, draw in zip(leaves, draws) if draw < cfg.leaf_drop_rate}
    else:
        dropped = set()
    nodes = [node for node in g.nodes if node not in dropped]
    times = {node: g.node_times[node] for node in nodes}
    parent_of = {child: parent for child, parent in parent_of.items() if child not in dropped}

    # 2. Nodos agregados
    if cfg.node_add_rate > 0:
        degree = np.zeros(len(nodes))
        position = {node: i for i, node in enumerate(nodes)}
        for child, parent in parent_of.items():
            degree[position[child]] += 1
            degree[position[parent]] += 1
        weights = degree / degree.sum() if degree.sum() > 0 else np.full(len(nodes), 1.0 / len(nodes))
        gap = _median_gap([times[node] for node in nodes])
        triggers = int((rng.random(len(nodes)) < cfg.node_add_rate).sum())
        next_id = max(max(g.nodes), -1) + 1
        added = []
        for _ in range(triggers):
            # Padres solo entre los supervivientes
            parent = nodes[int(rng.choice(len(nodes), p=weights))]
            jitter = rng.uniform(-cfg.time_jitter, cfg.time_jitter) if cfg.time_jitter > 0 else 0.0
            new_node = next_id
            next_id += 1
            times[new_node] = times[parent] + max(gap * (1.0 + jitter), 0.0)
            parent_of[new_node] = parent
            added.append(new_node)
        nodes.extend(added)

    # 3. Ruido temporal multiplicativo
    if cfg.time_jitter > 0 and len(nodes) > 1:
        factors = 1.0 + rng.uniform(-cfg.time_jitter, cfg.time_jitter, size=len(nodes))
        for node, factor in zip(nodes, factors):
            if node != root:
                times[node] = times[node] * factor
        # Los padres preceden a sus hijos en `nodes`
        for node in nodes:
            if node != root:
                times[node] = max(times[node], times[parent_of[node]])
    if len(nodes) > 1:
        order = sorted(range(len(nodes)), key=lambda i: (times[nodes[i]], i))
        nodes = [nodes[i] for i in order]

    edges = tuple((parent_of[node], node) for node in nodes if node != root)
    return CascadeGraph(
        cascade_id=g.cascade_id,
        nodes=tuple(nodes),
        edges=edges,
        node_times={node: times[node] for node in nodes},
        label=g.label,
        time_unit=g.time_unit,
    )


def _median_gap(times) -> float:
    if len(times) < 2:
        return 1.0
    return float(np.median(np.diff(np.sort(np.asarray(times, dtype=np.float64)))))


def nt_xent_loss(z: torch.Tensor, temperature: float) -> torch.Tensor:
    """
    Pérdida NT-Xent sobre 2N proyecciones (z[i] y z[i + N] son vistas de la misma cascada)

    Para cada vista el positivo es su pareja y los negativos las otras 2N - 2
    vistas; se devuelve la media sobre las 2N vistas.

    Raises:
        InvalidInputError: N < 2 o alguna proyección de norma cero

    Ejemplos:
        Todas las proyecciones iguales -> ln(2N - 1)
    """
    if z.dim() != 2 or z.shape[0] % 2 != 0 or z.shape[0] < 4:
        raise InvalidInputError(f"NT-Xent requiere 2N proyecciones con N >= 2, forma {tuple(z.shape)}")
    norms = z.norm(dim=1)
    if (norms == 0).any():
        raise InvalidInputError("NT-Xent: proyección de norma cero")
    two_n = z.shape[0]
    n = two_n // 2
    unit = z / norms.unsqueeze(1)
    similarity = unit @ unit.T / temperature
    self_mask = torch.eye(two_n, dtype=torch.bool)
    similarity = similarity.masked_fill(self_mask, float('-inf'))
    targets = torch.cat([torch.arange(n, two_n), torch.arange(0, n)])
    return F.cross_entropy(similarity, targets)


class EncoderModel(nn.Module):
    """Codificador GCN (64, 64) + pooling medio, con cabeza de proyección 64 -> 64 -> 32"""

    def __init__(self, in_dim: int, hidden_dim: int, embedding_dim: int, projection_dim: int, seed: int = 0):
        super().__init__()
        rng = make_rng(seed)
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.embedding_dim = embedding_dim
        self.projection_dim = projection_dim
        dims = [in_dim, hidden_dim, embedding_dim]
        self.convs = nn.ModuleList(GraphConv(a, b, rng) for a, b in zip(dims[:-1], dims[1:]))
        self.projection = nn.Sequential(
            linear(embedding_dim, embedding_dim, rng),
            nn.ReLU(),
            linear(embedding_dim, projection_dim, rng),
        )
        self.losses: List[float] = []
        self.hyperparameters: dict = {}

    def embed(self, batch: GraphBatch) -> torch.Tensor:
        h = batch.features
        for conv in self.convs:
            h = conv(batch.adjacency, h)
        return mean_pool(h, batch.graph_index, batch.graph_count)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        return self.projection(self.embed(batch))


class ContrastiveClassifier(nn.Module):
    """Codificador más cabeza softmax lineal sobre el embedding"""

    algo = Algorithm.CONTRASTIVE

    def __init__(self, encoder: EncoderModel, n_classes: int, seed: int = 0, phase: str = PHASE_FINETUNED):
        super().__init__()
        self.encoder = encoder
        self.in_dim = encoder.in_dim
        self.n_classes = n_classes
        self.head = linear(encoder.embedding_dim, n_classes, make_rng(seed, 2))
        self.phase = phase
        self.best_epoch = 0
        self.val_scores: List[float] = []
        self.hyperparameters: dict = {}

    def embed(self, batch: GraphBatch) -> torch.Tensor:
        return self.encoder.embed(batch)

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        return self.head(self.encoder.embed(batch))

    def predict_proba(self, items: Sequence[GraphInput]) -> np.ndarray:
        return predict_proba(self, items)

    def predict(self, items: Sequence[GraphInput]) -> np.ndarray:
        return self.predict_proba(items).argmax(axis=1)


def new_encoder(spec: ContrastiveSpec, in_dim: int, seed: Optional[int] = None) -> EncoderModel:
    encoder = EncoderModel(
        in_dim, spec.hidden_dim, spec.embedding_dim, spec.projection_dim,
        seed=spec.seed if seed is None else seed
    )
    encoder.hyperparameters = {
        'in_dim': in_dim,
        'hidden_dim': spec.hidden_dim,
        'embedding_dim': spec.embedding_dim,
        'projection_dim': spec.projection_dim,
    }
    return encoder


def pretrain(
    unlabeled: Sequence[CascadeGraph],
    spec: ContrastiveSpec,
    aug_cfg: AugmentConfig,
    window: Optional[ObservationWindow] = None,
) -> EncoderModel:
    """
    Pre-entrenamiento contrastivo sobre cascadas sin etiquetar

    En cada época baraja los grafos, forma lotes de batch_size, crea dos vistas
    aumentadas por grafo y minimiza NT-Xent sobre las proyecciones con Adam.
    Los lotes finales con menos de 2 grafos se omiten.

    Args:
        unlabeled: Grafos de cascada (las etiquetas se ignoran)
        spec: ContrastiveSpec
        aug_cfg: AugmentConfig (su semilla se combina con la del pre-entrenamiento)
        window: Ventana para normalizar tiempos

    Returns:
        EncoderModel (la cabeza de proyección se conserva); losses guarda la pérdida por lote

    Raises:
        InvalidInputError: Menos grafos que batch_size
    """
    window = window or ObservationWindow()
    unlabeled = list(unlabeled)
    if len(unlabeled) < spec.batch_size or len(unlabeled) < 2:
        raise InvalidInputError(
            f"el pre-entrenamiento requiere al menos batch_size={spec.batch_size} grafos, hay {len(unlabeled)}"
        )
    encoder = new_encoder(spec, in_dim=NODE_FEATURE_DIM)
    optimizer = make_adam(encoder, spec.learning_rate)
    order_rng = make_rng(spec.seed, 1)
    aug_rng = make_rng(spec.seed, 3, aug_cfg.seed)

    encoder.train()
    for epoch in range(1, spec.pretrain_epochs + 1):
        epoch_losses = []
        for indices in minibatches(len(unlabeled), spec.batch_size, order_rng):
            if len(indices) < 2:
                continue
            graphs = [unlabeled[i] for i in indices]
            first = [augment(g, aug_cfg, aug_rng) for g in graphs]
            second = [augment(g, aug_cfg, aug_rng) for g in graphs]
            batch = make_batch(prepare_graphs(first + second, window))
            optimizer.zero_grad()
            loss = nt_xent_loss(encoder(batch), spec.temperature)
            loss.backward()
            optimizer.step()
            encoder.losses.append(loss.item())
            epoch_losses.append(loss.item())
        logger.debug(f"Pre-entrenamiento época {epoch}: NT-Xent medio {np.mean(epoch_losses):.4f}")

    encoder.eval()
    logger.info(
        f"Codificador pre-entrenado: {len(unlabeled)} grafos, {spec.pretrain_epochs} épocas, "
        f"pérdida final {encoder.losses[-1]:.4f}"
    )
    return encoder


def finetune(
    encoder: EncoderModel,
    labeled: Sequence[GraphInput],
    val: Sequence[GraphInput],
    spec: ContrastiveSpec,
    n_classes: Optional[int] = None,
) -> ContrastiveClassifier:
    """
    Ajuste supervisado: cabeza softmax lineal entrenada junto con el codificador

    Args:
        encoder: Codificador pre-entrenado (no se modifica; se copia)
        labeled: Grafos etiquetados de entrenamiento
        val: Grafos etiquetados de validación (vacío: se usa entrenamiento)
        spec: ContrastiveSpec (finetune_epochs, finetune_batch_size, learning_rate)
        n_classes: Número de clases del grupo

    Returns:
        ContrastiveClassifier seleccionado por macro-F1 de validación

    Raises:
        DegenerateModelError: Si el entrenamiento tiene una sola clase
    """
    labeled, val, n_classes = _check_labeled(labeled, val, n_classes, encoder.in_dim)
    model = ContrastiveClassifier(copy.deepcopy(encoder), n_classes, seed=spec.seed, phase=PHASE_FINETUNED)
    optimizer = make_adam(model, spec.learning_rate)
    rng = make_rng(spec.seed, 4)
    tracker = BestEpochTracker(n_classes)

    model.train()
    for epoch in range(1, spec.finetune_epochs + 1):
        for indices in minibatches(len(labeled), spec.finetune_batch_size, rng):
            batch = make_batch([labeled[i] for i in indices])
            optimizer.zero_grad()
            loss = F.cross_entropy(model(batch), batch.labels)
            loss.backward()
            optimizer.step()
        tracker.update(model, val, epoch)

    _finish(model, tracker, spec, n_classes, 'finetune_epochs', spec.finetune_epochs)
    logger.info(f"Ajuste fino: mejor época {tracker.best_epoch} (macro-F1 validación {tracker.best_score:.4f})")
    return model


def distillation_loss(
    student_logits: torch.Tensor,
    teacher_logits: torch.Tensor,
    labels: torch.Tensor,
    alpha: float,
    temperature: float,
) -> torch.Tensor:
    """
    alpha * CE(etiquetados) + (1 - alpha) * T^2 * KL(maestro_T || estudiante_T)

    Los elementos con etiqueta -1 solo aportan al término KL, que se promedia
    sobre todo el lote.
    """
    labeled_mask = labels >= 0
    if labeled_mask.any():
        ce = F.cross_entropy(student_logits[labeled_mask], labels[labeled_mask])
    else:
        ce = student_logits.sum() * 0.0
    soft_teacher = torch.softmax(teacher_logits / temperature, dim=1)
    log_student = torch.log_softmax(student_logits / temperature, dim=1)
    kl = F.kl_div(log_student, soft_teacher, reduction='batchmean')
    return alpha * ce + (1.0 - alpha) * temperature ** 2 * kl


def distill(
    teacher: ContrastiveClassifier,
    labeled: Sequence[GraphInput],
    unlabeled: Sequence[GraphInput],
    val: Sequence[GraphInput],
    spec: ContrastiveSpec,
    n_classes: Optional[int] = None,
) -> ContrastiveClassifier:
    """
    Destilación maestro-estudiante sobre etiquetados y no etiquetados

    El estudiante tiene la misma arquitectura; con student_init='teacher'
    parte de los pesos del maestro, con 'random' de una inicialización nueva.

    Args:
        teacher: Clasificador ajustado
        labeled: Grafos etiquetados
        unlabeled: Grafos sin etiquetar (sus etiquetas se ignoran)
        val: Validación para seleccionar la época
        spec: ContrastiveSpec (distill_epochs, distill_temperature, distill_alpha)
        n_classes: Número de clases del grupo

    Returns:
        ContrastiveClassifier (fase 'distilled')
    """
    n_classes = n_classes or teacher.n_classes
    labeled, val, n_classes = _check_labeled(labeled, val, n_classes, teacher.in_dim)
    unlabeled = [item._replace(label=-1) for item in unlabeled]
    check_input_dim(unlabeled, teacher.in_dim)
    pool = labeled + unlabeled

    if spec.student_init == 'teacher':
        student = copy.deepcopy(teacher)
        student.phase = PHASE_DISTILLED
    else:
        encoder = new_encoder(spec, teacher.in_dim, seed=spec.seed + 1)
        student = ContrastiveClassifier(encoder, n_classes, seed=spec.seed + 1, phase=PHASE_DISTILLED)
    teacher_logits = predict_logits(teacher, pool)

    optimizer = make_adam(student, spec.learning_rate)
    rng = make_rng(spec.seed, 5)
    tracker = BestEpochTracker(n_classes)

    student.train()
    for epoch in range(1, spec.distill_epochs + 1):
        for indices in minibatches(len(pool), spec.finetune_batch_size, rng):
            batch = make_batch([pool[i] for i in indices])
            optimizer.zero_grad()
            loss = distillation_loss(
                student(batch), teacher_logits[torch.from_numpy(indices)], batch.labels,
                spec.distill_alpha, spec.distill_temperature
            )
            loss.backward()
            optimizer.step()
        tracker.update(student, val, epoch)

    _finish(student, tracker, spec, n_classes, 'distill_epochs', spec.distill_epochs)
    student.hyperparameters.update(
        distill_alpha=spec.distill_alpha,
        distill_temperature=spec.distill_temperature,
        student_init=spec.student_init,
    )
    logger.info(
        f"Destilación: {len(labeled)} etiquetados + {len(unlabeled)} sin etiquetar, "
        f"mejor época {tracker.best_epoch} (macro-F1 validación {tracker.best_score:.4f})"
    )
    return student


def _check_labeled(labeled, val, n_classes, in_dim):
    labeled = list(labeled)
    val = list(val) or labeled
    if not labeled:
        raise InvalidInputError("no hay grafos etiquetados")
    if any(item.label < 0 for item in labeled + val):
        raise InvalidInputError("todos los grafos de entrenamiento y validación deben tener etiqueta")
    check_input_dim(labeled + val, in_dim)
    present = len({item.label for item in labeled})
    if present < 2:
        raise DegenerateModelError(
            f"el entrenamiento tiene {present} clase; se necesitan al menos 2", class_count=present
        )
    n_classes = int(n_classes or max(item.label for item in labeled) + 1)
    return labeled, val, n_classes


def _finish(model, tracker, spec, n_classes, epochs_key, epochs):
    tracker.restore(model)
    model.best_epoch = tracker.best_epoch
    model.val_scores = tracker.scores
    model.hyperparameters = dict(model.encoder.hyperparameters)
    model.hyperparameters.update({
        'n_classes': n_classes,
        epochs_key: epochs,
        'batch_size': spec.finetune_batch_size,
        'learning_rate': spec.learning_rate,
        'seed': spec.seed,
    })
    model.eval()
