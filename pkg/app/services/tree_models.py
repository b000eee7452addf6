"""
Servicio de modelos de árboles: Random Forest (entropía) y Gradient Boosting multiclase

Los árboles se guardan como arreglos planos (feature, threshold, left, right,
value) para que la predicción sea vectorizada y el guardado en .npz directo.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional
import logging
import math

import numpy as np

from app.exceptions import DegenerateModelError, InvalidInputError
from app.models.specs import Algorithm, TrainSpec
from app.utils.seeding import make_rng

logger = logging.getLogger(__name__)

LEAF = -1


def entropy(distribution) -> float:
    """
    Entropía de Shannon en bits de una distribución (o conteos) de clases

    Ejemplos:
        entropy([0.5, 0.5]) -> 1.0
    """
    p = np.asarray(distribution, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        return 0.0
    p = p[p > 0] / total
    return float(-(p * np.log2(p)).sum())


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Entropía (bits) de cada fila de una matriz de conteos"""
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide='ignore', invalid='ignore'):
        p = np.where(totals > 0, counts / np.maximum(totals, 1), 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=1)


def softmax(raw: np.ndarray) -> np.ndarray:
    shifted = raw - raw.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


@dataclass
class DecisionTree:
    """Árbol binario con cortes x[feature] <= threshold hacia la izquierda"""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Índice de la hoja alcanzada por cada fila"""
        index = np.zeros(len(X), dtype=np.int64)
        active = self.feature[index] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            nodes = index[rows]
            go_left = X[rows, self.feature[nodes]] <= self.threshold[nodes]
            index[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = self.feature[index] != LEAF
        return index

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


class _TreeGrower:
    """Acumula nodos de un árbol en construcción"""

    def __init__(self):
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: list = []

    def add(self, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> DecisionTree:
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )


def _candidate_splits(x: np.ndarray):
    """Orden estable, valores ordenados y posiciones donde el valor cambia"""
    order = np.argsort(x, kind='stable')
    xs = x[order]
    positions = np.nonzero(xs[:-1] < xs[1:])[0]
    return order, xs, positions


def _threshold(xs: np.ndarray, position: int) -> float:
    low, high = xs[position], xs[position + 1]
    middle = 0.5 * (low + high)
    return float(middle) if low <= middle < high else float(low)


def _best_entropy_split(X, onehot, features):
    """Mejor corte por ganancia de información entre las columnas dadas"""
    n = len(X)
    parent_counts = onehot.sum(axis=0)
    parent = entropy(parent_counts)
    best = (0.0, None, None)
    for f in features:
        order, xs, positions = _candidate_splits(X[:, f])
        if len(positions) == 0:
            continue
        cumulative = np.cumsum(onehot[order], axis=0)
        left_counts = cumulative[positions]
        right_counts = parent_counts - left_counts
        n_left = positions + 1.0
        n_right = n - n_left
        children = (n_left * _entropy_rows(left_counts) + n_right * _entropy_rows(right_counts)) / n
        gains = parent - children
        i = int(np.argmax(gains))
        if gains[i] > best[0] + 1e-12:
            best = (float(gains[i]), f, _threshold(xs, positions[i]))
    return best


def _grow_classification_tree(X, y, n_classes, max_features, min_samples_split, max_depth, rng) -> DecisionTree:
    grower = _TreeGrower()
    onehot_all = np.eye(n_classes)[y]
    n_features = X.shape[1]

    def leaf_value(rows):
        counts = onehot_all[rows].sum(axis=0)
        return counts / counts.sum()

    root_rows = np.arange(len(X))
    stack = [(grower.add(leaf_value(root_rows)), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        counts = onehot_all[rows].sum(axis=0)
        if np.count_nonzero(counts) <= 1 or len(rows) < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        # Se evalúan max_features columnas no constantes en orden aleatorio
        order = rng.permutation(n_features)
        chosen = []
        for f in order:
            column = X[rows, f]
            if column.min() < column.max():
                chosen.append(int(f))
            if len(chosen) == max_features:
                break
        gain, feature, threshold = _best_entropy_split(X[rows], onehot_all[rows], chosen)
        if feature is None or gain <= 0:
            continue
        mask = X[rows, feature] <= threshold
        left_rows, right_rows = rows[mask], rows[~mask]
        left = grower.add(leaf_value(left_rows))
        right = grower.add(leaf_value(right_rows))
        grower.split(node, feature, threshold, left, right)
        stack.append((right, right_rows, depth + 1))
        stack.append((left, left_rows, depth + 1))
    return grower.build()


def _grow_regression_tree(X, residual, max_depth, min_samples_split) -> DecisionTree:
    """Árbol de regresión de cortes exactos (error cuadrático), hojas = media del residuo"""
    grower = _TreeGrower()
    root_rows = np.arange(len(X))
    stack = [(grower.add(float(residual.mean())), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or len(rows) < min_samples_split:
            continue
        r = residual[rows]
        n = len(rows)
        total, total_sq = r.sum(), (r * r).sum()
        parent_sse = total_sq - total * total / n
        best = (1e-12, None, None)
        for f in range(X.shape[1]):
            order, xs, positions = _candidate_splits(X[rows, f])
            if len(positions) == 0:
                continue
            cumulative = np.cumsum(r[order])
            cumulative_sq = np.cumsum(r[order] ** 2)
            n_left = positions + 1.0
            n_right = n - n_left
            s_left = cumulative[positions]
            s_right = total - s_left
            sse = (cumulative_sq[positions] - s_left ** 2 / n_left) + (
                (total_sq - cumulative_sq[positions]) - s_right ** 2 / n_right
            )
            gains = parent_sse - sse
            i = int(np.argmax(gains))
            if gains[i] > best[0]:
                best = (float(gains[i]), f, _threshold(xs, positions[i]))
        _, feature, threshold = best
        if feature is None:
            continue
        mask = X[rows, feature] <= threshold
        left_rows, right_rows = rows[mask], rows[~mask]
        left = grower.add(float(residual[left_rows].mean()))
        right = grower.add(float(residual[right_rows].mean()))
        grower.split(node, feature, threshold, left, right)
        stack.append((right, right_rows, depth + 1))
        stack.append((left, left_rows, depth + 1))
    return grower.build()


@dataclass
class ForestModel:
    """Bosque aleatorio: la probabilidad es la media de las distribuciones de hoja"""

    trees: List[DecisionTree]
    n_classes: int
    n_features: int
    hyperparameters: dict = field(default_factory=dict)

    algo = Algorithm.RANDOM_FOREST

    def predict_proba(self, X) -> np.ndarray:
        X = _check_features(X, self.n_features)
        total = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


@dataclass
class GbtModel:
    """Boosting multiclase: rondas de K árboles de regresión sobre el residuo y - p"""

    rounds: List[List[DecisionTree]]
    n_classes: int
    n_features: int
    learning_rate: float
    best_round: int
    train_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    hyperparameters: dict = field(default_factory=dict)

    algo = Algorithm.GBT

    def raw_scores(self, X) -> np.ndarray:
        X = _check_features(X, self.n_features)
        raw = np.zeros((len(X), self.n_classes))
        for trees in self.rounds[:self.best_round]:
            for k, tree in enumerate(trees):
                raw[:, k] += self.learning_rate * tree.predict(X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.raw_scores(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


class EarlyStopping:
    """
    Detiene el entrenamiento tras `patience` pérdidas consecutivas sin mejora

    La primera pérdida registrada fija la referencia (ronda 0).
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = math.inf
        self.best_round = 0
        self.stale = 0
        self.round = -1

    def update(self, loss: float) -> bool:
        """Registra la pérdida de la ronda siguiente; True si hay que detenerse"""
        self.round += 1
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_round = self.round
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def cross_entropy(proba: np.ndarray, y: np.ndarray) -> float:
    """Entropía cruzada media (nats)"""
    picked = proba[np.arange(len(y)), y]
    return float(-np.log(np.clip(picked, 1e-300, None)).mean())


def train_random_forest(X, y, spec: TrainSpec, n_classes: Optional[int] = None, threads: int = 1) -> ForestModel:
    """
    Entrena un bosque aleatorio con cortes por ganancia de información

    Cada árbol i usa una muestra bootstrap del tamaño del entrenamiento y su
    propio generador derivado de (spec.seed, i), así que el resultado no depende
    de `threads`.

    Args:
        X: Matriz (n, d) de FeatureVectors
        y: Índices de clase
        spec: TrainSpec (n_trees, min_samples_split, max_depth, seed)
        n_classes: Número de clases del grupo (por defecto max(y) + 1)
        threads: Hilos para entrenar árboles en paralelo

    Returns:
        ForestModel

    Raises:
        DegenerateModelError: Si el entrenamiento tiene una sola clase
    """
    X, y, n_classes = _check_training_set(X, y, n_classes)
    n, d = X.shape
    max_features = max(1, math.ceil(math.sqrt(d)))

    def grow(index):
        rng = make_rng(spec.seed, index)
        sample = rng.integers(0, n, size=n)
        return _grow_classification_tree(
            X[sample], y[sample], n_classes, max_features, spec.min_samples_split, spec.max_depth, rng
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(spec.n_trees)))
    else:
        trees = [grow(i) for i in range(spec.n_trees)]

    logger.info(
        f"Random Forest entrenado: {len(trees)} árboles, {n} ejemplos, {n_classes} clases, "
        f"{max_features} atributos por corte"
    )
    return ForestModel(
        trees=trees,
        n_classes=n_classes,
        n_features=d,
        hyperparameters={
            'n_trees': spec.n_trees,
            'min_samples_split': spec.min_samples_split,
            'max_depth': spec.max_depth,
            'max_features': max_features,
            'seed': spec.seed,
        },
    )


def train_gbt(X, y, X_val, y_val, spec: TrainSpec, n_classes: Optional[int] = None) -> GbtModel:
    """
    Gradient boosting multiclase con objetivo softmax y parada temprana

    Los puntajes parten de cero (pérdida inicial ln K). En cada ronda se ajusta
    un árbol de regresión por clase al residuo y_k - p_k y se suma con paso
    learning_rate. Se detiene tras early_stopping_patience rondas sin mejorar la
    pérdida de validación o en max_rounds, y conserva best_round rondas.

    Args:
        X, y: Entrenamiento
        X_val, y_val: Validación (no vacía)
        spec: TrainSpec (learning_rate, max_depth, max_rounds, early_stopping_patience)
        n_classes: Número de clases del grupo

    Returns:
        GbtModel truncado en best_round
    """
    X, y, n_classes = _check_training_set(X, y, n_classes)
    X_val = _check_features(X_val, X.shape[1])
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(X_val) == 0:
        raise InvalidInputError("el conjunto de validación de GBT está vacío")
    if y_val.min() < 0 or y_val.max() >= n_classes:
        raise InvalidInputError("la validación contiene clases fuera del grupo")

    lr = spec.learning_rate
    max_depth = spec.max_depth or 6
    targets = np.eye(n_classes)[y]
    raw = np.zeros((len(X), n_classes))
    raw_val = np.zeros((len(X_val), n_classes))
    stopper = EarlyStopping(spec.early_stopping_patience)
    train_losses = [cross_entropy(softmax(raw), y)]
    val_losses = [cross_entropy(softmax(raw_val), y_val)]
    stopper.update(val_losses[0])
    rounds: List[List[DecisionTree]] = []

    for round_index in range(1, spec.max_rounds + 1):
        residual = targets - softmax(raw)
        trees = [
            _grow_regression_tree(X, residual[:, k], max_depth, spec.min_samples_split)
            for k in range(n_classes)
        ]
        for k, tree in enumerate(trees):
            raw[:, k] += lr * tree.predict(X)
            raw_val[:, k] += lr * tree.predict(X_val)
        rounds.append(trees)
        train_losses.append(cross_entropy(softmax(raw), y))
        val_losses.append(cross_entropy(softmax(raw_val), y_val))
        if stopper.update(val_losses[-1]):
            logger.info(f"GBT: parada temprana en la ronda {round_index} (mejor ronda {stopper.best_round})")
            break

    best_round = stopper.best_round
    logger.info(
        f"GBT entrenado: {len(rounds)} rondas, mejor ronda {best_round}, "
        f"pérdida de validación {val_losses[best_round]:.4f}"
    )
    return GbtModel(
        rounds=rounds[:best_round],
        n_classes=n_classes,
        n_features=X.shape[1],
        learning_rate=lr,
        best_round=best_round,
        train_losses=train_losses,
        val_losses=val_losses,
        hyperparameters={
            'learning_rate': lr,
            'max_depth': max_depth,
            'max_rounds': spec.max_rounds,
            'early_stopping_patience': spec.early_stopping_patience,
            'min_samples_split': spec.min_samples_split,
            'rounds_trained': len(rounds),
        },
    )


def _check_training_set(X, y, n_classes):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise InvalidInputError(f"datos de entrenamiento con forma inválida: X={X.shape}, y={y.shape}")
    if not np.isfinite(X).all():
        raise InvalidInputError("los atributos de entrenamiento contienen valores no finitos")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= n_classes:
        raise InvalidInputError("etiquetas fuera del rango de clases")
    present = len(np.unique(y))
    if present < 2:
        raise DegenerateModelError(
            f"el entrenamiento tiene {present} clase; se necesitan al menos 2", class_count=present
        )
    return X, y, n_classes


def _check_features(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise InvalidInputError(f"se esperaban {n_features} atributos, se recibieron {X.shape[-1]}")
    return X
