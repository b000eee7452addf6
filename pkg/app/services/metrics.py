"""
Métricas de clasificación: matriz de confusión y F1 macro
"""
from typing import Optional, Sequence
import logging

import numpy as np

from app.exceptions import InvalidInputError
from app.models.reports import EvalReport

logger = logging.getLogger(__name__)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Matriz K x K (filas = clase real, columnas = clase predicha)"""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise InvalidInputError("predicciones y etiquetas con longitudes distintas")
    if len(y_true) and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= n_classes):
        raise InvalidInputError(f"etiquetas fuera del conjunto de {n_classes} clases")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def f1_from_confusion(matrix: np.ndarray) -> np.ndarray:
    """
    F1 por clase desde la matriz de confusión

    Convención: F1 = 0 cuando precisión + recall = 0.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    tp = np.diag(matrix)
    predicted = matrix.sum(axis=0)
    actual = matrix.sum(axis=1)
    # 2PR/(P+R) = 2TP/(predichos + reales)
    denominator = predicted + actual
    f1 = np.zeros(len(matrix))
    mask = denominator > 0
    f1[mask] = 2.0 * tp[mask] / denominator[mask]
    return f1


def macro_f1_score(y_true, y_pred, n_classes: int) -> float:
    """F1 macro (media no ponderada) sin construir el reporte"""
    if len(y_true) == 0:
        raise InvalidInputError("no hay predicciones para evaluar")
    return float(f1_from_confusion(confusion_matrix(y_true, y_pred, n_classes)).mean())


def macro_f1(y_true, y_pred, class_names: Sequence[str], **metadata) -> EvalReport:
    """
    Reporte de evaluación con F1 por clase, F1 macro y matriz de confusión

    Args:
        y_true: Índices de clase reales
        y_pred: Índices de clase predichos
        class_names: Nombres de clase por índice (K = len(class_names))
        metadata: Campos adicionales del reporte (group, algo, seed...)

    Returns:
        EvalReport

    Raises:
        InvalidInputError: Si no hay predicciones o hay etiquetas fuera del conjunto

    Ejemplos:
        Matriz [[2, 0], [1, 1]] -> F1 = (0.8, 2/3), macro = 11/15
    """
    if len(y_true) == 0:
        raise InvalidInputError("no hay predicciones para evaluar")
    class_names = list(class_names)
    matrix = confusion_matrix(y_true, y_pred, len(class_names))
    per_class = f1_from_confusion(matrix)
    return EvalReport(
        class_names=class_names,
        per_class_f1={name: float(value) for name, value in zip(class_names, per_class)},
        macro_f1=float(per_class.mean()),
        confusion_matrix=matrix.tolist(),
        **metadata,
    )


def report_from_pairs(pairs, class_names: Optional[Sequence[str]] = None, **metadata) -> EvalReport:
    """
    Reporte desde pares (etiqueta predicha, etiqueta real)

    Acepta Labels o índices; sin class_names se usan los índices como nombres.
    """
    pairs = list(pairs)
    if not pairs:
        raise InvalidInputError("no hay predicciones para evaluar")
    predicted = [getattr(p, 'class_index', p) for p, _ in pairs]
    actual = [getattr(t, 'class_index', t) for _, t in pairs]
    if class_names is None:
        names = {}
        for p, t in pairs:
            for label in (p, t):
                if hasattr(label, 'class_name'):
                    names[label.class_index] = label.class_name
        k = max(max(predicted), max(actual)) + 1
        class_names = [names.get(i, str(i)) for i in range(k)]
    return macro_f1(actual, predicted, class_names, **metadata)
