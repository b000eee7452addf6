"""
Contenedor versionado de modelos (.npz con encabezado JSON)

El encabezado guarda format_version, algo, phase, hyperparameters y classes;
los parámetros van como arreglos numpy, así que load(save(m)) reproduce las
predicciones bit a bit.
"""
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence
import json
import logging

import numpy as np
import torch

from app.exceptions import ModelFormatError
from app.models.specs import Algorithm
from app.services.contrastive_learner import (
    PHASE_FINETUNED, PHASE_PRETRAINED, ContrastiveClassifier, EncoderModel,
)
from app.services.gcn_model import GcnModel
from app.services.tree_models import DecisionTree, ForestModel, GbtModel
from app.utils.files import atomic_write

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
HEADER_KEY = '__header__'
PARAM_PREFIX = 'param/'
TREE_FIELDS = ('feature', 'threshold', 'left', 'right', 'value')


class StoredModel(NamedTuple):
    model: Any
    classes: List[str]
    header: Dict[str, Any]


def save_model(model, path, classes: Sequence[str] = (), extra: Optional[dict] = None) -> None:
    """
    Guarda un modelo entrenado de cualquier familia

    Args:
        model: ForestModel, GbtModel, GcnModel, EncoderModel o ContrastiveClassifier
        path: Ruta destino (.npz)
        classes: Nombres de clase por índice
        extra: Campos adicionales del encabezado (ej: test_ids)
    """
    header = {
        'format_version': FORMAT_VERSION,
        'classes': list(classes),
        'hyperparameters': dict(getattr(model, 'hyperparameters', {}) or {}),
    }
    if extra:
        header.update(extra)

    if isinstance(model, ForestModel):
        header.update(algo=Algorithm.RANDOM_FOREST.value, phase='trained',
                      n_classes=model.n_classes, n_features=model.n_features)
        arrays = _stack_trees(model.trees)
    elif isinstance(model, GbtModel):
        header.update(algo=Algorithm.GBT.value, phase='trained', n_classes=model.n_classes,
                      n_features=model.n_features, learning_rate=model.learning_rate,
                      best_round=model.best_round)
        arrays = _stack_trees([tree for trees in model.rounds for tree in trees])
    elif isinstance(model, GcnModel):
        header.update(algo=Algorithm.GCN.value, phase='trained', in_dim=model.in_dim, hidden=model.hidden,
                      n_classes=model.n_classes, layers=len(model.convs), best_epoch=model.best_epoch)
        arrays = _state_arrays(model)
    elif isinstance(model, ContrastiveClassifier):
        header.update(algo=Algorithm.CONTRASTIVE.value, phase=model.phase, n_classes=model.n_classes,
                      encoder=model.encoder.hyperparameters, best_epoch=model.best_epoch)
        arrays = _state_arrays(model)
    elif isinstance(model, EncoderModel):
        header.update(algo=Algorithm.CONTRASTIVE.value, phase=PHASE_PRETRAINED, encoder=model.hyperparameters)
        arrays = _state_arrays(model)
    else:
        raise ModelFormatError(f"tipo de modelo no soportado: {type(model).__name__}", path=str(path))

    arrays[HEADER_KEY] = np.array(json.dumps(header, sort_keys=True))
    with atomic_write(path, mode='wb') as handle:
        np.savez(handle, **arrays)
    logger.info(f"Modelo {header['algo']} ({header['phase']}) guardado en {path}")


def load_model(path) -> StoredModel:
    """
    Carga un modelo guardado con save_model

    Raises:
        ModelFormatError: Archivo ilegible, versión desconocida o parámetros incompletos
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {key: data[key] for key in data.files}
    except (OSError, ValueError) as e:
        raise ModelFormatError(f"no se pudo leer el modelo: {e}", path=str(path))
    if HEADER_KEY not in arrays:
        raise ModelFormatError("el archivo no tiene encabezado de modelo", path=str(path))
    header = json.loads(str(arrays.pop(HEADER_KEY)))
    if header.get('format_version') != FORMAT_VERSION:
        raise ModelFormatError(f"versión de formato no soportada: {header.get('format_version')}", path=str(path))

    try:
        model = _rebuild(header, arrays)
    except (KeyError, RuntimeError, ValueError) as e:
        raise ModelFormatError(f"parámetros incompletos o incompatibles: {e}", path=str(path))
    logger.info(f"Modelo {header['algo']} ({header['phase']}) cargado de {path}")
    return StoredModel(model, list(header.get('classes', [])), header)


def _rebuild(header: dict, arrays: dict):
    algo = header['algo']
    hyper = header.get('hyperparameters', {})
    if algo == Algorithm.RANDOM_FOREST.value:
        return ForestModel(_unstack_trees(arrays), header['n_classes'], header['n_features'], hyper)
    if algo == Algorithm.GBT.value:
        trees = _unstack_trees(arrays)
        k = header['n_classes']
        rounds = [trees[i:i + k] for i in range(0, len(trees), k)]
        return GbtModel(rounds, k, header['n_features'], header['learning_rate'],
                        header['best_round'], hyperparameters=hyper)
    if algo == Algorithm.GCN.value:
        model = GcnModel(header['in_dim'], header['hidden'], header['n_classes'], layers=header['layers'])
        _load_state(model, arrays)
        model.best_epoch = header.get('best_epoch', 0)
        model.hyperparameters = hyper
        model.eval()
        return model
    if algo == Algorithm.CONTRASTIVE.value:
        enc = header['encoder']
        encoder = EncoderModel(enc['in_dim'], enc['hidden_dim'], enc['embedding_dim'], enc['projection_dim'])
        encoder.hyperparameters = enc
        if header['phase'] == PHASE_PRETRAINED:
            _load_state(encoder, arrays)
            encoder.eval()
            return encoder
        model = ContrastiveClassifier(encoder, header['n_classes'], phase=header.get('phase', PHASE_FINETUNED))
        _load_state(model, arrays)
        model.best_epoch = header.get('best_epoch', 0)
        model.hyperparameters = hyper
        model.eval()
        return model
    raise ValueError(f"algoritmo desconocido: {algo}")


def _stack_trees(trees: Sequence[DecisionTree]) -> Dict[str, np.ndarray]:
    arrays = {'tree_sizes': np.asarray([tree.node_count for tree in trees], dtype=np.int64)}
    for name in TREE_FIELDS:
        parts = [getattr(tree, name) for tree in trees]
        arrays[f"tree/{name}"] = np.concatenate(parts) if parts else np.zeros(0)
    return arrays


def _unstack_trees(arrays: dict) -> List[DecisionTree]:
    sizes = arrays['tree_sizes']
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [
        DecisionTree(**{name: arrays[f"tree/{name}"][bounds[i]:bounds[i + 1]] for name in TREE_FIELDS})
        for i in range(len(sizes))
    ]


def _state_arrays(module: torch.nn.Module) -> Dict[str, np.ndarray]:
    return {f"{PARAM_PREFIX}{name}": tensor.detach().cpu().numpy() for name, tensor in module.state_dict().items()}


def _load_state(module: torch.nn.Module, arrays: dict) -> None:
    state = {
        key[len(PARAM_PREFIX):]: torch.from_numpy(np.array(value))
        for key, value in arrays.items() if key.startswith(PARAM_PREFIX)
    }
    module.load_state_dict(state, strict=True)
