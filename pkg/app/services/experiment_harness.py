"""
Servicio del arnés experimental

Construcción de grupos etiquetados, partición estratificada, entrenamiento de
las cuatro familias de modelos sobre los mismos datos, reportes de F1 macro y
el experimento de fracción de etiquetas.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple
import logging
import time

import numpy as np

from app.exceptions import InvalidConfigError, InvalidInputError, LeakageError
from app.models.cascade import Cascade, CascadeGraph, Label
from app.models.reports import EvalReport
from app.models.specs import (
    Algorithm, ExperimentSpecs, GroupSpec, ObservationWindow, PretrainSource, SplitSpec, parse_enum,
)
from app.services import contrastive_learner, gcn_model, tree_models
from app.services.cascade_graph import build_graph
from app.services.cascade_io import parse_cascades
from app.services.graph_features import graph_features
from app.services.graph_nn import prepare_graphs
from app.services.metrics import macro_f1
from app.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

# Umbrales de tamaño medio para agrupar datasets reales
LARGE_GROUP_MIN_SIZE = 100
MEDIUM_GROUP_MIN_SIZE = 50
SIZE_GROUPS = ('Large', 'Medium', 'Small')


@dataclass(frozen=True)
class GroupDataset:
    """
    Cascadas etiquetadas de un grupo

    Los ids llevan espacio de nombres <clase>/<id>; source_ids guarda el id
    original de cada cascada en su fuente (vacío si no hubo renombrado).
    """

    name: str
    cascades: Tuple[Cascade, ...]
    labels: Tuple[Label, ...]
    class_names: Tuple[str, ...]
    source_ids: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return len(self.cascades)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def cascade_ids(self) -> List[str]:
        return [c.cascade_id for c in self.cascades]

    @property
    def original_ids(self) -> List[str]:
        """Ids en la fuente de origen (los propios si no hubo renombrado)"""
        return list(self.source_ids) if self.source_ids else self.cascade_ids

    def class_indices(self) -> np.ndarray:
        return np.asarray([label.class_index for label in self.labels], dtype=np.int64)

    def subset(self, indices: Iterable[int]) -> 'GroupDataset':
        indices = list(indices)
        return GroupDataset(
            self.name,
            tuple(self.cascades[i] for i in indices),
            tuple(self.labels[i] for i in indices),
            self.class_names,
            tuple(self.source_ids[i] for i in indices) if self.source_ids else (),
        )

    def graphs(self, window: ObservationWindow) -> List[CascadeGraph]:
        """Grafos de cascada etiquetados dentro de la ventana"""
        return [build_graph(c, window, label) for c, label in zip(self.cascades, self.labels)]


def build_group(spec: GroupSpec, pools: Optional[Mapping[str, Sequence[Cascade]]] = None) -> GroupDataset:
    """
    Construye un grupo muestreando cada fuente sin reemplazo

    Args:
        spec: GroupSpec (fuentes, cantidad por clase o total, semilla)
        pools: Cascadas ya cargadas por ruta de fuente (si falta, se lee el archivo)

    Returns:
        GroupDataset barajado de forma determinista

    Raises:
        InvalidConfigError: Si una fuente tiene menos cascadas que las pedidas
    """
    pools = dict(pools or {})
    counts = spec.class_counts()
    cascades: List[Cascade] = []
    labels: List[Label] = []
    source_ids: List[str] = []
    class_names = tuple(source.class_name for source in spec.sources)

    for index, (source, count) in enumerate(zip(spec.sources, counts)):
        pool = pools.get(source.path)
        if pool is None:
            pool = parse_cascades(source.path)
        if count > len(pool):
            raise InvalidConfigError(
                f"la fuente {source.class_name} tiene {len(pool)} cascadas y se pidieron {count}",
                field='per_class_count'
            )
        rng = make_rng(spec.seed, index)
        chosen = rng.choice(len(pool), size=count, replace=False)
        label = Label(index, source.class_name)
        for i in chosen:
            cascade = pool[int(i)]
            cascades.append(cascade.renamed(f"{source.class_name}/{cascade.cascade_id}"))
            labels.append(label)
            source_ids.append(cascade.cascade_id)

    order = make_rng(spec.seed, len(spec.sources)).permutation(len(cascades))
    group = GroupDataset(
        spec.name,
        tuple(cascades[i] for i in order),
        tuple(labels[i] for i in order),
        class_names,
        tuple(source_ids[i] for i in order),
    )
    logger.info(f"Grupo {spec.name}: {group.size} cascadas, clases {', '.join(class_names)} ({counts})")
    return group


def split(dataset: GroupDataset, spec: SplitSpec) -> Tuple[GroupDataset, GroupDataset, GroupDataset]:
    """
    Partición estratificada en entrenamiento, validación y prueba

    Por clase: train_fraction (60%) va al conjunto de entrenamiento, del cual
    val_fraction (1/6) es validación; el resto (40%) es prueba. Cada partición
    conserva el orden del dataset.

    Returns:
        (train, val, test)

    Raises:
        InvalidConfigError: Dataset con menos de 10 cascadas o clase demasiado pequeña
    """
    if dataset.size < 10:
        raise InvalidConfigError(f"el dataset necesita al menos 10 cascadas, tiene {dataset.size}", field='split')
    y = dataset.class_indices()
    rng = make_rng(spec.seed)
    train_idx, val_idx, test_idx = [], [], []
    for k, name in enumerate(dataset.class_names):
        members = np.nonzero(y == k)[0]
        members = members[rng.permutation(len(members))]
        n_pool = int(round(spec.train_fraction * len(members)))
        n_val = int(round(spec.val_fraction * n_pool))
        n_train = n_pool - n_val
        n_test = len(members) - n_pool
        if min(n_train, n_val, n_test) < 1:
            raise InvalidConfigError(
                f"la clase {name} ({len(members)} cascadas) es demasiado pequeña para estratificar",
                field='split'
            )
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:n_pool])
        test_idx.extend(members[n_pool:])

    parts = tuple(dataset.subset(sorted(int(i) for i in idx)) for idx in (train_idx, val_idx, test_idx))
    logger.info(
        f"Partición de {dataset.name}: {parts[0].size} entrenamiento, {parts[1].size} validación, "
        f"{parts[2].size} prueba"
    )
    return parts


def holdout_split(dataset: GroupDataset, val_fraction: float, seed: int) -> Tuple[GroupDataset, GroupDataset]:
    """
    Partición estratificada en entrenamiento y validación (sin prueba)

    Se usa al entrenar desde un archivo etiquetado; cada clase aporta
    round(val_fraction * n) cascadas a validación, al menos una.

    Raises:
        InvalidConfigError: Si alguna clase tiene menos de 2 cascadas
    """
    y = dataset.class_indices()
    rng = make_rng(seed)
    train_idx, val_idx = [], []
    for k, name in enumerate(dataset.class_names):
        members = np.nonzero(y == k)[0]
        if len(members) < 2:
            raise InvalidConfigError(
                f"la clase {name} necesita al menos 2 cascadas para separar validación", field='split'
            )
        members = members[rng.permutation(len(members))]
        n_val = min(len(members) - 1, max(1, int(round(val_fraction * len(members)))))
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return (
        dataset.subset(sorted(int(i) for i in train_idx)),
        dataset.subset(sorted(int(i) for i in val_idx)),
    )


def labeled_dataset(
    name: str,
    cascades: Sequence[Cascade],
    labels: Mapping[str, str],
    class_names: Optional[Sequence[str]] = None,
) -> GroupDataset:
    """
    Arma un GroupDataset a partir de un archivo de cascadas y su archivo de etiquetas

    Args:
        name: Nombre del grupo
        cascades: Cascadas leídas
        labels: cascade_id -> class_name
        class_names: Orden de clases fijo (ej: el guardado en un modelo); por
            defecto, orden alfabético

    Raises:
        InvalidInputError: Cascada sin etiqueta o clase desconocida
    """
    missing = [c.cascade_id for c in cascades if c.cascade_id not in labels]
    if missing:
        raise InvalidInputError(
            f"{len(missing)} cascadas sin etiqueta (ej: {missing[0]})", details={'missing': missing[:20]}
        )
    if class_names is None:
        class_names = sorted({labels[c.cascade_id] for c in cascades})
    index = {class_name: k for k, class_name in enumerate(class_names)}
    unknown = sorted({labels[c.cascade_id] for c in cascades} - set(index))
    if unknown:
        raise InvalidInputError(f"clases desconocidas para el modelo: {', '.join(unknown)}")
    return GroupDataset(
        name,
        tuple(cascades),
        tuple(Label(index[labels[c.cascade_id]], labels[c.cascade_id]) for c in cascades),
        tuple(class_names),
    )


def check_leakage(test_ids: Iterable[str], **pools: Iterable[str]) -> None:
    """
    Verifica que ningún id de prueba aparezca en los conjuntos de entrenamiento

    Raises:
        LeakageError: Con los ids filtrados
    """
    test_ids = set(test_ids)
    for name, ids in pools.items():
        leaked = sorted(test_ids.intersection(ids))
        if leaked:
            raise LeakageError(
                f"{len(leaked)} cascadas de prueba aparecen en {name}", leaked_ids=leaked
            )


def _feature_matrix(graphs: Sequence[CascadeGraph]) -> np.ndarray:
    return np.vstack([graph_features(g).as_array() for g in graphs])


def _labels(graphs: Sequence[CascadeGraph]) -> np.ndarray:
    return np.asarray([g.label.class_index for g in graphs], dtype=np.int64)


@dataclass
class PreparedSplit:
    """Grafos de una partición listos para todos los algoritmos"""

    train: List[CascadeGraph]
    val: List[CascadeGraph]
    test: List[CascadeGraph]
    class_names: Tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def prepare_split(train: GroupDataset, val: GroupDataset, test: GroupDataset, window: ObservationWindow) -> PreparedSplit:
    check_leakage(test.cascade_ids, train=train.cascade_ids, validation=val.cascade_ids)
    return PreparedSplit(train.graphs(window), val.graphs(window), test.graphs(window), train.class_names)


def train_model(algo, data: PreparedSplit, specs: ExperimentSpecs, threads: int = 1,
                external_pool: Sequence[CascadeGraph] = (), pretrain_source=PretrainSource.SELF_ONLY):
    """
    Entrena un algoritmo sobre la partición preparada

    Returns:
        Modelo entrenado (ForestModel, GbtModel, GcnModel o ContrastiveClassifier)
    """
    algo = parse_enum(Algorithm, algo, field='algo')
    if algo == Algorithm.RANDOM_FOREST:
        return tree_models.train_random_forest(
            _feature_matrix(data.train), _labels(data.train), specs.random_forest, data.n_classes, threads
        )
    if algo == Algorithm.GBT:
        return tree_models.train_gbt(
            _feature_matrix(data.train), _labels(data.train),
            _feature_matrix(data.val), _labels(data.val),
            specs.gbt, data.n_classes
        )
    if algo == Algorithm.GCN:
        return gcn_model.train_gcn(
            prepare_graphs(data.train, specs.window), prepare_graphs(data.val, specs.window),
            specs.gcn, data.n_classes
        )
    return train_contrastive(data.train, data.val, specs, data.n_classes, pretrain_source, external_pool)


def train_contrastive(
    labeled: Sequence[CascadeGraph],
    val: Sequence[CascadeGraph],
    specs: ExperimentSpecs,
    n_classes: int,
    pretrain_source=PretrainSource.SELF_ONLY,
    external_pool: Sequence[CascadeGraph] = (),
):
    """
    Rama contrastiva completa: pre-entrenamiento, ajuste fino y destilación

    El conjunto de pre-entrenamiento depende de pretrain_source: self_only usa
    los etiquetados (sin etiqueta), mixed los etiquetados más el conjunto
    externo, external_only solo el externo. Los grafos externos también entran
    como no etiquetados en la destilación.
    """
    source = parse_enum(PretrainSource, pretrain_source, field='pretrain_source')
    external_pool = list(external_pool)
    if source != PretrainSource.SELF_ONLY and not external_pool:
        raise InvalidConfigError(f"pretrain_source={source.value} requiere un conjunto externo",
                                 field='pretrain_source')
    labeled = list(labeled)
    if source == PretrainSource.SELF_ONLY:
        pretrain_pool = labeled
    elif source == PretrainSource.MIXED:
        pretrain_pool = labeled + external_pool
    else:
        pretrain_pool = external_pool
    unlabeled = external_pool if source != PretrainSource.SELF_ONLY else []

    spec = specs.contrastive
    if len(pretrain_pool) < spec.batch_size:
        spec = spec.model_copy(update={'batch_size': max(2, len(pretrain_pool))})
        logger.warning(
            f"Conjunto de pre-entrenamiento menor que batch_size; se usa batch_size={spec.batch_size}"
        )
    encoder = contrastive_learner.pretrain(pretrain_pool, spec, specs.augment, specs.window)
    labeled_inputs = prepare_graphs(labeled, specs.window)
    val_inputs = prepare_graphs(val, specs.window)
    teacher = contrastive_learner.finetune(encoder, labeled_inputs, val_inputs, spec, n_classes)
    return contrastive_learner.distill(
        teacher, labeled_inputs, prepare_graphs(unlabeled, specs.window), val_inputs, spec, n_classes
    )


def evaluate_model(model, graphs: Sequence[CascadeGraph], class_names: Sequence[str],
                   window: ObservationWindow, **metadata) -> EvalReport:
    """Evalúa un modelo sobre grafos etiquetados y arma el EvalReport"""
    graphs = list(graphs)
    if not graphs:
        raise InvalidInputError("no hay grafos de prueba")
    if any(g.label is None for g in graphs):
        raise InvalidInputError("la evaluación requiere grafos etiquetados")
    if model.algo in (Algorithm.RANDOM_FOREST, Algorithm.GBT):
        predicted = model.predict(_feature_matrix(graphs))
    else:
        predicted = model.predict(prepare_graphs(graphs, window))
    return macro_f1(_labels(graphs), predicted, class_names, **metadata)


def algorithm_seed(master: int, group_name: str, algo, repeat: int = 0) -> int:
    """Semilla de un algoritmo en un grupo, derivada de la semilla maestra"""
    algo = parse_enum(Algorithm, algo, field='algo')
    return derive_seed(master, f"{group_name}/{algo.value}", repeat)


def run_group_experiment(
    group: GroupDataset,
    algos: Iterable,
    specs: ExperimentSpecs,
    master_seed: int = 0,
    repeat: int = 0,
    threads: int = 1,
) -> List[EvalReport]:
    """
    Entrena cada algoritmo sobre la misma partición y evalúa en la misma prueba

    Args:
        group: GroupDataset
        algos: Algoritmos a ejecutar (en este orden)
        specs: ExperimentSpecs (la semilla de cada algoritmo se deriva de master_seed)
        master_seed: Semilla maestra
        repeat: Índice de repetición (cambia todas las semillas derivadas)
        threads: Algoritmos entrenados en paralelo (no cambia los resultados)

    Returns:
        Un EvalReport por algoritmo
    """
    algos = [parse_enum(Algorithm, a, field='algo') for a in algos]
    split_spec = specs.split.model_copy(update={'seed': derive_seed(master_seed, f"split/{group.name}", repeat)})
    train, val, test = split(group, split_spec)
    data = prepare_split(train, val, test, specs.window)

    def run(algo):
        seed = algorithm_seed(master_seed, group.name, algo, repeat)
        started = time.perf_counter()
        model = train_model(algo, data, specs.seeded(algo, seed), threads=1 if threads > 1 else threads)
        report = evaluate_model(
            model, data.test, data.class_names, specs.window,
            group=group.name, algo=algo.value, seed=seed,
            pretrain_source=PretrainSource.SELF_ONLY.value if algo == Algorithm.CONTRASTIVE else None,
        )
        report = report.with_metadata(wall_time_s=round(time.perf_counter() - started, 3))
        logger.info(f"{group.name} / {algo.value}: macro-F1 = {report.macro_f1:.4f}")
        return report

    if threads > 1 and len(algos) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(algos))) as pool:
            return list(pool.map(run, algos))
    return [run(algo) for algo in algos]


def nested_fraction_indices(dataset: GroupDataset, fractions: Sequence[float], seed: int) -> Dict[float, List[int]]:
    """
    Subconjuntos estratificados anidados para cada fracción

    Cada clase se baraja una sola vez y la fracción f toma sus primeros
    round(f * n_clase) elementos, así que las fracciones menores son
    subconjuntos de las mayores. Los índices conservan el orden del dataset.

    Raises:
        InvalidConfigError: Si una fracción deja alguna clase sin ejemplos
    """
    y = dataset.class_indices()
    rng = make_rng(seed)
    orders = []
    for k in range(dataset.n_classes):
        members = np.nonzero(y == k)[0]
        orders.append(members[rng.permutation(len(members))])

    subsets = {}
    for fraction in fractions:
        if not 0 < fraction <= 1:
            raise InvalidConfigError(f"fracción fuera de (0, 1]: {fraction}", field='fractions')
        chosen = []
        for k, members in enumerate(orders):
            take = int(round(fraction * len(members)))
            if take < 1:
                raise InvalidConfigError(
                    f"la fracción {fraction} deja la clase {dataset.class_names[k]} sin ejemplos",
                    field='fractions'
                )
            chosen.extend(int(i) for i in members[:take])
        subsets[fraction] = sorted(chosen)
    return subsets


def run_label_fraction_experiment(
    group: GroupDataset,
    fractions: Sequence[float],
    pretrain_source,
    external_pool: Sequence[Cascade] = (),
    specs: Optional[ExperimentSpecs] = None,
    master_seed: int = 0,
    repeat: int = 0,
) -> List[EvalReport]:
    """
    Rendimiento del modelo contrastivo con fracciones del entrenamiento etiquetado

    La partición y la semilla contrastiva son las mismas que usa
    run_group_experiment, de modo que la fracción 1.0 con self_only reproduce
    su entrada contrastiva. Entrenamiento y validación se reducen con
    subconjuntos estratificados anidados (la validación conserva al menos un
    ejemplo por clase).

    Args:
        group: GroupDataset
        fractions: Fracciones de etiquetas (ej: 0.1, 0.2, 0.5, 1.0)
        pretrain_source: self_only, mixed o external_only
        external_pool: Cascadas sin etiquetar externas al grupo
        specs: ExperimentSpecs
        master_seed: Semilla maestra
        repeat: Índice de repetición

    Returns:
        Un EvalReport por fracción (algo = contrastive)
    """
    specs = specs or ExperimentSpecs()
    source = parse_enum(PretrainSource, pretrain_source, field='pretrain_source')
    split_spec = specs.split.model_copy(update={'seed': derive_seed(master_seed, f"split/{group.name}", repeat)})
    train, val, test = split(group, split_spec)
    external_graphs = [build_graph(c, specs.window) for c in external_pool]
    check_leakage(test.cascade_ids, train=train.cascade_ids, validation=val.cascade_ids)
    # El conjunto externo llega con los ids de sus fuentes
    check_leakage(
        test.cascade_ids + test.original_ids,
        external_pool=[c.cascade_id for c in external_pool],
    )
    fraction_seed = derive_seed(master_seed, f"fraction/{group.name}", repeat)
    train_subsets = nested_fraction_indices(train, fractions, fraction_seed)
    val_subsets = _validation_subsets(val, fractions, fraction_seed)
    seed = algorithm_seed(master_seed, group.name, Algorithm.CONTRASTIVE, repeat)
    seeded = specs.seeded(Algorithm.CONTRASTIVE, seed)
    test_graphs = test.graphs(specs.window)

    reports = []
    for fraction in fractions:
        started = time.perf_counter()
        labeled = train.subset(train_subsets[fraction])
        reduced_val = val.subset(val_subsets[fraction])
        model = train_contrastive(
            labeled.graphs(specs.window), reduced_val.graphs(specs.window), seeded, group.n_classes,
            source, external_graphs,
        )
        report = evaluate_model(
            model, test_graphs, group.class_names, specs.window,
            group=group.name, algo=Algorithm.CONTRASTIVE.value, seed=seed,
            label_fraction=fraction, pretrain_source=source.value,
        )
        reports.append(report.with_metadata(wall_time_s=round(time.perf_counter() - started, 3)))
        logger.info(
            f"{group.name} / {source.value} / {fraction:.0%} etiquetas ({labeled.size} cascadas): "
            f"macro-F1 = {report.macro_f1:.4f}"
        )
    return reports


def _validation_subsets(val: GroupDataset, fractions: Sequence[float], seed: int) -> Dict[float, List[int]]:
    y = val.class_indices()
    rng = make_rng(seed, 1)
    orders = [np.nonzero(y == k)[0] for k in range(val.n_classes)]
    orders = [members[rng.permutation(len(members))] for members in orders]
    subsets = {}
    for fraction in fractions:
        chosen = []
        for members in orders:
            take = max(1, int(round(fraction * len(members))))
            chosen.extend(int(i) for i in members[:take])
        subsets[fraction] = sorted(chosen)
    return subsets


def assign_size_group(avg_size: float) -> str:
    """
    Grupo de un dataset real según su tamaño medio de cascada

    Ejemplos:
        120 -> 'Large'; 75 -> 'Medium'; 30 -> 'Small'
    """
    if avg_size >= LARGE_GROUP_MIN_SIZE:
        return 'Large'
    if avg_size >= MEDIUM_GROUP_MIN_SIZE:
        return 'Medium'
    return 'Small'


def bin_real_datasets(pools: Mapping[str, Sequence[Cascade]]) -> Dict[str, List[str]]:
    """
    Agrupa datasets reales por tamaño medio de cascada

    Args:
        pools: nombre de dataset -> cascadas

    Returns:
        dict 'Large'/'Medium'/'Small' -> nombres de dataset (orden de entrada)
    """
    groups = {name: [] for name in SIZE_GROUPS}
    for name, cascades in pools.items():
        if not cascades:
            raise InvalidInputError(f"el dataset {name} no tiene cascadas")
        avg = float(np.mean([c.size for c in cascades]))
        group = assign_size_group(avg)
        groups[group].append(name)
        logger.info(f"Dataset {name}: tamaño medio {avg:.1f} -> grupo {group}")
    return groups
