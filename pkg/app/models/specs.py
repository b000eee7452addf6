"""
Modelos Pydantic para configuraciones y especificaciones de entrenamiento
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.exceptions import InvalidConfigError, pydantic_to_config_error

MAX_SEED = (1 << 64) - 1


class NetworkModel(str, Enum):
    BA = 'BA'
    WS = 'WS'
    LFR = 'LFR'


class DiffusionModel(str, Enum):
    IC = 'IC'
    LT = 'LT'
    PROFILE = 'Profile'


class Algorithm(str, Enum):
    RANDOM_FOREST = 'rf'
    GBT = 'gbt'
    GCN = 'gcn'
    CONTRASTIVE = 'contrastive'


class PretrainSource(str, Enum):
    SELF_ONLY = 'self_only'
    MIXED = 'mixed'
    EXTERNAL_ONLY = 'external_only'


def parse_enum(enum_cls, value, field=None):
    """
    Convierte texto (sin distinguir mayúsculas) a un miembro del enum

    Raises:
        InvalidConfigError: Si el valor no pertenece al enum
    """
    if isinstance(value, enum_cls):
        return value
    text = str(value).strip()
    for member in enum_cls:
        if member.value.lower() == text.lower() or member.name.lower() == text.lower():
            return member
    allowed = ', '.join(m.value for m in enum_cls)
    raise InvalidConfigError(f"valor '{value}' inválido; opciones: {allowed}", field=field)


def build_model(model_cls, **values):
    """
    Instancia un modelo pydantic convirtiendo errores en InvalidConfigError

    Args:
        model_cls: Clase pydantic
        values: Campos del modelo

    Returns:
        Instancia validada
    """
    try:
        return model_cls(**values)
    except ValidationError as e:
        raise pydantic_to_config_error(e, context=model_cls.__name__)


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid', use_enum_values=False)


class NetGenConfig(_Frozen):
    """Parámetros de generación de redes (valores por defecto de referencia)"""

    model: NetworkModel = NetworkModel.BA
    node_count: int = Field(default=5000, gt=0)
    ba_m: int = Field(default=10, gt=0)
    ws_k: int = Field(default=10, gt=0)
    ws_beta: float = Field(default=0.1, ge=0, le=1)
    lfr_gamma: float = Field(default=2.5, gt=1)
    lfr_beta_c: float = Field(default=1.5, gt=1)
    lfr_mu: float = Field(default=0.1, ge=0, le=1)
    lfr_avg_deg: float = Field(default=10.0, gt=0)
    lfr_max_deg: int = Field(default=100, gt=0)
    lfr_min_comm: int = Field(default=100, gt=0)
    lfr_max_comm: int = Field(default=600, gt=0)
    lfr_max_iters: int = Field(default=1000, gt=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    def check(self) -> None:
        """
        Valida las restricciones cruzadas del modelo seleccionado

        Raises:
            InvalidConfigError: Si alguna restricción no se cumple
        """
        if self.model == NetworkModel.BA and self.ba_m >= self.node_count:
            raise InvalidConfigError(
                f"ba_m ({self.ba_m}) debe ser menor que node_count ({self.node_count})", field='ba_m'
            )
        if self.model == NetworkModel.WS:
            if self.ws_k % 2 != 0:
                raise InvalidConfigError(f"ws_k debe ser par: {self.ws_k}", field='ws_k')
            if self.ws_k >= self.node_count:
                raise InvalidConfigError(
                    f"ws_k ({self.ws_k}) debe ser menor que node_count ({self.node_count})", field='ws_k'
                )
        if self.model == NetworkModel.LFR:
            if self.lfr_min_comm > self.lfr_max_comm:
                raise InvalidConfigError("lfr_min_comm debe ser <= lfr_max_comm", field='lfr_min_comm')
            if self.lfr_max_comm > self.node_count:
                raise InvalidConfigError("lfr_max_comm debe ser <= node_count", field='lfr_max_comm')
            if self.lfr_avg_deg > self.lfr_max_deg:
                raise InvalidConfigError("lfr_avg_deg debe ser <= lfr_max_deg", field='lfr_avg_deg')
            if self.lfr_max_deg >= self.node_count:
                raise InvalidConfigError("lfr_max_deg debe ser < node_count", field='lfr_max_deg')


class DiffusionConfig(_Frozen):
    """Parámetros de los modelos de difusión y del filtro de tamaño"""

    model: DiffusionModel = DiffusionModel.IC
    ic_p: float = Field(default=0.1, ge=0, le=1)
    lt_threshold: float = Field(default=0.09, ge=0)
    profile_q: float = Field(default=0.3, ge=0, le=1)
    min_size: int = Field(default=50, ge=0)
    max_size: int = Field(default=500, gt=0)
    max_rejections: int = Field(default=1_000_000, gt=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    @model_validator(mode='after')
    def validate_sizes(self):
        if self.min_size > self.max_size:
            raise ValueError(f"min_size ({self.min_size}) debe ser <= max_size ({self.max_size})")
        return self


class ObservationWindow(_Frozen):
    """Ventana de observación: primeros max_steps pasos o max_time segundos"""

    max_steps: float = Field(default=100.0, gt=0)
    max_time: float = Field(default=31_536_000.0, gt=0)

    def bound_for(self, time_unit: Optional[str]) -> float:
        """
        Cota temporal aplicable según la unidad del archivo

        Args:
            time_unit: 'steps', 'seconds' o None (ambigua: se aplican ambas)
        """
        if time_unit == 'steps':
            return self.max_steps
        if time_unit == 'seconds':
            return self.max_time
        return min(self.max_steps, self.max_time)


class AugmentConfig(_Frozen):
    """Tasas de aumento de cascadas para el aprendizaje contrastivo"""

    leaf_drop_rate: float = Field(default=0.1, ge=0, le=1)
    node_add_rate: float = Field(default=0.1, ge=0, le=1)
    time_jitter: float = Field(default=0.05, ge=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)


class TrainSpec(_Frozen):
    """Hiperparámetros de entrenamiento de las líneas base"""

    algo: Algorithm = Algorithm.RANDOM_FOREST
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    batch_size: int = Field(default=5, gt=0)
    epochs: int = Field(default=20, gt=0)
    learning_rate: float = Field(default=0.01, gt=0)
    early_stopping_patience: int = Field(default=10, gt=0)
    n_trees: int = Field(default=100, gt=0)
    max_rounds: int = Field(default=1000, gt=0)
    max_depth: Optional[int] = Field(default=None, gt=0)
    min_samples_split: int = Field(default=2, ge=2)
    hidden: int = Field(default=18, gt=0)

    @classmethod
    def defaults_for(cls, algo, **overrides) -> 'TrainSpec':
        """
        Especificación con los valores de referencia de cada algoritmo

        Args:
            algo: Algorithm o su valor ('rf', 'gbt', 'gcn')
            overrides: Campos a sobrescribir
        """
        algo = parse_enum(Algorithm, algo, field='algo')
        base = {'algo': algo}
        if algo == Algorithm.GBT:
            base.update(learning_rate=0.1, max_depth=6)
        elif algo == Algorithm.GCN:
            base.update(learning_rate=0.01, batch_size=5, epochs=20, hidden=18)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return build_model(cls, **base)


class ContrastiveSpec(_Frozen):
    """Hiperparámetros del aprendiz contrastivo (pre-entrenamiento, ajuste y destilación)"""

    temperature: float = Field(default=0.5, gt=0)
    batch_size: int = Field(default=64, gt=0)
    pretrain_epochs: int = Field(default=30, gt=0)
    finetune_epochs: int = Field(default=20, gt=0)
    distill_epochs: int = Field(default=20, gt=0)
    distill_temperature: float = Field(default=2.0, gt=0)
    distill_alpha: float = Field(default=0.5, ge=0, le=1)
    learning_rate: float = Field(default=0.001, gt=0)
    finetune_batch_size: int = Field(default=32, gt=0)
    hidden_dim: int = Field(default=64, gt=0)
    embedding_dim: int = Field(default=64, gt=0)
    projection_dim: int = Field(default=32, gt=0)
    student_init: str = Field(default='teacher')
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    @field_validator('student_init')
    @classmethod
    def validate_student_init(cls, v):
        if v not in ('teacher', 'random'):
            raise ValueError(f"student_init debe ser 'teacher' o 'random': {v}")
        return v


class GroupSource(_Frozen):
    """Fuente de un grupo: archivo de cascadas y nombre de clase"""

    path: str
    class_name: str = Field(min_length=1)


class GroupSpec(_Frozen):
    """Definición de un grupo de datasets etiquetados"""

    name: str = Field(min_length=1)
    sources: List[GroupSource]
    per_class_count: Optional[int] = Field(default=None, gt=0)
    total_count: Optional[int] = Field(default=None, gt=0)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)

    @model_validator(mode='after')
    def validate_sources(self):
        if len(self.sources) < 2:
            raise ValueError("un grupo necesita al menos 2 fuentes")
        names = [s.class_name for s in self.sources]
        if len(set(names)) != len(names):
            raise ValueError(f"nombres de clase repetidos: {names}")
        if (self.per_class_count is None) == (self.total_count is None):
            raise ValueError("indique exactamente uno de per_class_count o total_count")
        return self

    def class_counts(self) -> List[int]:
        """
        Cantidad a muestrear de cada fuente

        Con total_count no divisible el residuo se reparte round-robin desde
        la primera fuente.
        """
        k = len(self.sources)
        if self.per_class_count is not None:
            return [self.per_class_count] * k
        base, remainder = divmod(self.total_count, k)
        return [base + (1 if i < remainder else 0) for i in range(k)]


class SplitSpec(_Frozen):
    """Partición estratificada: 60% entrenamiento (1:5 validación:entrenamiento), 40% prueba"""

    train_fraction: float = Field(default=0.6, gt=0, lt=1)
    val_fraction: float = Field(default=1 / 6, gt=0, lt=1)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)


class ExperimentSpecs(_Frozen):
    """Especificaciones de todos los algoritmos de un experimento de grupo"""

    random_forest: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.RANDOM_FOREST))
    gbt: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.GBT))
    gcn: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.GCN))
    contrastive: ContrastiveSpec = Field(default_factory=ContrastiveSpec)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    window: ObservationWindow = Field(default_factory=ObservationWindow)
    split: SplitSpec = Field(default_factory=SplitSpec)

    def train_spec(self, algo) -> TrainSpec:
        algo = parse_enum(Algorithm, algo, field='algo')
        return {
            Algorithm.RANDOM_FOREST: self.random_forest,
            Algorithm.GBT: self.gbt,
            Algorithm.GCN: self.gcn,
        }[algo]

    def seeded(self, algo, seed: int) -> 'ExperimentSpecs':
        """Copia con la semilla del algoritmo (y su aumento) reemplazada"""
        algo = parse_enum(Algorithm, algo, field='algo')
        if algo == Algorithm.CONTRASTIVE:
            return self.model_copy(update={
                'contrastive': self.contrastive.model_copy(update={'seed': seed}),
                'augment': self.augment.model_copy(update={'seed': seed}),
            })
        attr = {Algorithm.RANDOM_FOREST: 'random_forest', Algorithm.GBT: 'gbt', Algorithm.GCN: 'gcn'}[algo]
        return self.model_copy(update={attr: getattr(self, attr).model_copy(update={'seed': seed})})
