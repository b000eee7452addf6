"""
Configuración centralizada del laboratorio de cascadas

Dos capas: la clase Config (entorno vía python-dotenv y presets de escala) y
RunConfig, la configuración resuelta de una ejecución que se lee de archivos
INI y se guarda junto a cada salida.
"""
from typing import Dict, List, Mapping, Optional
import configparser
import io
import os

from dotenv import load_dotenv
from pydantic import Field, field_validator

from app.exceptions import InvalidConfigError
from app.models.specs import (
    MAX_SEED, Algorithm, AugmentConfig, ContrastiveSpec, DiffusionConfig, DiffusionModel, ExperimentSpecs,
    NetGenConfig, NetworkModel, ObservationWindow, PretrainSource, SplitSpec, TrainSpec, _Frozen, build_model,
    parse_enum,
)
from app.utils.formatters import parse_csv_list

# Cargar variables de entorno desde .env
load_dotenv()


class Config:
    """Configuración base del laboratorio (escala completa)"""

    # Entorno
    MASTER_SEED = os.getenv('CASCADELAB_SEED')
    THREADS = int(os.getenv('CASCADELAB_THREADS', '1'))
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('CASCADELAB_LOG_FILE')
    PRESET = os.getenv('CASCADELAB_PRESET', 'desk')

    # Escala de la suite sintética
    NODE_COUNT = 5000
    LFR_MAX_DEG = 100
    LFR_MIN_COMM = 100
    LFR_MAX_COMM = 600
    CASCADES_PER_SOURCE = 5000
    PER_CLASS_COUNT = 2000
    MIN_SIZE = 50
    MAX_SIZE = 500

    # Entrenamiento
    N_TREES = 100
    GBT_MAX_ROUNDS = 1000
    GCN_EPOCHS = 20
    PRETRAIN_EPOCHS = 30
    FINETUNE_EPOCHS = 20
    DISTILL_EPOCHS = 20
    CONTRASTIVE_BATCH = 64

    # Experimento de fracción de etiquetas
    LABEL_FRACTIONS = [0.1, 0.2, 0.5, 1.0]
    EXTERNAL_COUNT = 4000
    REPEATS = 1

    @classmethod
    def validate(cls):
        """Valida la configuración; retorna la lista de problemas encontrados"""
        errors = []

        if cls.THREADS < 1:
            errors.append("CASCADELAB_THREADS debe ser >= 1")

        if cls.MASTER_SEED is not None:
            try:
                seed = int(cls.MASTER_SEED)
                if not 0 <= seed <= MAX_SEED:
                    errors.append("CASCADELAB_SEED debe estar en [0, 2^64)")
            except ValueError:
                errors.append(f"CASCADELAB_SEED no es un entero: {cls.MASTER_SEED}")

        if cls.PER_CLASS_COUNT > cls.CASCADES_PER_SOURCE:
            errors.append("PER_CLASS_COUNT no puede superar CASCADES_PER_SOURCE")

        if cls.MIN_SIZE > cls.MAX_SIZE:
            errors.append("MIN_SIZE debe ser <= MAX_SIZE")

        return errors

    @classmethod
    def run_defaults(cls) -> Dict[str, Dict[str, object]]:
        """Valores por defecto de cada sección del archivo de configuración"""
        return {
            'run': {'preset': cls.preset_name(), 'threads': cls.THREADS},
            'network': {
                'node_count': cls.NODE_COUNT,
                'lfr_max_deg': cls.LFR_MAX_DEG,
                'lfr_min_comm': cls.LFR_MIN_COMM,
                'lfr_max_comm': cls.LFR_MAX_COMM,
            },
            'diffusion': {'min_size': cls.MIN_SIZE, 'max_size': cls.MAX_SIZE},
            'random_forest': {'n_trees': cls.N_TREES},
            'gbt': {'max_rounds': cls.GBT_MAX_ROUNDS},
            'gcn': {'epochs': cls.GCN_EPOCHS},
            'contrastive': {
                'pretrain_epochs': cls.PRETRAIN_EPOCHS,
                'finetune_epochs': cls.FINETUNE_EPOCHS,
                'distill_epochs': cls.DISTILL_EPOCHS,
                'batch_size': cls.CONTRASTIVE_BATCH,
            },
            'experiment': {
                'cascades_per_source': cls.CASCADES_PER_SOURCE,
                'per_class_count': cls.PER_CLASS_COUNT,
                'repeats': cls.REPEATS,
            },
            'label_fraction': {
                'fractions': cls.LABEL_FRACTIONS,
                'external_count': cls.EXTERNAL_COUNT,
                'repeats': cls.REPEATS,
            },
        }

    @classmethod
    def preset_name(cls) -> str:
        for name, config_cls in config_by_name.items():
            if config_cls is cls and name != 'default':
                return name
        return 'paper'


class PaperConfig(Config):
    """Escala completa (5000 nodos, 5000 cascadas por fuente)"""


class DeskConfig(Config):
    """Escala de escritorio: la tabla completa corre en minutos"""
    NODE_COUNT = 1000
    CASCADES_PER_SOURCE = 600
    PER_CLASS_COUNT = 600
    GBT_MAX_ROUNDS = 300
    PRETRAIN_EPOCHS = 10
    FINETUNE_EPOCHS = 10
    DISTILL_EPOCHS = 10
    EXTERNAL_COUNT = 600


class TestingConfig(Config):
    """Configuración mínima para tests"""
    NODE_COUNT = 200
    LFR_MAX_DEG = 30
    LFR_MIN_COMM = 40
    LFR_MAX_COMM = 100
    CASCADES_PER_SOURCE = 30
    PER_CLASS_COUNT = 30
    MIN_SIZE = 5
    MAX_SIZE = 60
    N_TREES = 5
    GBT_MAX_ROUNDS = 10
    GCN_EPOCHS = 2
    PRETRAIN_EPOCHS = 1
    FINETUNE_EPOCHS = 1
    DISTILL_EPOCHS = 1
    CONTRASTIVE_BATCH = 8
    LABEL_FRACTIONS = [0.5, 1.0]
    EXTERNAL_COUNT = 20


# Mapeo de configuraciones
config_by_name = {
    'paper': PaperConfig,
    'desk': DeskConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(config_name=None):
    """
    Obtiene la configuración según el nombre

    Args:
        config_name: Nombre del preset ('paper', 'desk', 'testing')

    Returns:
        Clase de configuración correspondiente
    """
    if config_name is None:
        config_name = os.getenv('CASCADELAB_PRESET', 'desk')

    return config_by_name.get(config_name, DeskConfig)


# --------------------------------------------------------------------------
# Configuración de ejecución (archivos INI)
# --------------------------------------------------------------------------

SECTION_ORDER = (
    'run', 'network', 'diffusion', 'window', 'split', 'random_forest', 'gbt', 'gcn',
    'contrastive', 'augment', 'experiment', 'label_fraction',
)
# Las semillas de componente se derivan de run.seed y no se escriben
DERIVED_KEYS = {'seed', 'algo'}
# La línea de comandos cruda se registra en el log, no en el archivo
UNSAVED_RUN_KEYS = {'arguments'}


class RunSection(_Frozen):
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    threads: int = Field(default=1, ge=1)
    preset: str = 'desk'
    command: Optional[str] = None
    arguments: Optional[str] = None


class ExperimentSection(_Frozen):
    cascades_per_source: int = Field(default=600, gt=0)
    per_class_count: int = Field(default=600, gt=0)
    repeats: int = Field(default=1, ge=1)
    algos: List[Algorithm] = Field(default_factory=lambda: list(Algorithm))
    networks: List[NetworkModel] = Field(default_factory=lambda: list(NetworkModel))
    diffusions: List[DiffusionModel] = Field(default_factory=lambda: list(DiffusionModel))
    tables: List[str] = Field(default_factory=lambda: ['diffusion', 'network'])

    @field_validator('algos', mode='before')
    @classmethod
    def parse_algos(cls, v):
        return [parse_enum(Algorithm, a, field='algos') for a in _as_list(v)]

    @field_validator('networks', mode='before')
    @classmethod
    def parse_networks(cls, v):
        return [parse_enum(NetworkModel, a, field='networks') for a in _as_list(v)]

    @field_validator('diffusions', mode='before')
    @classmethod
    def parse_diffusions(cls, v):
        return [parse_enum(DiffusionModel, a, field='diffusions') for a in _as_list(v)]

    @field_validator('tables', mode='before')
    @classmethod
    def parse_tables(cls, v):
        tables = [t.lower() for t in _as_list(v)]
        for t in tables:
            if t not in ('diffusion', 'network'):
                raise ValueError(f"tabla desconocida: {t}")
        return tables


class LabelFractionSection(_Frozen):
    fractions: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0])
    pretrain_sources: List[PretrainSource] = Field(default_factory=lambda: list(PretrainSource))
    groups: List[str] = Field(default_factory=lambda: ['WS'])
    external_networks: List[NetworkModel] = Field(default_factory=lambda: [NetworkModel.BA, NetworkModel.LFR])
    external_count: int = Field(default=4000, gt=0)
    repeats: int = Field(default=1, ge=1)

    @field_validator('fractions', mode='before')
    @classmethod
    def parse_fractions(cls, v):
        return [float(f) for f in _as_list(v)]

    @field_validator('pretrain_sources', mode='before')
    @classmethod
    def parse_sources(cls, v):
        return [parse_enum(PretrainSource, s, field='pretrain_sources') for s in _as_list(v)]

    @field_validator('groups', mode='before')
    @classmethod
    def parse_groups(cls, v):
        return [parse_enum(NetworkModel, g, field='groups').value for g in _as_list(v)]

    @field_validator('external_networks', mode='before')
    @classmethod
    def parse_external(cls, v):
        return [parse_enum(NetworkModel, n, field='external_networks') for n in _as_list(v)]


class RunConfig(_Frozen):
    """Configuración resuelta de una ejecución"""

    run: RunSection = Field(default_factory=RunSection)
    network: NetGenConfig = Field(default_factory=NetGenConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    window: ObservationWindow = Field(default_factory=ObservationWindow)
    split: SplitSpec = Field(default_factory=SplitSpec)
    random_forest: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.RANDOM_FOREST))
    gbt: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.GBT))
    gcn: TrainSpec = Field(default_factory=lambda: TrainSpec.defaults_for(Algorithm.GCN))
    contrastive: ContrastiveSpec = Field(default_factory=ContrastiveSpec)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    label_fraction: LabelFractionSection = Field(default_factory=LabelFractionSection)

    @property
    def seed(self) -> int:
        return self.run.seed

    @property
    def threads(self) -> int:
        return self.run.threads

    def experiment_specs(self) -> ExperimentSpecs:
        return ExperimentSpecs(
            random_forest=self.random_forest,
            gbt=self.gbt,
            gcn=self.gcn,
            contrastive=self.contrastive,
            augment=self.augment,
            window=self.window,
            split=self.split,
        )

    def to_ini(self) -> str:
        """
        Archivo INI canónico (orden de secciones fijo, claves ordenadas)

        Releerlo con load_run_config reproduce la misma configuración, salvo
        run.arguments: relanzar con --config cambia la línea de comandos pero
        debe escribir el mismo archivo.
        """
        parser = configparser.ConfigParser(interpolation=None)
        for section in SECTION_ORDER:
            values = getattr(self, section).model_dump()
            parser.add_section(section)
            for key in sorted(values):
                if section != 'run' and key in DERIVED_KEYS:
                    continue
                if section == 'run' and key in UNSAVED_RUN_KEYS:
                    continue
                text = _format_value(values[key])
                if text is not None:
                    parser.set(section, key, text)
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()


def load_run_config(
    path=None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Mapping[str, object]]] = None,
) -> RunConfig:
    """
    Resuelve la configuración de una ejecución

    Precedencia: flags (overrides) > archivo > CASCADELAB_SEED > preset.

    Args:
        path: Archivo INI opcional
        preset: Nombre del preset ('paper', 'desk', 'testing'); por defecto el
            del archivo o CASCADELAB_PRESET
        overrides: Valores de flags por sección (los None se ignoran)

    Returns:
        RunConfig validada

    Raises:
        InvalidConfigError: Archivo ilegible, sección o clave desconocida, valor inválido
    """
    file_sections = _read_ini(path) if path else {}
    overrides = {s: {k: v for k, v in values.items() if v is not None} for s, values in (overrides or {}).items()}

    preset_name = (
        overrides.get('run', {}).get('preset')
        or file_sections.get('run', {}).get('preset')
        or preset
        or os.getenv('CASCADELAB_PRESET', 'desk')
    )
    if preset_name not in config_by_name or preset_name == 'default':
        raise InvalidConfigError(f"preset desconocido: {preset_name}", field='preset')
    config_cls = get_config(preset_name)

    merged: Dict[str, Dict[str, object]] = {section: {} for section in SECTION_ORDER}
    for section, values in config_cls.run_defaults().items():
        merged[section].update(values)
    merged['run']['preset'] = preset_name
    env_seed = os.getenv('CASCADELAB_SEED')
    if env_seed:
        merged['run']['seed'] = env_seed
    for layer in (file_sections, overrides):
        for section, values in layer.items():
            if section not in merged:
                raise InvalidConfigError(f"sección desconocida: [{section}]", field=section)
            merged[section].update(values)

    run = build_model(RunSection, **merged['run'])
    master_seed = run.seed
    sections = {
        'run': run,
        'network': build_model(NetGenConfig, seed=master_seed, **_drop_derived(merged['network'])),
        'diffusion': build_model(DiffusionConfig, seed=master_seed, **_drop_derived(merged['diffusion'])),
        'window': build_model(ObservationWindow, **merged['window']),
        'split': build_model(SplitSpec, seed=master_seed, **_drop_derived(merged['split'])),
        'random_forest': TrainSpec.defaults_for(Algorithm.RANDOM_FOREST, seed=master_seed,
                                                **_drop_derived(merged['random_forest'])),
        'gbt': TrainSpec.defaults_for(Algorithm.GBT, seed=master_seed, **_drop_derived(merged['gbt'])),
        'gcn': TrainSpec.defaults_for(Algorithm.GCN, seed=master_seed, **_drop_derived(merged['gcn'])),
        'contrastive': build_model(ContrastiveSpec, seed=master_seed, **_drop_derived(merged['contrastive'])),
        'augment': build_model(AugmentConfig, seed=master_seed, **_drop_derived(merged['augment'])),
        'experiment': build_model(ExperimentSection, **merged['experiment']),
        'label_fraction': build_model(LabelFractionSection, **merged['label_fraction']),
    }
    if 'model' in merged['network']:
        sections['network'] = sections['network'].model_copy(
            update={'model': parse_enum(NetworkModel, merged['network']['model'], field='model')}
        )
    if 'model' in merged['diffusion']:
        sections['diffusion'] = sections['diffusion'].model_copy(
            update={'model': parse_enum(DiffusionModel, merged['diffusion']['model'], field='model')}
        )
    return build_model(RunConfig, **sections)


def _read_ini(path) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding='utf-8') as handle:
            parser.read_file(handle)
    except OSError as e:
        raise InvalidConfigError(f"no se pudo leer el archivo de configuración {path}: {e}", field='config')
    except configparser.Error as e:
        raise InvalidConfigError(f"archivo de configuración mal formado {path}: {e}", field='config')
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _drop_derived(values: Mapping[str, object]) -> Dict[str, object]:
    """Quita seed/algo y convierte el modelo con parse_enum más adelante"""
    return {k: v for k, v in values.items() if k not in DERIVED_KEYS and k != 'model'}


def _as_list(value) -> list:
    if isinstance(value, str):
        return parse_csv_list(value)
    return list(value)


def _format_value(value) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ', '.join(_format_value(v) for v in value)
    if hasattr(value, 'value'):
        return str(value.value)
    return str(value)
