"""
Modelos Pydantic para reportes de evaluación y tablas de resultados
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class EvalReport(BaseModel):
    """Reporte de evaluación de un algoritmo sobre un grupo"""

    model_config = ConfigDict(from_attributes=True)

    group: str = Field(default='', description="Nombre del grupo evaluado")
    algo: str = Field(default='', description="Algoritmo: rf, gbt, gcn o contrastive")
    seed: int = Field(default=0, description="Semilla del experimento")
    label_fraction: float = Field(default=1.0, description="Fracción de etiquetas usada")
    pretrain_source: Optional[str] = Field(default=None, description="Fuente del pre-entrenamiento contrastivo")
    class_names: List[str] = Field(..., description="Nombres de clase en orden de índice")
    per_class_f1: Dict[str, float] = Field(..., description="F1 por clase")
    macro_f1: float = Field(..., ge=0, le=1, description="Media no ponderada de los F1 por clase")
    confusion_matrix: List[List[int]] = Field(
        ...,
        description="Matriz K x K: filas = clase real, columnas = clase predicha"
    )
    wall_time_s: float = Field(default=0.0, description="Tiempo de entrenamiento y evaluación en segundos")

    def with_metadata(self, **metadata) -> 'EvalReport':
        """Copia del reporte con metadatos del modelo"""
        return self.model_copy(update=metadata)

    def to_json_dict(self) -> dict:
        """Campos del reporte JSON en orden estable"""
        return {
            'group': self.group,
            'algo': self.algo,
            'seed': self.seed,
            'label_fraction': self.label_fraction,
            'pretrain_source': self.pretrain_source,
            'per_class_f1': self.per_class_f1,
            'macro_f1': self.macro_f1,
            'confusion_matrix': self.confusion_matrix,
            'wall_time_s': self.wall_time_s,
        }


class SummaryRow(BaseModel):
    """Fila de la tabla resumen: un par (grupo, algoritmo)"""

    model_config = ConfigDict(from_attributes=True)

    table: str = Field(..., description="Tabla: diffusion o network")
    group: str
    algo: str
    macro_f1: float = Field(..., description="Media del macro-F1 sobre las semillas")
    n_seeds: int = Field(default=1, ge=1)


class FractionRow(BaseModel):
    """Fila de la tabla de fracción de etiquetas"""

    model_config = ConfigDict(from_attributes=True)

    group: str
    pretrain_source: str
    label_fraction: float
    macro_f1: float
    n_seeds: int = Field(default=1, ge=1)


class ShapeCheck(BaseModel):
    """Verificación de la forma cualitativa de la curva F1 vs. fracción"""

    group: str
    pretrain_source: str
    f1_by_fraction: Dict[str, float]
    stable_at_20: Optional[bool] = Field(default=None, description="F1(20%) a menos de 0.10 de F1(100%)")
    decline_at_10: Optional[bool] = Field(default=None, description="F1(10%) < F1(20%)")
    reproduced: bool
