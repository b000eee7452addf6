"""
Utilidades de formateo
"""
from fractions import Fraction
import math
import numbers
import re

import numpy as np

CANONICAL_INT = re.compile(r'0|[1-9][0-9]*')
CANONICAL_DECIMAL = re.compile(r'(0|[1-9][0-9]*)\.[0-9]+')


class DecimalTime(float):
    """Tiempo real leído de un archivo; conserva la escritura decimal original"""

    def __new__(cls, text: str):
        value = super().__new__(cls, text)
        value.text = text
        return value


def parse_time(text: str, strict: bool = True):
    """
    Convierte un tiempo decimal del formato de cascadas a número

    Los enteros se conservan como int (pasos de difusión sintéticos) y el
    resto como DecimalTime (segundos en datos reales), que recuerda su texto
    para volver a escribirlo idéntico.

    Args:
        text: Cadena decimal, ej: "12" o "3600.5"
        strict: Si True solo acepta la forma canónica (sin signo, exponente,
            espacios ni ceros a la izquierda); si False acepta cualquier real
            finito no negativo y lo normaliza

    Returns:
        int|float: Valor convertido

    Raises:
        ValueError: Si la cadena no es un decimal finito no negativo válido
    """
    if CANONICAL_INT.fullmatch(text):
        return int(text)
    if CANONICAL_DECIMAL.fullmatch(text):
        return DecimalTime(text)
    if strict:
        raise ValueError(f"tiempo no canónico: '{text}'")

    s = text.strip()
    if not s:
        raise ValueError("tiempo vacío")
    value = float(s)
    if not math.isfinite(value):
        raise ValueError(f"tiempo no finito: {text}")
    if value < 0:
        raise ValueError(f"tiempo negativo: {text}")
    return int(value) if value.is_integer() and s.lstrip('+').isdigit() else value


def format_time(value) -> str:
    """
    Formatea un tiempo en su forma decimal

    Args:
        value: int, float, Fraction o DecimalTime

    Returns:
        str: "12" para enteros, el texto original para DecimalTime y el
        repr() más corto para el resto de reales

    Ejemplos:
        >>> format_time(3)
        '3'
        >>> format_time(2.5)
        '2.5'
        >>> format_time(parse_time("0.50"))
        '0.50'
    """
    if isinstance(value, bool):
        raise TypeError("un tiempo no puede ser booleano")
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, DecimalTime):
        return value.text
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"tiempo fuera de rango: {value}")
    text = repr(value)
    if 'e' in text:
        # Sin exponente: la forma posicional más corta que identifica el valor
        text = np.format_float_positional(value, unique=True, trim='-')
    return text


def format_float(value) -> str:
    """Formatea un real con precisión completa (repr de Python)"""
    return repr(float(value))


def format_f1(value) -> str:
    """
    Formatea un F1 con dos decimales, como en las tablas de resultados

    Ejemplos:
        >>> format_f1(0.9567)
        '0.96'
    """
    try:
        return f"{float(value):.2f}"
    except (TypeError, ValueError):
        return str(value)


def format_duration(seconds) -> str:
    """
    Formatea una duración en segundos para los logs

    Ejemplos:
        >>> format_duration(75.2)
        '1m 15.2s'
    """
    try:
        seconds = float(seconds)
    except (TypeError, ValueError):
        return str(seconds)
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, rest = divmod(seconds, 60)
    if minutes < 60:
        return f"{int(minutes)}m {rest:.1f}s"
    hours, minutes = divmod(minutes, 60)
    return f"{int(hours)}h {int(minutes)}m {rest:.0f}s"


def parse_csv_list(value) -> list:
    """
    Convierte "a, b,c" en ['a', 'b', 'c'] descartando elementos vacíos

    Args:
        value: Cadena separada por comas o lista ya construida

    Returns:
        list de cadenas limpias
    """
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [item.strip() for item in str(value).split(',') if item.strip()]
