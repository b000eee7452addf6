"""
Servicio de lectura y escritura de archivos de cascadas

Formato (una cascada por línea, separador tabulador):

    <cascade_id>\t<origin_node>\t<origin_time>\t<event_count>\t<padre>/<nodo>:<tiempo> ...

con un encabezado opcional "# time_unit=steps|seconds" en la primera línea.
"""
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple
import csv
import logging

from app.exceptions import CascadeParseError, InvalidInputError
from app.models.cascade import TIME_UNITS, Cascade, Event
from app.utils.files import atomic_write
from app.utils.formatters import CANONICAL_INT, format_time, parse_time

logger = logging.getLogger(__name__)

HEADER_PREFIX = '# time_unit='
LABELS_HEADER = ('cascade_id', 'class_name')


class CascadeFile(list):
    """Cascadas de un archivo junto con la unidad declarada en su encabezado"""

    def __init__(self, cascades=(), time_unit: Optional[str] = None):
        super().__init__(cascades)
        self.time_unit = time_unit


def parse_cascades(path) -> CascadeFile:
    """
    Lee un archivo de cascadas validando todas las invariantes por línea

    Args:
        path: Ruta del archivo

    Returns:
        CascadeFile: lista de Cascade en el orden del archivo (vacía para un
        archivo vacío) con la unidad del encabezado en `time_unit`

    Raises:
        CascadeParseError: Token mal formado, padre desconocido, nodo repetido,
            retroceso temporal o conteo inconsistente (indica la línea)
    """
    path = Path(path)
    cascades = []
    time_unit = None
    with open(path, encoding='utf-8', newline='') as handle:
        for line_number, raw in enumerate(handle, start=1):
            if not raw.endswith('\n'):
                raise CascadeParseError("la línea no termina en salto de línea", line_number, path)
            line = raw[:-1]
            if line_number == 1 and line.startswith('#'):
                time_unit = _parse_header(line, path)
                continue
            cascades.append(parse_cascade_line(line, line_number, time_unit, path))
    logger.debug(f"{len(cascades)} cascadas leídas de {path} (unidad={time_unit})")
    return CascadeFile(cascades, time_unit)


def parse_cascade_line(line: str, line_number: int = 1, time_unit: Optional[str] = None, path=None) -> Cascade:
    """
    Convierte una línea del formato de cascadas en Cascade

    Raises:
        CascadeParseError: Si la línea viola el formato o las invariantes
    """
    parts = line.split('\t')
    if len(parts) != 5:
        raise CascadeParseError(f"se esperaban 5 campos, hay {len(parts)}", line_number, path)
    cascade_id, origin_text, origin_time_text, count_text, tokens_text = parts
    if not cascade_id or ' ' in cascade_id:
        raise CascadeParseError(f"cascade_id inválido: '{cascade_id}'", line_number, path)
    origin = _parse_node(origin_text, line_number, path)
    try:
        origin_time = parse_time(origin_time_text)
    except ValueError as e:
        raise CascadeParseError(f"campo numérico inválido: {e}", line_number, path)
    if not CANONICAL_INT.fullmatch(count_text):
        raise CascadeParseError(f"event_count inválido: '{count_text}'", line_number, path)
    event_count = int(count_text)
    if origin_time != 0:
        raise CascadeParseError(f"origin_time debe ser 0, es {origin_time_text}", line_number, path)

    events = [Event(origin, None, origin_time)]
    seen = {origin}
    last_time = origin_time
    tokens = tokens_text.split(' ') if tokens_text else []
    for token in tokens:
        parent, node, time = _parse_token(token, line_number, path)
        if parent not in seen:
            raise CascadeParseError(f"padre desconocido {parent} en '{token}'", line_number, path)
        if node in seen:
            raise CascadeParseError(f"nodo repetido {node} en '{token}'", line_number, path)
        if time < last_time:
            raise CascadeParseError(f"retroceso temporal en '{token}'", line_number, path)
        seen.add(node)
        last_time = time
        events.append(Event(node, parent, time))

    if event_count != len(events):
        raise CascadeParseError(
            f"event_count={event_count} no coincide con {len(events)} eventos", line_number, path
        )
    return Cascade(cascade_id, origin, tuple(events), time_unit)


def format_cascade_line(cascade: Cascade) -> str:
    """Serializa una cascada en una línea (sin salto de línea final)"""
    tokens = ' '.join(
        f"{e.parent}/{e.node}:{format_time(e.time)}" for e in cascade.events[1:]
    )
    return '\t'.join((
        cascade.cascade_id,
        str(cascade.origin_node),
        format_time(cascade.origin_time),
        str(cascade.size),
        tokens,
    ))


def serialize_cascades(cascades: Iterable[Cascade], path, time_unit: Optional[str] = None) -> None:
    """
    Escribe cascadas en el formato de texto (salida determinista byte a byte)

    Args:
        cascades: Cascadas válidas
        path: Ruta destino
        time_unit: Unidad a declarar en el encabezado; por defecto la del
            CascadeFile leído o la común a todas las cascadas (sin encabezado
            si no hay una sola)
    """
    if time_unit is None:
        time_unit = getattr(cascades, 'time_unit', None)
    cascades = list(cascades)
    if time_unit is None and cascades:
        units = {c.time_unit for c in cascades}
        time_unit = units.pop() if len(units) == 1 else None
    if time_unit is not None and time_unit not in TIME_UNITS:
        raise InvalidInputError(f"unidad de tiempo desconocida: {time_unit}")

    with atomic_write(path) as handle:
        if time_unit is not None:
            handle.write(f"{HEADER_PREFIX}{time_unit}\n")
        for cascade in cascades:
            handle.write(format_cascade_line(cascade))
            handle.write('\n')
    logger.info(f"{len(cascades)} cascadas escritas en {path}")


def import_path_cascades(path, time_unit: str = 'seconds') -> List[Cascade]:
    """
    Importa registros reales en formato de rutas desde la raíz

    Cada línea: id \\t raíz \\t publicación \\t conteo \\t a:0 a/b:t1 a/b/c:t2 ...
    Los dos últimos elementos de cada ruta son (padre, hijo) y los tiempos son
    relativos al origen. Se descartan adopciones repetidas y huérfanas (padre
    aún no activado), registrándolas en el log.

    Args:
        path: Archivo de registros
        time_unit: Unidad de los tiempos ('seconds' por defecto)

    Returns:
        Lista de Cascade
    """
    path = Path(path)
    cascades = []
    dropped = 0
    with open(path, encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.rstrip('\n')
            if not line.strip():
                continue
            parts = line.split('\t')
            if len(parts) < 5:
                raise CascadeParseError(f"se esperaban 5 campos, hay {len(parts)}", line_number, path)
            cascade_id = parts[0].strip()
            adoptions = []
            for order, token in enumerate(parts[4].split()):
                if ':' not in token:
                    raise CascadeParseError(f"token sin tiempo: '{token}'", line_number, path)
                route, time_text = token.rsplit(':', 1)
                try:
                    time = parse_time(time_text, strict=False)
                except ValueError as e:
                    raise CascadeParseError(f"tiempo inválido en '{token}': {e}", line_number, path)
                hops = [_parse_node(h, line_number, path, strict=False) for h in route.split('/')]
                adoptions.append((time, order, hops))
            if not adoptions:
                continue
            adoptions.sort(key=lambda a: (a[0], a[1]))

            root_time, _, root_hops = adoptions[0]
            origin = root_hops[-1] if len(root_hops) == 1 else root_hops[0]
            events = [Event(origin, None, 0)]
            seen = {origin}
            for time, _, hops in adoptions:
                if len(hops) < 2:
                    continue
                parent, node = hops[-2], hops[-1]
                if node in seen or parent not in seen or time < 0:
                    dropped += 1
                    continue
                seen.add(node)
                events.append(Event(node, parent, time))
            cascades.append(Cascade(cascade_id, origin, tuple(events), time_unit))

    if dropped:
        logger.warning(f"{dropped} adopciones repetidas o huérfanas descartadas al importar {path}")
    logger.info(f"{len(cascades)} cascadas importadas de {path}")
    return cascades


def read_labels(path) -> Dict[str, str]:
    """
    Lee el archivo lateral de etiquetas (CSV cascade_id,class_name)

    Returns:
        dict cascade_id -> class_name
    """
    labels = {}
    with open(path, encoding='utf-8', newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return labels
        if tuple(h.strip() for h in header) != LABELS_HEADER:
            raise CascadeParseError(f"encabezado de etiquetas inválido: {header}", 1, path)
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise CascadeParseError(f"fila de etiquetas inválida: {row}", line_number, path)
            labels[row[0]] = row[1]
    return labels


def write_labels(pairs: Iterable[Tuple[str, str]], path) -> None:
    """Escribe el archivo lateral de etiquetas"""
    with atomic_write(path, newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(LABELS_HEADER)
        for cascade_id, class_name in pairs:
            writer.writerow((cascade_id, class_name))


def _parse_header(line: str, path) -> Optional[str]:
    if not line.startswith(HEADER_PREFIX):
        raise CascadeParseError(f"encabezado desconocido: '{line}'", 1, path)
    unit = line[len(HEADER_PREFIX):]
    if unit not in TIME_UNITS:
        raise CascadeParseError(f"unidad de tiempo desconocida: '{unit}'", 1, path)
    return unit


def _parse_node(text: str, line_number: int, path, strict: bool = True) -> int:
    """Id de nodo decimal; en modo estricto sin ceros a la izquierda"""
    valid = CANONICAL_INT.fullmatch(text) if strict else (text.isascii() and text.isdigit())
    if not valid:
        raise CascadeParseError(f"id de nodo inválido: '{text}'", line_number, path)
    return int(text)


def _parse_token(token: str, line_number: int, path):
    """Convierte '<padre>/<nodo>:<tiempo>' en (padre, nodo, tiempo)"""
    try:
        route, time_text = token.split(':')
        parent_text, node_text = route.split('/')
    except ValueError:
        raise CascadeParseError(f"token mal formado: '{token}'", line_number, path)
    parent = _parse_node(parent_text, line_number, path)
    node = _parse_node(node_text, line_number, path)
    if parent == node:
        raise CascadeParseError(f"token con padre = nodo: '{token}'", line_number, path)
    try:
        time = parse_time(time_text)
    except ValueError as e:
        raise CascadeParseError(f"tiempo inválido en '{token}': {e}", line_number, path)
    return parent, node, time
