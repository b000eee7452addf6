"""
Escritura atómica de archivos de salida
"""
from contextlib import contextmanager
from pathlib import Path
import logging
import os
import tempfile

logger = logging.getLogger(__name__)


@contextmanager
def atomic_write(path, mode: str = 'w', encoding: str = 'utf-8', newline: str = '\n'):
    """
    Escribe un archivo en un temporal del mismo directorio y lo renombra al final

    Si ocurre una excepción dentro del bloque, el temporal se borra y el
    destino queda intacto (nunca hay salidas parciales).

    Args:
        path: Ruta destino
        mode: 'w' (texto) o 'wb' (binario)
        encoding: Codificación para modo texto
        newline: Fin de línea para modo texto

    Yields:
        Manejador de archivo abierto sobre el temporal
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix='.tmp', dir=str(target.parent))
    try:
        if 'b' in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, encoding=encoding, newline=newline)
        with handle:
            yield handle
        os.replace(tmp_name, target)
        logger.debug(f"Archivo escrito: {target}")
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def write_text_atomic(path, text: str) -> None:
    """Escribe una cadena completa de forma atómica"""
    with atomic_write(path) as handle:
        handle.write(text)


def provenance_path(output) -> Path:
    """
    Ruta donde se guarda la configuración resuelta de una salida

    Args:
        output: Directorio o archivo de salida

    Returns:
        Path: <dir>/run_config.cfg para directorios, <archivo>.run.cfg para archivos
    """
    output = Path(output)
    if output.is_dir():
        return output / 'run_config.cfg'
    return output.with_name(output.name + '.run.cfg')
