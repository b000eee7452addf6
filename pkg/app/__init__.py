"""
Laboratorio de clasificación de cascadas de información
Redes sintéticas, simulación de difusión y clasificadores de origen
"""
from logging.handlers import RotatingFileHandler
import logging
import os

__version__ = '1.0.0'

LOG_FORMAT = '[%(asctime)s] %(levelname)s en %(module)s.%(funcName)s:%(lineno)d - %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'
NOISY_LOGGERS = ('matplotlib', 'PIL', 'numexpr')


def setup_logging(level=None, log_file=None):
    """
    Configura el sistema de logging del laboratorio

    Los logs van siempre a stderr (los datos solo a archivos). Con log_file,
    además a un archivo rotativo de 10MB.

    Args:
        level: Nivel de log (nombre o número); por defecto LOG_LEVEL o INFO
        log_file: Ruta del archivo de log; por defecto CASCADELAB_LOG_FILE

    Returns:
        logging.Logger: Logger raíz del paquete
    """
    if level is None:
        level = os.getenv('LOG_LEVEL', 'INFO')
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    if log_file is None:
        log_file = os.getenv('CASCADELAB_LOG_FILE')

    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATEFMT)
    package_logger = logging.getLogger('app')
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
        handler.close()

    # Handler de consola (siempre activo)
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(level)
    package_logger.addHandler(console_handler)

    if log_file:
        try:
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=10240000,  # 10MB
                backupCount=10
            )
            file_handler.setFormatter(formatter)
            file_handler.setLevel(level)
            package_logger.addHandler(file_handler)
        except OSError as e:
            package_logger.warning(f"No se pudo crear archivo de log: {e}")

    package_logger.setLevel(level)

    # Reducir ruido de otros loggers
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    return package_logger
