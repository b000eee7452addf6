"""
Excepciones custom para el laboratorio de cascadas
"""
import logging
import sys

import click

logger = logging.getLogger(__name__)

# Códigos de salida de la CLI
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class CascadeLabException(Exception):
    """Excepción base para errores del laboratorio de cascadas"""

    def __init__(self, message, exit_code=EXIT_RUNTIME, payload=None):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code
        self.payload = payload

    def to_dict(self):
        rv = dict(self.payload or ())
        rv['error'] = self.message
        rv['exit_code'] = self.exit_code
        return rv


class InvalidConfigError(CascadeLabException):
    """Configuración inválida (parámetros, flags o archivo de configuración)"""

    def __init__(self, message, field=None):
        payload = {'type': 'invalid_config'}
        if field:
            payload['field'] = field
        super().__init__(message, exit_code=EXIT_USAGE, payload=payload)
        self.field = field


class InvalidInputError(CascadeLabException):
    """Entrada inválida para una operación (grafo vacío, dimensiones, etc.)"""

    def __init__(self, message, details=None):
        payload = {'type': 'invalid_input'}
        if details:
            payload['details'] = details
        super().__init__(message, exit_code=EXIT_RUNTIME, payload=payload)


class GenerationFailureError(CascadeLabException):
    """No se pudo generar la red dentro del número máximo de iteraciones"""

    def __init__(self, message, iterations):
        super().__init__(
            message,
            exit_code=EXIT_RUNTIME,
            payload={'type': 'generation_failure', 'iterations': iterations}
        )
        self.iterations = iterations


class ProgressFailureError(CascadeLabException):
    """La simulación no logra producir cascadas que pasen el filtro de tamaño"""

    def __init__(self, message, rejections):
        super().__init__(
            message,
            exit_code=EXIT_RUNTIME,
            payload={'type': 'progress_failure', 'rejections': rejections}
        )
        self.rejections = rejections


class CascadeParseError(CascadeLabException):
    """Error de formato en un archivo de cascadas"""

    def __init__(self, message, line_number=None, path=None):
        payload = {'type': 'parse'}
        if line_number is not None:
            payload['line'] = line_number
        if path:
            payload['path'] = str(path)
        prefix = f"línea {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}", exit_code=EXIT_RUNTIME, payload=payload)
        self.line_number = line_number


class DegenerateModelError(CascadeLabException):
    """El conjunto de entrenamiento no permite un clasificador (una sola clase)"""

    def __init__(self, message, class_count=None):
        payload = {'type': 'degenerate_model'}
        if class_count is not None:
            payload['class_count'] = class_count
        super().__init__(message, exit_code=EXIT_RUNTIME, payload=payload)


class ModelFormatError(CascadeLabException):
    """Archivo de modelo ilegible o de versión no soportada"""

    def __init__(self, message, path=None):
        payload = {'type': 'model_format'}
        if path:
            payload['path'] = str(path)
        super().__init__(message, exit_code=EXIT_RUNTIME, payload=payload)


class LeakageError(CascadeLabException):
    """Cascadas de prueba presentes en algún conjunto de entrenamiento"""

    def __init__(self, message, leaked_ids):
        leaked = sorted(leaked_ids)
        super().__init__(
            message,
            exit_code=EXIT_RUNTIME,
            payload={'type': 'leakage', 'leaked_ids': leaked[:20], 'leaked_count': len(leaked)}
        )


def pydantic_to_config_error(error, context=None):
    """
    Convierte un ValidationError de pydantic en InvalidConfigError

    Args:
        error: pydantic.ValidationError
        context: Nombre de la sección o modelo que se estaba validando

    Returns:
        InvalidConfigError con el primer campo inválido
    """
    problems = []
    first_field = None
    for item in error.errors():
        field = '.'.join(str(p) for p in item.get('loc', ()))
        if first_field is None:
            first_field = field
        problems.append(f"{field}: {item.get('msg')}")
    prefix = f"[{context}] " if context else ""
    return InvalidConfigError(f"{prefix}{'; '.join(problems)}", field=first_field)


def handle_cli_error(error):
    """
    Maneja una excepción que llegó hasta la CLI y decide el código de salida

    Args:
        error: Excepción capturada en main()

    Returns:
        int: Código de salida (1 uso, 2 ejecución)
    """
    if isinstance(error, click.exceptions.UsageError):
        logger.warning(f"Error de uso: {error.format_message()}")
        click.echo(f"Error: {error.format_message()}", err=True)
        return EXIT_USAGE

    if isinstance(error, click.ClickException):
        logger.warning(f"Error de CLI: {error.format_message()}")
        click.echo(f"Error: {error.format_message()}", err=True)
        return EXIT_USAGE

    if isinstance(error, CascadeLabException):
        if error.exit_code == EXIT_USAGE:
            logger.warning(f"{type(error).__name__}: {error.message}")
        else:
            logger.error(f"{type(error).__name__}: {error.message}", extra={'payload': error.payload})
        click.echo(f"Error: {error.message}", err=True)
        return error.exit_code

    if isinstance(error, OSError):
        logger.error(f"Error de E/S: {error}")
        click.echo(f"Error de E/S: {error}", err=True)
        return EXIT_RUNTIME

    logger.error(f"Error inesperado: {error}", exc_info=error)
    print(f"Error inesperado: {type(error).__name__}: {error}", file=sys.stderr)
    return EXIT_RUNTIME
