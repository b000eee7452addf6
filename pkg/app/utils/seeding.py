"""
Derivación de semillas reproducibles

Toda semilla de componente se deriva de (semilla maestra, etiqueta de fase,
índice) con BLAKE2b, de modo que una tabla completa se reproduce a partir de
un solo entero y el resultado no depende del orden de ejecución de los hilos.
"""
import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """
    Deriva una semilla de 64 bits para un componente

    Args:
        master: Semilla maestra (entero sin signo de 64 bits)
        tag: Etiqueta de fase, ej: "network/BA", "split", "gcn"
        index: Índice dentro de la fase (red, cascada, repetición...)

    Returns:
        int: Semilla derivada en [0, 2^64)

    Ejemplos:
        >>> derive_seed(1, "split") == derive_seed(1, "split")
        True
    """
    payload = f"{int(master) & SEED_MASK}:{tag}:{int(index)}".encode('utf-8')
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, 'big')


def make_rng(seed: int, *stream) -> np.random.Generator:
    """
    Crea un generador numpy independiente para (seed, *stream)

    Args:
        seed: Semilla base de 64 bits
        stream: Enteros adicionales que identifican el flujo (ej: índice de cascada)

    Returns:
        numpy.random.Generator
    """
    entropy = [int(seed) & SEED_MASK] + [int(s) & SEED_MASK for s in stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))
