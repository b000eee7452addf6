#!/usr/bin/env python
"""
Script para generar una semilla maestra de 64 bits
Ejecutar: python scripts/generate_master_seed.py
"""
import secrets

SEED_BITS = 64


def generate_master_seed(bits=SEED_BITS):
    """
    Genera una semilla maestra aleatoria

    Args:
        bits: Bits de la semilla (default: 64, el rango que acepta run.seed)

    Returns:
        int en [0, 2^bits)
    """
    return secrets.randbits(bits)


def main():
    print("=" * 70)
    print("GENERADOR DE SEMILLA MAESTRA")
    print("=" * 70)
    print()

    seed = generate_master_seed()

    print("Tu nueva semilla maestra:")
    print()
    print(f"  {seed}")
    print()
    print("=" * 70)
    print("INSTRUCCIONES:")
    print("=" * 70)
    print()
    print("1. Agrégala a tu archivo .env:")
    print(f"   CASCADELAB_SEED={seed}")
    print()
    print("2. O escríbela en la sección [run] del archivo de configuración:")
    print(f"   seed = {seed}")
    print()
    print("Todas las semillas de redes, simulaciones, particiones y modelos")
    print("se derivan de ella; cada salida guarda su run_config.cfg.")
    print("=" * 70)


if __name__ == "__main__":
    main()
