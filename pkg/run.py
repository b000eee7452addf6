"""
Entry point de la CLI del laboratorio de cascadas

Uso:
    python run.py experiment tables --config desk.cfg --out results/
"""
import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
