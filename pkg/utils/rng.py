"""
Flujos de números aleatorios derivados de una semilla maestra
"""

import zlib

import numpy as np


def purpose_key(purpose: str) -> int:
    # hash() de Python cambia entre procesos; crc32 no
    return zlib.crc32(purpose.encode("utf-8"))


def derive(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """
    Devuelve un generador independiente para (semilla, propósito, claves...).
    Agregar un consumidor nuevo no perturba los flujos existentes.
    """
    entropy = [int(seed) & 0xFFFFFFFF, purpose_key(purpose), *(int(k) for k in keys)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, purpose: str, *keys: int) -> int:
    """Semilla entera reproducible para APIs que piden un int"""
    return int(derive(seed, purpose, *keys).integers(0, 2**31 - 1))
