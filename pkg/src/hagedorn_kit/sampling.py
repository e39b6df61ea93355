"""Seeded random symplectic matrices built as words in the generators J, V_R, M_L."""

from __future__ import annotations

import zlib
import numpy as np
from scipy.linalg import expm

from .grid import MetaplecticFactor, word_matrix
from .symplectic import NormalizedPair, pair_from_symplectic


def make_rng(seed: int, stream: str = "") -> np.random.Generator:
    """PCG64 generator keyed by an integer seed and a stream name.

    The stream name is hashed with CRC32 so that independent suites draw
    from independent, reproducible streams.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), zlib.crc32(stream.encode())])))


def _rotation(rng: np.random.Generator, d: int, scale: float) -> np.ndarray:
    X = rng.uniform(-scale, scale, size=(d, d))
    return expm(0.5 * (X - X.T))


def random_word(rng: np.random.Generator, d: int, length: int = 4, strength: float = 1.0) -> list[MetaplecticFactor]:
    """Draw a generator word of the given length.

    ``strength`` scales the chirp and dilation parameters; 1 gives matrices with
    entries of order one, smaller values give milder transformations that stay
    well resolved on grids.
    """
    word = []
    for _ in range(length):
        k = int(rng.integers(3))
        if k == 0:
            word.append(MetaplecticFactor("J"))
        elif k == 1:
            X = rng.uniform(-strength, strength, size=(d, d))
            word.append(MetaplecticFactor("V", 0.5 * (X + X.T)))
        else:
            s = np.exp(rng.uniform(-0.5 * strength, 0.5 * strength, size=d))
            L = _rotation(rng, d, np.pi * strength) @ np.diag(s) @ _rotation(rng, d, np.pi * strength)
            word.append(MetaplecticFactor("M", L))
    return word


def random_symplectic(rng: np.random.Generator, d: int, length: int = 4, strength: float = 1.0) -> np.ndarray:
    """Random symplectic matrix as a product of ``length`` generators."""
    return word_matrix(random_word(rng, d, length, strength), d)


def random_center(rng: np.random.Generator, d: int, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    return rng.uniform(-scale, scale, size=d), rng.uniform(-scale, scale, size=d)


def random_pair(rng: np.random.Generator, d: int, hbar: float = 1.0, length: int = 4,
                strength: float = 1.0, center_scale: float = 1.0) -> NormalizedPair:
    """Random valid Hagedorn parameter set."""
    S = random_symplectic(rng, d, length, strength)
    q, p = random_center(rng, d, center_scale)
    return pair_from_symplectic(S, q, p, hbar)
