"""
Seeded random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by PCG64.  A stream is identified by the master seed plus a tuple of
labels (for example ``("shots", "bfgs", 3)``).  Each label is hashed with
CRC-32 into the ``spawn_key`` of a ``SeedSequence``, so adding a new label
(a new method, a new restart) never shifts the numbers drawn by any other
stream.
"""

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1

# Stream labels used across the package
PROBLEM = "problem"
INITIAL = "initial"
SHOTS = "shots"
OPTIMIZER = "optimizer"
TUNER = "tuner"
LANDSCAPE = "landscape"


def _label_key(label) -> int:
    return zlib.crc32(str(label).encode("utf-8")) & 0xFFFFFFFF


def seed_sequence(seed: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(seed) & SEED_MASK,
        spawn_key=tuple(_label_key(label) for label in labels),
    )


def stream(seed: int, *labels) -> np.random.Generator:
    """
    Generator for the named stream.

    Parameters
    ----------
    seed : int
        Master seed; reduced modulo 2**64.
    *labels
        Stream path; each element is converted with ``str`` before hashing.

    Returns
    -------
    numpy.random.Generator
        A fresh PCG64 generator; identical arguments give identical draws on
        every platform.
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *labels)))
