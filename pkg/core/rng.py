"""
Counter-based random streams for reproducible experiments.

Every stream is a Philox generator keyed by (seed, *stream_ids), so chunk k
of a computation draws the same numbers no matter which worker runs it.
"""
import numpy as np

GENERATOR_NAME = "philox4x64"


def derive_generator(seed, *stream):
    """
    Builds an independent generator for one (seed, stream) key.

    Args:
        seed (int): 64-bit experiment seed
        *stream (int): Stream identifiers (chunk index, draw index, ...)

    Returns:
        numpy.random.Generator: Philox-backed generator
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    entropy = [int(seed)] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniform_torus(seed, n, count, *stream):
    """
    Draws count uniform points of the n-torus [0, 1)^n.

    Args:
        seed (int): Experiment seed
        n (int): Dimension
        count (int): Number of points
        *stream (int): Stream identifiers

    Returns:
        ndarray: (count, n) array
    """
    return derive_generator(seed, *stream).random((count, n))
