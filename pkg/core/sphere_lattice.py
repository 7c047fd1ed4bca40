"""
Integer points on spheres: enumeration, counting and the three-square
obstruction.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from core import bounds
from core.batch_processor import BatchProcessor
from core.errors import BudgetExceeded

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**8


@dataclass(frozen=True)
class SphereShell:
    """
    The lattice shell F_{n,lambda}: all xi in Z^n with |xi|^2 = lambda.

    Points are an int16 array of shape (count, n) in lexicographic order.
    """
    n: int
    lam: int
    points: np.ndarray = field(repr=False)

    @property
    def N(self):
        return math.isqrt(self.lam) + 1

    def __len__(self):
        return len(self.points)

    @property
    def is_empty(self):
        return len(self.points) == 0


def three_square_obstructed(lam):
    """
    Tells whether lambda = 4^a (8m + 7), i.e. not a sum of three squares.

    Args:
        lam (int): Positive integer

    Returns:
        bool: True for obstructed values
    """
    if lam < 1:
        raise ValueError("lambda must be positive")
    while lam % 4 == 0:
        lam //= 4
    return lam % 8 == 7


def _convolve_squares(table, lam_max):
    """Exact integer convolution of a count table with the one-square series."""
    out = np.zeros(lam_max + 1, dtype=np.int64)
    size = len(table)
    for k in range(math.isqrt(lam_max) + 1):
        shift = k * k
        width = min(size, lam_max + 1 - shift)
        if width <= 0:
            break
        out[shift:shift + width] += (1 if k == 0 else 2) * table[:width]
    return out


def shell_table(n, lam_max):
    """
    Counts r_n(lambda) for every 0 <= lambda <= lam_max.

    Args:
        n (int): Dimension >= 1
        lam_max (int): Largest radius squared

    Returns:
        ndarray: int64 array of length lam_max + 1
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    table = np.zeros(lam_max + 1, dtype=np.int64)
    table[0] = 1
    for _ in range(n):
        table = _convolve_squares(table, lam_max)
    return table


def shell_count(n, lam):
    """
    |F_{n,lambda}| without materializing points.

    Args:
        n (int): Dimension >= 1
        lam (int): Radius squared >= 0

    Returns:
        int: Number of lattice points
    """
    if n < 1 or lam < 0:
        raise ValueError("need n >= 1 and lambda >= 0")
    if n == 1:
        root = math.isqrt(lam)
        return 0 if root * root != lam else (1 if lam == 0 else 2)
    partial = shell_table(n - 1, lam)
    total = 0
    for k in range(math.isqrt(lam) + 1):
        total += (1 if k == 0 else 2) * int(partial[lam - k * k])
    return total


def _pair_table(lam):
    """All (x, y) with x^2 + y^2 <= lam grouped by x^2 + y^2, lexicographic per group."""
    r = math.isqrt(lam)
    axis = np.arange(-r, r + 1, dtype=np.int64)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    x, y = x.ravel(), y.ravel()
    norm = x * x + y * y
    keep = norm <= lam
    x, y, norm = x[keep], y[keep], norm[keep]
    order = np.lexsort((y, x, norm))
    counts = np.bincount(norm, minlength=lam + 1)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return np.stack([x[order], y[order]], axis=1), counts, offsets


def _expand_prefixes(prefix, rem, levels):
    """Lexicographic descent: extend each prefix by every coordinate value that fits."""
    for _ in range(levels):
        m = np.floor(np.sqrt(rem.astype(float))).astype(np.int64)
        m -= (m * m > rem)
        m += ((m + 1) * (m + 1) <= rem)
        width = 2 * m + 1
        rows = np.repeat(np.arange(len(rem)), width)
        starts = np.concatenate(([0], np.cumsum(width)[:-1]))
        local = np.arange(int(width.sum())) - np.repeat(starts, width)
        values = local - m[rows]
        prefix = np.concatenate([prefix[rows], values[:, None]], axis=1)
        rem = rem[rows] - values * values
    return prefix, rem


def _enumerate(n, lam, head=None):
    """Points of F_{n,lambda} in lexicographic order, optionally under a fixed first coordinate."""
    if n == 1:
        root = math.isqrt(lam)
        if root * root != lam:
            return np.zeros((0, 1), dtype=np.int64)
        values = [0] if lam == 0 else [-root, root]
        return np.array(values, dtype=np.int64)[:, None]
    prefix = np.zeros((1, 0), dtype=np.int64)
    rem = np.array([lam], dtype=np.int64)
    levels = n - 2
    if head is not None:
        prefix = np.array([[head]], dtype=np.int64)
        rem = rem - head * head
        levels -= 1
    prefix, rem = _expand_prefixes(prefix, rem, levels)
    pairs, counts, offsets = _pair_table(lam)
    reps = counts[rem]
    rows = np.repeat(np.arange(len(rem)), reps)
    starts = np.concatenate(([0], np.cumsum(reps)[:-1]))
    local = np.arange(int(reps.sum())) - np.repeat(starts, reps)
    tails = pairs[offsets[rem[rows]] + local]
    return np.concatenate([prefix[rows], tails], axis=1)


def enumerate_shell(n, lam, budget=DEFAULT_BUDGET, workers=1):
    """
    Enumerates F_{n,lambda} by lexicographic descent.

    Args:
        n (int): Dimension >= 1
        lam (int): Radius squared >= 1
        budget (int): Maximum number of points to materialize
        workers (int): Threads used to split the first coordinate range

    Returns:
        SphereShell: The complete shell

    Raises:
        BudgetExceeded: If the shell has more than budget points
    """
    if n < 1 or lam < 1:
        raise ValueError("need n >= 1 and lambda >= 1")
    if lam >= 1 << 30:
        raise BudgetExceeded("lambda >= 2**30 does not fit 16-bit coordinates")
    count = shell_count(n, lam)
    if count > budget:
        raise BudgetExceeded(f"|F_{{{n},{lam}}}| = {count} exceeds the budget of {budget} points")
    if n >= 3 and workers > 1:
        r = math.isqrt(lam)
        heads = list(range(-r, r + 1))
        blocks = BatchProcessor(workers).run(lambda h: _enumerate(n, lam, head=h), heads)
        points = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, n), dtype=np.int64)
    else:
        points = _enumerate(n, lam)
    if len(points) != count:
        raise RuntimeError(f"enumeration found {len(points)} points, counting found {count}")
    logger.debug("Enumerated F_{%d,%d}: %d points", n, lam, count)
    points = points.astype(np.int16)
    points.setflags(write=False)
    return SphereShell(n, lam, points)


def typical_lambda(n, target, max_steps=100000):
    """
    Smallest lambda >= target whose shell has at least N^(n-2)/4 points.

    Args:
        n (int): Dimension
        target (int): Starting value
        max_steps (int): Search horizon

    Returns:
        int: The selected lambda
    """
    hi = target + max_steps
    table = shell_table(n, hi)
    for lam in range(max(target, 1), hi + 1):
        N = math.isqrt(lam) + 1
        if table[lam] >= bounds.shell_size_envelope(n, N) / 4:
            return lam
    raise ValueError(f"no typical lambda within {max_steps} of {target}")


def signed_permutation_closed(shell):
    """
    Checks that every signed coordinate permutation maps the shell onto itself.

    Args:
        shell (SphereShell): Shell to check

    Returns:
        bool: True if the point set is invariant
    """
    base = {tuple(p) for p in shell.points.tolist()}
    for perm in permutations(range(shell.n)):
        for signs in range(1 << shell.n):
            flip = np.array([-1 if signs >> i & 1 else 1 for i in range(shell.n)])
            moved = {tuple(p) for p in (shell.points[:, perm] * flip).tolist()}
            if moved != base:
                return False
    return True
