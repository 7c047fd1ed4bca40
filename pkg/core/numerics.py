"""
Shared numerical helpers: characters e(z), compensated sums, Gauss-Legendre
panels and the smooth steps the bump functions are built from.
"""
import math
from functools import lru_cache

import numpy as np

# Above this many terms, sums are accumulated with math.fsum
COMPENSATED_THRESHOLD = 10**6

TWO_PI = 2.0 * np.pi


def e(z):
    """
    The additive character e(z) = exp(2 pi i z).

    Args:
        z (float or ndarray): Real argument(s)

    Returns:
        complex or ndarray: exp(2 pi i z)
    """
    return np.exp(1j * TWO_PI * np.asarray(z, dtype=float))


def e_rational(num, den):
    """
    Evaluates e(num/den) after reducing num modulo den in integer arithmetic.

    Args:
        num (int or ndarray): Integer numerator(s)
        den (int): Positive denominator

    Returns:
        complex or ndarray: e(num/den)
    """
    if isinstance(num, (int, np.integer)):
        return complex(np.exp(1j * TWO_PI * ((int(num) % den) / den)))
    reduced = np.mod(np.asarray(num, dtype=np.int64), den)
    return np.exp(1j * TWO_PI * (reduced / den))


def compensated_sum(values):
    """
    Sums real or complex values, switching to math.fsum for long inputs.

    Args:
        values (array-like): Values to add

    Returns:
        float or complex: The sum
    """
    arr = np.asarray(values)
    if arr.size <= COMPENSATED_THRESHOLD:
        return arr.sum()
    flat = arr.ravel()
    if np.iscomplexobj(flat):
        return complex(math.fsum(flat.real), math.fsum(flat.imag))
    return math.fsum(flat)


@lru_cache(maxsize=64)
def legendre_rule(order):
    """
    Cached Gauss-Legendre nodes and weights on [-1, 1].

    Args:
        order (int): Number of nodes

    Returns:
        tuple: (nodes, weights) as read-only arrays
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_nodes(lo, hi, panels, order=16):
    """
    Composite Gauss-Legendre nodes and weights on [lo, hi].

    Args:
        lo (float): Left end
        hi (float): Right end
        panels (int): Number of equal panels
        order (int): Nodes per panel

    Returns:
        tuple: (nodes, weights) flattened over all panels
    """
    base_x, base_w = legendre_rule(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    return nodes, weights


def integrate_panels(func, lo, hi, panels, order=16):
    """
    Integrates a vectorized function with composite Gauss-Legendre.

    Args:
        func (callable): Maps an ndarray of nodes to values
        lo (float): Left end
        hi (float): Right end
        panels (int): Number of panels
        order (int): Nodes per panel

    Returns:
        float or complex: The quadrature value
    """
    nodes, weights = panel_nodes(lo, hi, panels, order)
    return compensated_sum(func(nodes) * weights)


def _psi(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """
    C-infinity step: 0 for u <= 0, 1 for u >= 1, monotone in between.

    Args:
        u (float or ndarray): Argument

    Returns:
        ndarray: Step values in [0, 1]
    """
    u = np.asarray(u, dtype=float)
    a = _psi(u)
    b = _psi(1.0 - u)
    return a / (a + b)
