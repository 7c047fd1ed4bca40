"""
Exact integer and modular arithmetic behind every exponential sum.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import factorint, isprime, primerange, sqrt_mod, totient
from sympy import jacobi_symbol as sympy_jacobi

from core.errors import EmptyRange, EvenModulus, NoSquareRoot, NotInvertible


@dataclass(frozen=True)
class Residue:
    """
    A residue class value mod q, stored in [0, q).
    """
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1 or not 0 <= self.value < self.modulus:
            raise ValueError(f"invalid residue {self.value} mod {self.modulus}")

    def __int__(self):
        return self.value


@dataclass(frozen=True)
class FareyFraction:
    """
    A reduced fraction a/q on the circle.

    For q = 1 the only class is the origin 0/1; otherwise 1 <= a <= q - 1.
    """
    a: int
    q: int

    def __post_init__(self):
        if self.q == 1:
            if self.a != 0:
                raise ValueError("the only fraction with q = 1 is 0/1")
        elif not (1 <= self.a <= self.q - 1 and math.gcd(self.a, self.q) == 1):
            raise ValueError(f"{self.a}/{self.q} is not a reduced Farey fraction")

    @property
    def value(self):
        return Fraction(self.a, self.q)

    def __float__(self):
        return self.a / self.q


def mod_inverse(x, q):
    """
    Inverse of x modulo q.

    Args:
        x (int): Value to invert
        q (int): Positive modulus

    Returns:
        Residue: y with x*y = 1 (mod q)

    Raises:
        NotInvertible: If gcd(x, q) > 1
    """
    if q < 1:
        raise ValueError("modulus must be positive")
    try:
        return Residue(pow(x, -1, q), q)
    except ValueError:
        raise NotInvertible(f"{x} is not invertible modulo {q}") from None


def jacobi_symbol(a, q):
    """
    Jacobi symbol (a/q) for odd positive q.

    Args:
        a (int): Top argument
        q (int): Odd positive modulus

    Returns:
        int: -1, 0 or 1

    Raises:
        EvenModulus: If q is even or not positive
    """
    if q < 1 or q % 2 == 0:
        raise EvenModulus(f"Jacobi symbol needs an odd positive modulus, got {q}")
    return int(sympy_jacobi(a % q, q))


def is_prime(q):
    """Deterministic primality test (BPSW, exact for every 64-bit integer)."""
    return bool(isprime(q))


def primes_in(lo, hi):
    """
    All primes in the closed interval [lo, hi].

    Args:
        lo (int): Lower end
        hi (int): Upper end

    Returns:
        list: Increasing list of primes

    Raises:
        EmptyRange: If hi < lo
    """
    if hi < lo:
        raise EmptyRange(f"empty range [{lo}, {hi}]")
    return [int(p) for p in primerange(max(lo, 2), hi + 1)]


def euler_phi(q):
    """Euler's totient of q >= 1."""
    return int(totient(q))


@lru_cache(maxsize=4096)
def mobius(q):
    """Moebius function of q >= 1."""
    exponents = factorint(q).values()
    if any(k > 1 for k in exponents):
        return 0
    return -1 if len(exponents) % 2 else 1


def ramanujan_sum(l, q):
    """
    Ramanujan sum c_q(l), the sum of e(la/q) over reduced residues a mod q.

    Args:
        l (int): Frequency
        q (int): Modulus >= 1

    Returns:
        int: mu(q/g) phi(q) / phi(q/g) with g = gcd(l, q)
    """
    g = math.gcd(l, q)
    h = q // g
    mu = mobius(h)
    if mu == 0:
        return 0
    return mu * euler_phi(q) // euler_phi(h)


def farey_set(moduli):
    """
    All reduced fractions a/q with q in moduli, sorted by exact value.

    Args:
        moduli (iterable): Denominators (duplicates are ignored)

    Returns:
        list: FareyFraction items; the count is the sum of phi(q)
    """
    fractions = []
    for q in sorted(set(int(m) for m in moduli)):
        if q < 1:
            raise ValueError(f"modulus must be positive, got {q}")
        if q == 1:
            fractions.append(FareyFraction(0, 1))
            continue
        fractions.extend(FareyFraction(a, q) for a in range(1, q) if math.gcd(a, q) == 1)
    fractions.sort(key=lambda f: f.value)
    return fractions


def min_circle_gap(fractions):
    """
    Smallest distance between consecutive fractions on the circle R/Z.

    Args:
        fractions (list): Sorted FareyFraction items

    Returns:
        Fraction: The exact minimal gap (1 for a single fraction)
    """
    if len(fractions) < 2:
        return Fraction(1)
    values = [f.value for f in fractions]
    gaps = [b - a for a, b in zip(values, values[1:])]
    gaps.append(values[0] + 1 - values[-1])
    return min(gaps)


def sqrt_mod_prime(n, p, allow_zero=False):
    """
    The smaller square root of n modulo an odd prime p.

    Args:
        n (int): Residue
        p (int): Odd prime
        allow_zero (bool): Accept n = 0 (mod p) and return 0

    Returns:
        int: r in [0, p/2] with r*r = n (mod p)

    Raises:
        NoSquareRoot: If n is a non-residue, or n = 0 and allow_zero is False
    """
    n %= p
    if n == 0:
        if allow_zero:
            return 0
        raise NoSquareRoot(f"0 has no nonzero square root modulo {p}")
    root = sqrt_mod(n, p)
    if root is None:
        raise NoSquareRoot(f"{n} is a quadratic non-residue modulo {p}")
    return min(int(root), p - int(root))


def dirichlet_fraction(t, N):
    """
    Rational approximation a/q to t with q <= N and |t - a/q| <= 1/(Nq).

    Uses the continued-fraction convergents of the exact binary value of t
    reduced to [0, 1).

    Args:
        t (float or Fraction): Point of the circle
        N (int): Denominator cap, N >= 1

    Returns:
        tuple: (a, q) with gcd(a, q) = 1 and 0 <= a <= q
    """
    if N < 1:
        raise ValueError("N must be positive")
    x = Fraction(t) % 1
    p_prev, q_prev = 1, 0
    p_cur, q_cur = int(x), 1
    rest = x - int(x)
    while rest:
        x = 1 / rest
        digit = int(x)
        rest = x - digit
        p_next = digit * p_cur + p_prev
        q_next = digit * q_cur + q_prev
        if q_next > N:
            break
        p_prev, q_prev, p_cur, q_cur = p_cur, q_cur, p_next, q_next
    return p_cur, q_cur


def inverse_table(q):
    """
    Array inv with inv[k] = k* mod q for units k and -1 elsewhere.

    Args:
        q (int): Modulus >= 1

    Returns:
        ndarray: int64 table of length q
    """
    table = np.full(q, -1, dtype=np.int64)
    for k in range(q):
        if math.gcd(k, q) == 1:
            table[k] = pow(k, -1, q) if q > 1 else 0
    return table


def jacobi_table(q):
    """
    Array chi with chi[k] = (k/q) for odd q.

    Args:
        q (int): Odd modulus

    Returns:
        ndarray: int64 table of length q
    """
    if q % 2 == 0:
        raise EvenModulus(f"Jacobi table needs an odd modulus, got {q}")
    return np.array([jacobi_symbol(k, q) for k in range(q)], dtype=np.int64)
