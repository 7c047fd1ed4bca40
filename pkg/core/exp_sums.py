"""
Arithmetic exponential sums: Gauss, quadratic, Kloosterman and Salie sums,
the singular-series factor and Selberg-type partial sums.

All phases are reduced modulo q in integer arithmetic before the exponential
is taken.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from core import bounds
from core.arith import (
    inverse_table, is_prime, jacobi_symbol, jacobi_table, mod_inverse, primes_in,
    sqrt_mod_prime,
)
from core.errors import EvenModulus, RestrictionLabError
from core.numerics import compensated_sum, e_rational
from core.report import ExperimentReport
from core.rng import derive_generator

logger = logging.getLogger(__name__)

DIRECT = "direct"
CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class ExpSumValue:
    """
    A computed exponential sum with the parameters and method that produced it.
    """
    value: complex
    params: tuple
    method: str

    def __abs__(self):
        return abs(self.value)

    @property
    def real(self):
        return self.value.real

    @property
    def imag(self):
        return self.value.imag


@dataclass(frozen=True)
class SingularParams:
    """
    Parameters (m_vec, lambda, s) of a singular-series factor.
    """
    m_vec: tuple
    lam: int
    s: int

    def __post_init__(self):
        if len(self.m_vec) < 1:
            raise ValueError("m_vec must have at least one entry")
        if self.s < 2:
            raise ValueError("singular series modulus must be >= 2")
        object.__setattr__(self, "m_vec", tuple(int(m) for m in self.m_vec))

    @property
    def n(self):
        return len(self.m_vec)


@lru_cache(maxsize=256)
def _units(q):
    """Units k mod q with their inverses, as int64 arrays."""
    inv = inverse_table(q)
    k = np.nonzero(inv >= 0)[0].astype(np.int64)
    return k, inv[k]


def _squares_mod(q):
    k = np.arange(q, dtype=np.int64)
    return k * k % q


def gauss_sum(q):
    """
    Normalized Gauss sum G(q) = (1/q) sum_{k mod q} e(k^2/q).

    Args:
        q (int): Modulus >= 1

    Returns:
        ExpSumValue: |G(q)| = q^(-1/2) for odd q
    """
    if q < 1:
        raise ValueError("modulus must be positive")
    value = compensated_sum(e_rational(_squares_mod(q), q)) / q
    return ExpSumValue(complex(value), (q,), DIRECT)


def quad_sum(a, m, q, method=DIRECT):
    """
    Normalized quadratic sum S(a, m, q) = (1/q) sum_k e((a k^2 - k m)/q).

    Args:
        a (int): Quadratic coefficient
        m (int): Linear frequency
        q (int): Modulus >= 1
        method (str): "direct", or "closed_form" (odd q, gcd(a, q) = 1)

    Returns:
        ExpSumValue: The sum
    """
    if q < 1:
        raise ValueError("modulus must be positive")
    if method == CLOSED_FORM:
        if q % 2 == 0:
            raise EvenModulus("the completed-square form needs an odd modulus")
        # e(-(4a)* m^2 / q) (a/q) G(q)
        inv4a = mod_inverse(4 * a, q).value
        phase = e_rational(-inv4a * (m % q) * (m % q), q)
        value = phase * jacobi_symbol(a, q) * gauss_sum(q).value
        return ExpSumValue(complex(value), (a, m, q), CLOSED_FORM)
    k = np.arange(q, dtype=np.int64)
    num = (k * k % q) * (a % q) - k * (m % q)
    value = compensated_sum(e_rational(num, q)) / q
    return ExpSumValue(complex(value), (a, m, q), DIRECT)


def quad_sum_row(m, q):
    """
    S(a, m, q) for every a in [0, q) with one inverse FFT.

    Args:
        m (int): Linear frequency
        q (int): Modulus >= 1

    Returns:
        ndarray: Complex array indexed by a
    """
    k = np.arange(q, dtype=np.int64)
    twist = e_rational(-k * (m % q), q)
    weights = np.zeros(q, dtype=complex)
    np.add.at(weights, k * k % q, twist)
    # sum_r w_r e(a r / q) / q is the inverse DFT of w
    return np.fft.ifft(weights)


def quad_sum_column(a, q):
    """
    S(a, m, q) for every m in [0, q) with one forward FFT.

    Args:
        a (int): Quadratic coefficient
        q (int): Modulus >= 1

    Returns:
        ndarray: Complex array indexed by m
    """
    k = np.arange(q, dtype=np.int64)
    return np.fft.fft(e_rational(k * k % q * (a % q), q)) / q


def kloosterman(a, b, q):
    """
    Kloosterman sum K(a, b, q) = sum_{(k, q) = 1} e((k a + k* b)/q).

    Args:
        a (int): First frequency
        b (int): Second frequency
        q (int): Modulus >= 2

    Returns:
        ExpSumValue: A real value
    """
    if q < 2:
        raise ValueError("Kloosterman modulus must be >= 2")
    k, kinv = _units(q)
    value = complex(compensated_sum(e_rational(k * (a % q) + kinv * (b % q), q)))
    if abs(value.imag) > 1e-9 * q:
        raise RestrictionLabError(f"Kloosterman sum K({a},{b},{q}) came out non-real: {value}")
    return ExpSumValue(complex(value.real, 0.0), (a, b, q), DIRECT)


def salie_direct(a, b, q):
    """
    Salie sum K2(a, b, q) = sum_{(k, q) = 1} (k/q) e((k a + k* b)/q).

    Args:
        a (int): First frequency
        b (int): Second frequency
        q (int): Odd modulus >= 3

    Returns:
        ExpSumValue: The character-twisted sum

    Raises:
        EvenModulus: If q is even
    """
    if q % 2 == 0:
        raise EvenModulus(f"Salie sums need an odd modulus, got {q}")
    if q < 3:
        raise ValueError("Salie modulus must be >= 3")
    k, kinv = _units(q)
    chi = jacobi_table(q)[k]
    value = compensated_sum(chi * e_rational(k * (a % q) + kinv * (b % q), q))
    return ExpSumValue(complex(value), (a, b, q), DIRECT)


def salie_explicit(a, b, q):
    """
    Closed form of the Salie sum at an odd prime.

    K2(a, b, q) = (a/q) 2q cos(4 pi x / q) G(q) where x^2 = ab (mod q).
    Both roots x and q - x are evaluated and must agree.

    Args:
        a (int): First frequency, a unit mod q
        b (int): Second frequency
        q (int): Odd prime

    Returns:
        ExpSumValue: The closed-form value

    Raises:
        NoSquareRoot: If ab is a non-residue or divisible by q
    """
    if q % 2 == 0:
        raise EvenModulus(f"Salie sums need an odd modulus, got {q}")
    if not is_prime(q):
        raise ValueError(f"the explicit Salie formula needs a prime modulus, got {q}")
    x = sqrt_mod_prime(a * b, q)
    g = gauss_sum(q).value
    sign = jacobi_symbol(a, q)
    values = [sign * 2 * q * math.cos(4 * math.pi * (r % q) / q) * g for r in (x, q - x)]
    if abs(values[0] - values[1]) > 1e-9 * q:
        raise RestrictionLabError(f"Salie roots disagree for ({a},{b},{q})")
    return ExpSumValue(complex(values[0]), (a, b, q), CLOSED_FORM)


def _twisted_table(q, chi):
    k, kinv = _units(q)
    graph = np.zeros((q, q), dtype=complex)
    graph[k, kinv] = chi
    # sum_{u, v} M[u, v] e((u a + v b)/q) is q^2 times the inverse 2-D DFT
    return q * q * np.fft.ifft2(graph)


def kloosterman_table(q):
    """
    K(a, b, q) for every pair (a, b) mod q.

    Args:
        q (int): Modulus >= 2

    Returns:
        ndarray: Real (q, q) array indexed [a, b]
    """
    table = _twisted_table(q, 1.0)
    return table.real


def salie_table(q):
    """
    K2(a, b, q) for every pair (a, b) mod q.

    Args:
        q (int): Odd modulus >= 3

    Returns:
        ndarray: Complex (q, q) array indexed [a, b]
    """
    if q % 2 == 0:
        raise EvenModulus(f"Salie sums need an odd modulus, got {q}")
    k, _ = _units(q)
    return _twisted_table(q, jacobi_table(q)[k].astype(float))


def singular_sigma(params, method=DIRECT):
    """
    Singular-series factor Sigma(s) = sum_{(a,s)=1} prod_j S(a, m_j, s) e(-lambda a/s).

    The closed form (odd s) reduces the product to
    G(s)^n K(-lambda, -4* m~, s) for even n and G(s)^n K2(-lambda, -4* m~, s)
    for odd n, where m~ = m_1^2 + ... + m_n^2.

    Args:
        params (SingularParams): m_vec, lambda and s
        method (str): "direct" or "closed_form"

    Returns:
        ExpSumValue: The factor
    """
    s, lam = params.s, params.lam
    key = (params.m_vec, lam, s)
    if method == CLOSED_FORM:
        if s % 2 == 0:
            raise EvenModulus("the closed-form singular series needs an odd modulus")
        m_tilde = sum(m * m for m in params.m_vec)
        b = -mod_inverse(4, s).value * m_tilde
        if params.n % 2 == 0:
            inner = kloosterman(-lam, b, s).value
        else:
            inner = salie_direct(-lam, b, s).value
        value = gauss_sum(s).value ** params.n * inner
        return ExpSumValue(complex(value), key, CLOSED_FORM)
    units, _ = _units(s)
    product = np.ones(len(units), dtype=complex)
    rows = {}
    for m in params.m_vec:
        if m % s not in rows:
            rows[m % s] = quad_sum_row(m, s)[units]
        product *= rows[m % s]
    value = compensated_sum(product * e_rational(-lam * units, s))
    return ExpSumValue(complex(value), key, DIRECT)


def sigma_multiplicativity(m_vec, lam, s1, s2):
    """
    Compares Sigma(s1 s2) with the naive and the twisted products.

    For coprime s1, s2 the exact identity is
    Sigma_{s1 s2}(m) = Sigma_{s1}(s2* m) Sigma_{s2}(s1* m),
    with s2* the inverse of s2 mod s1 and s1* the inverse of s1 mod s2.
    The naive product Sigma_{s1}(m) Sigma_{s2}(m) agrees whenever m = 0.

    Errors are reported absolute and relative to max(|Sigma(s1 s2)|, 1);
    Sigma(s1 s2) vanishes for many (m, lambda).

    Args:
        m_vec (sequence): Frequency vector
        lam (int): Sphere radius squared
        s1 (int): First modulus >= 2
        s2 (int): Second modulus >= 2, coprime to s1

    Returns:
        dict: Values, absolute and scaled errors of both products
    """
    if math.gcd(s1, s2) != 1:
        raise ValueError(f"moduli {s1} and {s2} are not coprime")
    whole = singular_sigma(SingularParams(tuple(m_vec), lam, s1 * s2)).value
    naive = (singular_sigma(SingularParams(tuple(m_vec), lam, s1)).value
             * singular_sigma(SingularParams(tuple(m_vec), lam, s2)).value)
    inv2 = mod_inverse(s2, s1).value
    inv1 = mod_inverse(s1, s2).value
    twisted = (singular_sigma(SingularParams(tuple(m * inv2 for m in m_vec), lam, s1)).value
               * singular_sigma(SingularParams(tuple(m * inv1 for m in m_vec), lam, s2)).value)
    scale = max(abs(whole), 1.0)
    report = {
        "s1": s1,
        "s2": s2,
        "sigma": whole,
        "naive_product": naive,
        "twisted_product": twisted,
        "naive_abs_error": abs(whole - naive),
        "twisted_abs_error": abs(whole - twisted),
        "naive_rel_error": abs(whole - naive) / scale,
        "twisted_rel_error": abs(whole - twisted) / scale,
    }
    if (s1 * s2) % 2 == 0 and report["naive_rel_error"] > 1e-9:
        logger.warning("Even modulus %d: naive multiplicativity off by %.3g",
                       s1 * s2, report["naive_rel_error"])
    return report


def selberg_partial(m, n, X):
    """
    Running partial sums of K(m, n, q)/q for q = 2..X.

    Args:
        m (int): First frequency
        n (int): Second frequency
        X (int): Upper modulus >= 2

    Returns:
        ndarray: Complex array, entry i is the partial sum up to q = i + 2
    """
    if X < 2:
        raise ValueError("X must be >= 2")
    terms = np.array([kloosterman(m, n, q).value / q for q in range(2, X + 1)])
    return np.cumsum(terms)


def bound_sweep(kind, q_max):
    """
    Exhaustive Weil (Kloosterman) or Salie bound sweep over primes q <= q_max.

    Args:
        kind (str): "kloosterman" or "salie"
        q_max (int): Largest modulus

    Returns:
        tuple: (rows, worst) where rows are
            (q, a, b, value_re, value_im, bound, ratio) for 1 <= a, b <= q - 1
            and worst is the largest ratio |value| / (2 sqrt q)
    """
    if kind not in ("kloosterman", "salie"):
        raise ValueError(f"unknown sum kind: {kind}")
    rows = []
    worst = 0.0
    lo = 3 if kind == "salie" else 2
    for q in primes_in(lo, q_max) if q_max >= lo else []:
        table = kloosterman_table(q) if kind == "kloosterman" else salie_table(q)
        bound = bounds.weil_bound(q) if kind == "kloosterman" else bounds.salie_bound(q)
        block = np.asarray(table)[1:, 1:]
        ratios = np.abs(block) / bound
        worst = max(worst, float(ratios.max()))
        for a in range(1, q):
            for b in range(1, q):
                value = complex(block[a - 1, b - 1])
                rows.append((q, a, b, value.real, value.imag, bound, float(ratios[a - 1, b - 1])))
    logger.info("%s sweep to q=%d: %d rows, worst ratio %.4f", kind, q_max, len(rows), worst)
    return rows, worst


def salie_explicit_table(q):
    """
    The closed form (a/q) 2q cos(4 pi x/q) G(q) for every pair (a, b), with
    x^2 = ab; zero where ab is a non-residue.

    Args:
        q (int): Odd prime

    Returns:
        ndarray: Complex (q, q) array indexed [a, b]; row and column 0 are unused
    """
    if q % 2 == 0 or not is_prime(q):
        raise ValueError(f"the explicit Salie formula needs an odd prime, got {q}")
    x = np.arange(q, dtype=np.int64)
    root = np.full(q, -1, dtype=np.int64)
    root[x * x % q] = x
    a = x[:, None]
    b = x[None, :]
    r = root[a * b % q]
    chi = jacobi_table(q)[x].astype(float)[:, None]
    values = np.where(r >= 0, chi * 2 * q * np.cos(4 * np.pi * np.maximum(r, 0) / q), 0.0)
    return values * gauss_sum(q).value


def salie_closed_form_sweep(q_max):
    """
    Largest |direct - explicit| Salie difference over all primes 3 <= q <= q_max
    and all 1 <= a, b <= q - 1.

    Returns:
        tuple: (rows, worst) with one row (q, max_abs_diff) per prime
    """
    rows = []
    worst = 0.0
    for q in primes_in(3, q_max) if q_max >= 3 else []:
        diff = float(np.abs(salie_table(q) - salie_explicit_table(q))[1:, 1:].max())
        rows.append((q, diff))
        worst = max(worst, diff)
    return rows, worst


def sigma_prime_sweep(ns, q_max, draws, seed, m_range=50, lam_range=10**4):
    """
    |Sigma(q)| against C q^eps (sqrt q)^(1-n) sqrt(gcd(lambda, q)) at primes.

    Args:
        ns (sequence): Dimensions
        q_max (int): Largest prime modulus
        draws (int): Random (m_vec, lambda) per (n, q)
        seed (int): Experiment seed
        m_range (int): Frequencies drawn from [-m_range, m_range]
        lam_range (int): lambda drawn from [1, lam_range]

    Returns:
        ExperimentReport: One row per draw and the worst ratio
    """
    rows = []
    for n in ns:
        for q in primes_in(2, q_max):
            rng = derive_generator(seed, n, q)
            for _ in range(draws):
                m_vec = tuple(int(v) for v in rng.integers(-m_range, m_range + 1, size=n))
                lam = int(rng.integers(1, lam_range + 1))
                value = abs(singular_sigma(SingularParams(m_vec, lam, q)).value)
                envelope = bounds.sigma_prime_envelope(n, q, lam)
                rows.append({"n": n, "q": q, "m_vec": list(m_vec), "lambda": lam,
                             "abs_sigma": value, "envelope": envelope, "ratio": value / envelope})
    worst = max((r["ratio"] for r in rows), default=0.0)
    summary = {"worst_ratio": worst, "passed": worst <= 1.0}
    return ExperimentReport("sigma_prime_bound", {"ns": list(ns), "q_max": q_max, "draws": draws,
                                                  "seed": seed}, rows, summary)
