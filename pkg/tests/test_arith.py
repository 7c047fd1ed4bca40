import math
import random
from fractions import Fraction

import pytest
import sympy

from core.arith import (
    FareyFraction, Residue, dirichlet_fraction, euler_phi, farey_set, inverse_table, is_prime,
    jacobi_symbol, jacobi_table, min_circle_gap, mobius, mod_inverse, primes_in, ramanujan_sum,
    sqrt_mod_prime,
)
from core.errors import EmptyRange, EvenModulus, NoSquareRoot, NotInvertible


def test_mod_inverse():
    assert mod_inverse(3, 7) == Residue(5, 7)
    assert int(mod_inverse(-2, 9)) * (-2) % 9 == 1
    with pytest.raises(NotInvertible):
        mod_inverse(2, 4)


def test_residue_validation():
    with pytest.raises(ValueError):
        Residue(7, 7)


def test_jacobi_symbol_examples_and_euler_criterion():
    assert jacobi_symbol(1, 9) == 1
    assert jacobi_symbol(3, 7) == -1
    assert jacobi_symbol(2, 15) == 1
    assert jacobi_symbol(-1, 7) == -1
    for p in primes_in(3, 400):
        for a in range(p):
            euler = pow(a, (p - 1) // 2, p)
            assert jacobi_symbol(a, p) == (-1 if euler == p - 1 else euler)
    with pytest.raises(EvenModulus):
        jacobi_symbol(3, 4)
    assert list(jacobi_table(5)) == [0, 1, -1, -1, 1]


def test_is_prime_matches_trial_division():
    for n in range(-3, 2000):
        expected = n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))
        assert is_prime(n) == expected
    assert is_prime(2**61 - 1)
    assert not is_prime(2**61 + 1)
    assert not is_prime(3215031751)


def test_primes_in():
    assert primes_in(10, 30) == [11, 13, 17, 19, 23, 29]
    assert primes_in(14, 16) == []
    with pytest.raises(EmptyRange):
        primes_in(5, 4)


def test_multiplicative_functions():
    assert euler_phi(12) == 4
    assert mobius(1) == 1
    assert mobius(30) == -1
    assert mobius(12) == 0


def test_ramanujan_sum_matches_definition():
    for q in range(1, 31):
        for l in range(-10, 40):
            direct = sum(math.cos(2 * math.pi * l * a / q) for a in range(q) if math.gcd(a, q) == 1)
            assert ramanujan_sum(l, q) == round(direct)
    assert ramanujan_sum(0, 13) == 12
    assert ramanujan_sum(1, 13) == -1


def test_farey_set():
    fractions = farey_set([3, 4])
    assert [(f.a, f.q) for f in fractions] == [(1, 4), (1, 3), (2, 3), (3, 4)]
    assert len(farey_set([5, 7, 5])) == 4 + 6
    with_origin = farey_set([1, 2])
    assert (with_origin[0].a, with_origin[0].q) == (0, 1)
    assert with_origin[1].value == Fraction(1, 2)


def test_farey_fraction_validation():
    with pytest.raises(ValueError):
        FareyFraction(2, 4)
    with pytest.raises(ValueError):
        FareyFraction(1, 1)
    assert float(FareyFraction(1, 4)) == 0.25


def test_min_circle_gap_wraps_around():
    assert min_circle_gap(farey_set([3])) == Fraction(1, 3)
    assert min_circle_gap(farey_set([4])) == Fraction(1, 2)
    assert min_circle_gap([FareyFraction(1, 2)]) == 1


def test_sqrt_mod_prime_small():
    for p in primes_in(3, 200):
        for n in range(1, p):
            if pow(n, (p - 1) // 2, p) == 1:
                r = sqrt_mod_prime(n, p)
                assert r * r % p == n
                assert 1 <= r <= p // 2
            else:
                with pytest.raises(NoSquareRoot):
                    sqrt_mod_prime(n, p)
    with pytest.raises(NoSquareRoot):
        sqrt_mod_prime(0, 7)
    assert sqrt_mod_prime(0, 7, allow_zero=True) == 0


def test_sqrt_mod_prime_large_primes():
    for p in (sympy.nextprime(10**6), 998244353, sympy.nextprime(10**12)):
        for base in (2, 12345, 777777):
            n = base * base % p
            r = sqrt_mod_prime(n, p)
            assert r * r % p == n


def test_dirichlet_fraction():
    rng = random.Random(5)
    for _ in range(200):
        t = rng.random()
        N = rng.randint(1, 80)
        a, q = dirichlet_fraction(t, N)
        assert 1 <= q <= N
        assert math.gcd(a, q) == 1
        assert abs(Fraction(t) - Fraction(a, q)) <= Fraction(1, N * q)
    assert dirichlet_fraction(0.5, 10) == (1, 2)
    assert dirichlet_fraction(0.0, 10) == (0, 1)


def test_inverse_table():
    table = inverse_table(8)
    assert table[3] == 3
    assert table[2] == -1
    assert inverse_table(7)[3] == 5
