import math

import numpy as np
import pytest

from core.errors import EvenModulus
from core.exp_sums import (
    CLOSED_FORM, SingularParams, bound_sweep, gauss_sum, kloosterman, kloosterman_table, quad_sum,
    quad_sum_column, quad_sum_row, salie_closed_form_sweep, salie_direct, salie_explicit,
    salie_explicit_table, salie_table, selberg_partial, sigma_multiplicativity, sigma_prime_sweep,
    singular_sigma,
)


def test_gauss_sum_modulus():
    for q in range(1, 200, 2):
        assert abs(abs(gauss_sum(q)) - q ** -0.5) <= 1e-10
    assert abs(gauss_sum(5).value - 5 ** -0.5) <= 1e-12


def test_quad_sum_closed_form_matches_direct():
    for q in (3, 5, 9, 15, 21):
        for a in range(1, q):
            if math.gcd(a, q) != 1:
                continue
            for m in (-4, 0, 1, 7):
                direct = quad_sum(a, m, q).value
                closed = quad_sum(a, m, q, CLOSED_FORM).value
                assert abs(direct - closed) <= 1e-10
    with pytest.raises(EvenModulus):
        quad_sum(1, 1, 8, CLOSED_FORM)


def test_quad_sum_row_and_column():
    q = 12
    row = quad_sum_row(5, q)
    column = quad_sum_column(7, q)
    for a in range(q):
        assert abs(row[a] - quad_sum(a, 5, q).value) <= 1e-12
    for m in range(q):
        assert abs(column[m] - quad_sum(7, m, q).value) <= 1e-12


def test_kloosterman_values():
    assert abs(kloosterman(1, 1, 5).value - (2 - (1 + math.sqrt(5)) / 2)) <= 1e-12
    assert kloosterman(3, 4, 11).imag == 0.0
    # K(0, 0, q) counts units
    assert abs(kloosterman(0, 0, 12).value - 4) <= 1e-12


def test_kloosterman_table_matches_direct():
    q = 9
    table = kloosterman_table(q)
    for a in range(q):
        for b in range(q):
            assert abs(table[a, b] - kloosterman(a, b, q).real) <= 1e-9


def test_salie_examples():
    assert abs(salie_direct(1, 1, 5).value - (-3.6180339887)) <= 1e-9
    assert abs(salie_explicit(1, 1, 5).value - salie_direct(1, 1, 5).value) <= 1e-10
    # non-residue leading coefficient needs the Legendre factor
    assert abs(salie_explicit(2, 2, 5).value - salie_direct(2, 2, 5).value) <= 1e-10
    assert abs(salie_direct(2, 2, 5).value - (-1.3819660113)) <= 1e-9
    with pytest.raises(EvenModulus):
        salie_direct(1, 1, 8)


def test_salie_explicit_over_small_primes():
    for q in (3, 5, 7, 11, 13):
        for a in range(1, q):
            for b in range(1, q):
                if pow(a * b % q, (q - 1) // 2, q) != 1:
                    assert abs(salie_direct(a, b, q).value) <= 1e-9
                    continue
                assert abs(salie_explicit(a, b, q).value - salie_direct(a, b, q).value) <= 1e-9


def test_salie_tables_agree():
    table = salie_table(11)
    explicit = salie_explicit_table(11)
    assert abs(table[3, 5] - salie_direct(3, 5, 11).value) <= 1e-9
    assert np.max(np.abs(table - explicit)[1:, 1:]) <= 1e-9
    rows, worst = salie_closed_form_sweep(23)
    assert [q for q, _ in rows] == [3, 5, 7, 11, 13, 17, 19, 23]
    assert worst <= 1e-8


def test_weil_bound_sweep():
    for kind in ("kloosterman", "salie"):
        rows, worst = bound_sweep(kind, 13)
        assert worst <= 1 + 1e-9
        assert all(len(r) == 7 for r in rows)
    rows, _ = bound_sweep("kloosterman", 5)
    # primes 2, 3, 5 with (q-1)^2 pairs each
    assert len(rows) == 1 + 4 + 16
    with pytest.raises(ValueError):
        bound_sweep("gauss", 5)


def test_singular_sigma_closed_form():
    for m_vec in ((1, 2, 3), (1, 2, 3, 4), (0, 5, 1, 1, 2)):
        for s in (3, 5, 7, 9, 15):
            params = SingularParams(m_vec, 13, s)
            direct = singular_sigma(params).value
            closed = singular_sigma(params, CLOSED_FORM).value
            assert abs(direct - closed) <= 1e-9
    with pytest.raises(EvenModulus):
        singular_sigma(SingularParams((1, 1), 3, 4), CLOSED_FORM)


def test_singular_params_validation():
    with pytest.raises(ValueError):
        SingularParams((1, 2), 5, 1)
    with pytest.raises(ValueError):
        SingularParams((), 5, 3)
    assert SingularParams((1, 2, 3), 5, 3).n == 3


def test_multiplicativity():
    result = sigma_multiplicativity((1, 2, 3), 7, 3, 5)
    assert result["twisted_rel_error"] <= 1e-9
    zero = sigma_multiplicativity((0, 0, 0, 0), 7, 3, 7)
    assert zero["naive_rel_error"] <= 1e-9
    assert zero["twisted_rel_error"] <= 1e-9
    with pytest.raises(ValueError):
        sigma_multiplicativity((1, 2), 7, 3, 6)


def test_multiplicativity_when_sigma_vanishes():
    for m_vec, lam, s1, s2 in (((1, 2, 3), 7, 3, 5), ((2,), 7, 5, 9)):
        result = sigma_multiplicativity(m_vec, lam, s1, s2)
        assert abs(result["sigma"]) <= 1e-12
        assert result["twisted_abs_error"] <= 1e-12
        assert result["twisted_rel_error"] <= 1e-9


def test_selberg_partial():
    partial = selberg_partial(1, 1, 10)
    assert len(partial) == 9
    assert abs(partial[0] - kloosterman(1, 1, 2).value / 2) <= 1e-12
    assert abs(partial[-1] - sum(kloosterman(1, 1, q).value / q for q in range(2, 11))) <= 1e-12


def test_sigma_prime_sweep_shape():
    report = sigma_prime_sweep([4], 7, 2, seed=3)
    assert len(report.rows) == 4 * 2
    assert all(r["ratio"] >= 0 for r in report.rows)
    again = sigma_prime_sweep([4], 7, 2, seed=3)
    assert again.to_dict() == report.to_dict()
