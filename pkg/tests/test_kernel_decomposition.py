import numpy as np
import pytest

from core import bounds
from core.errors import EmptyShell, InsufficientNodes
from core.kernel_decomposition import (
    ArcQuadrature, build_mollifier, build_sec7_family, decomposition_check, dyadic_supnorm_sweep,
    exactness_threshold, fourier_coefficient, fourier_remainder_sweep, fourier_sup, kernel_direct,
    kernel_direct_many, kernel_integral, kernel_minor, kernel_piece, kernel_piece_spectral,
    levelset_chain_check, mollifier_transform_direct, sup_norm_estimate,
)
from core.restriction_experiments import make_coefficients
from core.rng import derive_generator
from core.sphere_lattice import SphereShell
from core.weyl_oscillatory import BumpFunction

GAMMA = BumpFunction("gamma")


def test_kernel_at_origin_counts_the_shell(shell_2_25):
    assert kernel_direct(shell_2_25, [0.0, 0.0]) == complex(12, 0)
    values = kernel_direct_many(shell_2_25, np.zeros((3, 2)))
    assert np.allclose(values, 12.0)


def test_kernel_is_real_and_even(shell_2_25):
    x = np.array([0.137, 0.58])
    value = kernel_direct(shell_2_25, x)
    assert abs(value.imag) <= 1e-12
    assert abs(value - kernel_direct(shell_2_25, -x)) <= 1e-12


def test_kernel_of_empty_shell_is_zero():
    empty = SphereShell(3, 7, np.zeros((0, 3), dtype=np.int16))
    assert kernel_direct(empty, [0.1, 0.2, 0.3]) == 0j
    assert np.all(kernel_direct_many(empty, np.zeros((2, 3))) == 0)


def test_kernel_integral_matches_direct_sum(shell_2_25):
    N = 6
    M = exactness_threshold(2, 25, N)
    for x in derive_generator(5, 7).random((4, 2)):
        assert abs(kernel_integral(2, 25, N, GAMMA, x, M) - kernel_direct(shell_2_25, x)) <= 1e-8


def test_kernel_integral_rejects_coarse_grid():
    with pytest.raises(InsufficientNodes):
        kernel_integral(2, 25, 6, GAMMA, [0.1, 0.2], 100)
    with pytest.raises(ValueError):
        kernel_integral(2, 25, 6, GAMMA, [0.1, 0.2, 0.3], exactness_threshold(2, 25, 6))


def test_prime_mollifier_fractions_and_mass():
    # primes 13, 17, 19, 23 give 12 + 16 + 18 + 22 reduced fractions
    spec = build_mollifier("sec4", 13, 12)
    assert len(spec.fractions) == 68
    assert spec.scale == 10 * 13 * 13
    assert abs(spec.mass() - 1.0) <= 1e-10
    assert np.all(spec.evaluate(np.linspace(0, 1, 101)) >= 0)


def test_mollifier_parameter_checks():
    with pytest.raises(ValueError):
        build_mollifier("sec4", 11, 12)
    with pytest.raises(ValueError):
        build_mollifier("sec4", 145, 12)
    with pytest.raises(ValueError):
        build_mollifier("sec7", 1, 12)
    with pytest.raises(ValueError):
        build_mollifier("sec7", 4, 12, s=2, major_cut=4)
    with pytest.raises(ValueError):
        build_mollifier("arcs", 13, 12)


def test_all_moduli_variant_has_more_fractions():
    assert len(build_mollifier("sec4_all", 3, 3).fractions) > len(build_mollifier("sec4", 3, 3).fractions)


def test_mollifier_transform_closed_form_matches_grid():
    spec = build_mollifier("sec4", 3, 3)
    ls = np.array([0, 1, -1, 5, 12, -30])
    direct = mollifier_transform_direct(spec, ls)
    for l, value in zip(ls.tolist(), direct):
        closed = spec.transform(l)
        assert abs(value - closed) <= 1e-6 * max(abs(closed), 1.0 / 3)


def test_dyadic_family_pieces_and_partition():
    family = build_sec7_family(12, major_cut=4)
    # Q = 1 with s = 0..3 and Q = 2 with s = 1..3
    assert len(family) == 7
    assert {(spec.Q, spec.s) for spec in family.specs} == {
        (1, 0), (1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)}
    ts = derive_generator(3, 10).random(200)
    assert np.allclose(family.rho(ts) + family.eta_sum(ts), 1.0)
    masses = sum(spec.mass() for spec in family.specs)
    assert abs(family.rho_transform(0) - (1.0 - masses)) <= 1e-12


def test_dyadic_family_empty_for_small_scale():
    family = build_sec7_family(12)
    assert len(family) == 0
    assert np.all(family.rho(np.array([0.0, 0.3])) == 1.0)


def test_fourier_coefficient_of_kernel_is_shell_indicator():
    assert fourier_coefficient("K", (3, 4), 25, 6) == 1.0
    assert fourier_coefficient("K", (3, 3), 25, 6) == 0j
    top, at = fourier_sup("K", 2, 25, 6)
    assert top == 1.0 and at == 0


def test_spectral_kernel_matches_direct(shell_2_25):
    for x in derive_generator(9, 1).random((3, 2)):
        assert abs(kernel_piece_spectral("K", 2, 25, 6, x) - kernel_direct(shell_2_25, x)) <= 1e-9


def test_spectral_pieces_add_up(shell_2_25):
    spec = build_mollifier("sec4", 6, 6)
    x = np.array([0.21, 0.73])
    major = kernel_piece_spectral("KQ", 2, 25, 6, x, spec=spec)
    remainder = kernel_piece_spectral("K-KQ", 2, 25, 6, x, spec=spec)
    assert abs(major + remainder - kernel_direct(shell_2_25, x)) <= 1e-9


def test_arc_quadrature_matches_spectral_piece():
    spec = build_mollifier("sec4", 6, 6)
    quadrature = ArcQuadrature(spec, 2, 25)
    quadrature.calibrate()
    assert quadrature.node_count > 0
    xs = derive_generator(4, 2).random((3, 2))
    values = quadrature.evaluate(xs)
    for x, value in zip(xs, values):
        assert abs(value - kernel_piece_spectral("KQ", 2, 25, 6, x, spec=spec).real) <= 1e-5
    sample = kernel_piece(spec, 2, 25, xs[0], quadrature=quadrature)
    assert sample.piece == "KQ"
    assert abs(sample.value.real - values[0]) <= 1e-12


def test_arc_quadrature_needs_calibration():
    quadrature = ArcQuadrature(build_mollifier("sec4", 6, 6), 2, 25)
    with pytest.raises(RuntimeError):
        quadrature.evaluate([0.1, 0.2])
    with pytest.raises(ValueError):
        ArcQuadrature(build_mollifier("sec4", 6, 6), 2, 36)


def test_decomposition_reconstructs_kernel():
    xs = derive_generator(0, 9).random((2, 2))
    report = decomposition_check(2, 121, xs, major_cut=4)
    assert report.summary["pieces"] == 7
    assert report.passed
    assert len(report.rows) == 2


def test_sup_norm_of_kernel_is_attained_at_origin(shell_2_25):
    estimate = sup_norm_estimate(lambda xs: kernel_direct_many(shell_2_25, xs), 2, samples=1000, seed=1,
                                 bound=12.0)
    assert abs(estimate.value - 12.0) <= 1e-9
    assert abs(estimate.ratio - 1.0) <= 1e-9
    with pytest.raises(ValueError):
        sup_norm_estimate(lambda xs: kernel_direct_many(shell_2_25, xs), 2, samples=999)


def test_levelset_chain_holds(shell_2_25):
    c = make_coefficients(shell_2_25, "random_signs", seed=3)
    report = levelset_chain_check(shell_2_25, c, alpha=0.5, Q=6, samples=4000, seed=3, batches=4)
    assert len(report.rows) == 3
    assert all(row["holds"] for row in report.rows)
    assert report.passed
    measure, _ = report.summary["measure"]
    assert 0.0 < measure < 1.0


def test_levelset_chain_input_checks(shell_2_25):
    with pytest.raises(ValueError):
        levelset_chain_check(shell_2_25, np.ones(12), alpha=0.5, Q=6)
    empty = SphereShell(3, 7, np.zeros((0, 3), dtype=np.int16))
    with pytest.raises(EmptyShell):
        levelset_chain_check(empty, np.ones(0), alpha=0.5, Q=6)


def test_dyadic_piece_mass_on_the_shell():
    # |k|^2 = 121 at k = (0, 11), where the cutoff is 1
    for spec in build_sec7_family(12, major_cut=4).specs:
        coefficient = fourier_coefficient("KQs", (0, 11), 121, 12, spec=spec)
        ratio = abs(coefficient) / bounds.kqs_fourier_envelope(12, spec.Q, spec.s, True)
        assert 0.25 <= ratio <= 4


def test_decomposition_reconstructs_kernel_in_three_dimensions():
    xs = derive_generator(1, 9).random((3, 3))
    report = decomposition_check(3, 121, xs, major_cut=4)
    assert report.summary["pieces"] == 7
    assert report.passed


def test_off_shell_sup_skips_the_shell():
    assert fourier_sup("K", 2, 25, 6, skip_shell=True) == (0.0, None)


def test_fourier_remainder_sweep_ratios():
    report = fourier_remainder_sweep(2, 25, [6, 7])
    for row in report.rows:
        assert row["bound"] == 1.0 / row["Q"]
        assert abs(row["ratio"] - row["max_coefficient"] * row["Q"]) <= 1e-12
        assert row["on_shell"] <= 1e-10
    assert report.summary["max_ratio"] == max(r["ratio"] for r in report.rows)


def test_dyadic_supnorm_sweep():
    report = dyadic_supnorm_sweep(2, 121, major_cut=4, samples=1000, seed=2, starts=2)
    assert len(report.rows) == 1 + 2 * 7
    minor_row, piece_rows = report.rows[0], report.rows[1:]
    assert minor_row["piece"] == "Kminor"
    assert minor_row["sup_bound"] == bounds.kminor_sup_envelope(2, 12)
    family = build_sec7_family(12, major_cut=4)
    origin = kernel_minor(family, 2, 121, np.zeros((1, 2)))[0].value
    assert minor_row["sup"] >= abs(origin) - 1e-9
    for row in piece_rows:
        assert row["sup_bound"] == bounds.kqs_sup_envelope(2, 12, row["Q"], row["s"])
        assert row["sup_ratio"] > 0
        if row["piece"] == "KQs":
            assert 0.25 <= row["on_shell_ratio"] <= 4
        else:
            assert row["on_shell"] <= 1e-12
    assert report.summary["max_ratio"] <= report.summary["cap"]
    assert report.passed


def test_dyadic_supnorm_sweep_needs_pieces():
    with pytest.raises(ValueError):
        dyadic_supnorm_sweep(2, 121)
