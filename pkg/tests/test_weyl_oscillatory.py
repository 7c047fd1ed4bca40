import numpy as np
import pytest

from core import bounds
from core.errors import WindowTooSmall
from core.weyl_oscillatory import (
    BumpFunction, MajorArcPoint, dirichlet_arc, oscillatory_J, poisson_check, poisson_window,
    weyl_arc, weyl_direct, weyl_envelope, weyl_envelope_check, weyl_grid, weyl_levelset_profile,
    weyl_many, weyl_poisson,
)

GAMMA = BumpFunction("gamma")


def test_bump_shapes():
    assert GAMMA(0.0) == 1.0
    assert GAMMA(1.0) == 1.0
    assert 0.0 < GAMMA(1.5) < 1.0
    assert GAMMA(2.5) == 0.0
    assert np.allclose(GAMMA(np.array([-1.7, 1.7])), GAMMA(1.7))
    eta7 = BumpFunction("eta7")
    assert eta7(0.3) == 1.0
    assert eta7(0.1) == 0.0
    assert eta7(1.2) == 0.0
    with pytest.raises(ValueError):
        BumpFunction("box")


def test_bump_mass_and_transform():
    # gamma is even around a plateau of width 2, and its ramp integrates to 1/2 on each side
    assert abs(GAMMA.mass() - 3.0) <= 1e-9
    eta = BumpFunction("eta")
    assert eta.mass() > 0
    assert eta.transform(0.0) == complex(eta.mass(), 0.0)
    assert abs(eta.transform(0.7)) < eta.mass()


def test_weyl_variants_agree():
    N, x = 20, 0.3
    point = MajorArcPoint(2, 7, 1e-4)
    assert abs(weyl_arc(point, x, N, GAMMA) - weyl_direct(point.t, x, N, GAMMA)) <= 1e-9
    ts = np.array([0.0, 0.1, 0.25, 0.77])
    many = weyl_many(ts, x, N, GAMMA)
    for t, value in zip(ts, many):
        assert abs(value - weyl_direct(t, x, N, GAMMA)) <= 1e-9
    M = 64
    grid = weyl_grid(M, x, N, GAMMA)
    for j in (0, 5, 33):
        assert abs(grid[j] - weyl_direct(j / M, x, N, GAMMA)) <= 1e-9


def test_weyl_at_origin_is_cutoff_mass():
    N = 30
    assert abs(weyl_direct(0.0, 0.0, N, GAMMA) - GAMMA(np.arange(-2 * N, 2 * N + 1) / N).sum()) <= 1e-9


def test_oscillatory_integral_at_zero_frequency():
    N = 10
    value = oscillatory_J(0.0, 0.0, 0, 1, N, GAMMA)
    assert abs(value - N * GAMMA.mass()) <= 1e-8


def test_poisson_matches_direct():
    N = 30
    for a, q, phi, x in ((1, 3, 1e-3, 0.2), (0, 1, 0.0, 0.45), (3, 7, -2e-4, 0.9)):
        point = MajorArcPoint(a, q, phi)
        series = weyl_poisson(point, x, N, GAMMA)
        direct = weyl_direct(point.t, x, N, GAMMA)
        assert abs(series - direct) <= 1e-6 * max(abs(direct), 1.0)


def test_poisson_fixed_window_too_small():
    with pytest.raises(WindowTooSmall):
        weyl_poisson(MajorArcPoint(1, 5, 0.0), 0.13, 30, GAMMA, m_window=1, tail_tol=1e-30)
    assert poisson_window(MajorArcPoint(1, 5, 0.0), 0.13, 30) >= 8


def test_dirichlet_arc():
    for t in (0.0, 0.123456, 0.5, 0.999):
        point = dirichlet_arc(t, 50)
        assert 1 <= point.q <= 50
        assert abs(point.phi) <= 1.0 / (50 * point.q) * (1 + 1e-12)
        assert abs((point.t - t + 0.5) % 1.0 - 0.5) <= 1e-12


def test_envelope():
    assert weyl_envelope(MajorArcPoint(0, 1, 0.0), 100) == 100
    assert abs(weyl_envelope(MajorArcPoint(1, 4, 1e-2), 100) - 5.0) <= 1e-12


def test_envelope_check_report():
    report = weyl_envelope_check(16, 20, seed=1)
    assert len(report.rows) == 21
    assert report.rows[0]["t"] == 0.0 and report.rows[0]["x"] == 0.0
    assert report.to_dict() == weyl_envelope_check(16, 20, seed=1).to_dict()
    with pytest.raises(ValueError):
        weyl_envelope_check(8, 5, seed=1)


def test_levelset_profile_is_monotone():
    report = weyl_levelset_profile(16, 0.1, [0, 1, 2, 3, 4])
    measures = [r["measure"] for r in report.rows]
    assert all(b <= a for a, b in zip(measures, measures[1:]))
    assert measures[0] <= 1.0
    assert [r["envelope"] for r in report.rows] == [bounds.weyl_levelset_envelope(16, s) for s in range(5)]


def test_poisson_check_small():
    report = poisson_check(20, 3, seed=2)
    assert len(report.rows) == 3
    assert report.passed
    for row in report.rows:
        assert row["abs_error"] <= 1e-6 * max(abs(row["direct"]), 1.0)
        assert row["scaled_error"] <= row["abs_error"] + 1e-18
        if abs(row["direct"]) > 0:
            assert abs(row["rel_error"] * abs(row["direct"]) - row["abs_error"]) <= 1e-15
    assert report.summary["worst_abs_error"] == max(r["abs_error"] for r in report.rows)
