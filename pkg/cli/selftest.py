"""
Reduced-scale invariant suite: every cross-method oracle pair on small inputs.
"""
import logging
import math

import numpy as np

from core import exp_sums
from core.arith import primes_in
from core.kernel_decomposition import (
    build_mollifier, build_sec7_family, decomposition_check, exactness_threshold, kernel_direct,
    kernel_direct_many, kernel_integral, mollifier_transform_direct,
)
from core.report import ExperimentReport
from core.restriction_experiments import (
    additive_quadruples, extension_eval_batch, lp_norm_grid, make_coefficients,
)
from core.rng import derive_generator
from core.sphere_lattice import enumerate_shell, shell_count, three_square_obstructed
from core.weyl_oscillatory import BumpFunction, poisson_check

logger = logging.getLogger(__name__)


def _gauss_modulus():
    worst = max(abs(abs(exp_sums.gauss_sum(q)) - q ** -0.5) for q in range(1, 100, 2))
    return worst <= 1e-10, f"max ||G(q)| - q^-1/2| = {worst:.3g} for odd q < 100"


def _salie_closed_form():
    _, worst = exp_sums.salie_closed_form_sweep(31)
    return worst <= 1e-8, f"max |direct - explicit| = {worst:.3g} for primes q <= 31"


def _weil_bounds():
    excess = 0.0
    for kind in ("kloosterman", "salie"):
        rows, _ = exp_sums.bound_sweep(kind, 31)
        excess = max(excess, max(math.hypot(r[3], r[4]) - r[5] for r in rows))
    return excess <= 1e-6, f"max |sum| - 2 sqrt q = {excess:.3g}"


def _singular_series(seed):
    report = exp_sums.sigma_prime_sweep([4, 5], 23, 3, seed)
    worst_closed = 0.0
    for s in (3, 5, 7, 9, 15):
        params = exp_sums.SingularParams((1, 2, 3, 4), 11, s)
        direct = exp_sums.singular_sigma(params).value
        closed = exp_sums.singular_sigma(params, exp_sums.CLOSED_FORM).value
        worst_closed = max(worst_closed, abs(direct - closed))
    twisted = max(exp_sums.sigma_multiplicativity(m_vec, lam, 3, 5)["twisted_rel_error"]
                  for m_vec, lam in (((1, 2, 3), 7), ((1, 2, 3, 4), 11)))
    ok = report.passed and worst_closed <= 1e-9 and twisted <= 1e-9
    return ok, (f"prime bound worst ratio {report.summary['worst_ratio']:.3f}, "
                f"closed form diff {worst_closed:.3g}, twisted product error {twisted:.3g}")


def _shells():
    obstructed_ok = all((shell_count(3, lam) == 0) == three_square_obstructed(lam) for lam in range(1, 201))
    count = len(enumerate_shell(4, 4))
    return obstructed_ok and count == 24, f"three-square rule to 200: {obstructed_ok}, |F_4,4| = {count}"


def _poisson(seed):
    report = poisson_check(30, 5, seed)
    return report.passed, f"worst scaled error {report.summary['worst_scaled_error']:.3g}"


def _kernel_integral(seed):
    n, lam = 2, 25
    N = math.isqrt(lam) + 1
    shell = enumerate_shell(n, lam)
    gamma = BumpFunction("gamma")
    M = exactness_threshold(n, lam, N)
    worst = 0.0
    for x in derive_generator(seed, 7).random((3, n)):
        worst = max(worst, abs(kernel_integral(n, lam, N, gamma, x, M) - kernel_direct(shell, x)) / len(shell))
    return worst <= 1e-6, f"worst relative error {worst:.3g}"


def _mollifier_transform(seed):
    N, Q = 12, 13
    spec = build_mollifier("sec4", Q, N)
    ls = derive_generator(seed, 8).integers(-4 * N * N, 4 * N * N, size=10)
    direct = mollifier_transform_direct(spec, ls)
    worst = max(abs(d - spec.transform(l)) / max(abs(spec.transform(l)), 1.0 / Q)
                for l, d in zip(ls.tolist(), direct))
    mass = abs(spec.mass() - 1.0)
    return worst <= 1e-6 and mass <= 1e-10, f"closed vs grid {worst:.3g}, |mass - 1| = {mass:.3g}"


def _decomposition(seed):
    xs = derive_generator(seed, 9).random((3, 2))
    report = decomposition_check(2, 121, xs, major_cut=4)
    family = build_sec7_family(12, major_cut=4)
    ts = derive_generator(seed, 10).random(1000)
    partition = float(np.max(np.abs(family.rho(ts) + family.eta_sum(ts) - 1.0)))
    ok = report.passed and partition <= 1e-10
    return ok, f"{report.summary['pieces']} pieces, worst error {report.summary['worst_rel_error']:.3g}"


def _extensions(seed):
    shell = enumerate_shell(2, 25)
    constant = make_coefficients(shell, "constant")
    xs = derive_generator(seed, 11).random((100, 2))
    kernel_gap = float(np.max(np.abs(extension_eval_batch(constant, xs) - kernel_direct_many(shell, xs))))
    quadruples = additive_quadruples(shell)
    l4 = lp_norm_grid(constant, 4) ** 4
    parseval = max(abs(lp_norm_grid(make_coefficients(shell, "random_gaussian", seed, d), 2) - 1.0)
                   for d in range(3))
    ok = kernel_gap <= 1e-9 and abs(l4 - quadruples) <= 1e-6 * quadruples and parseval <= 1e-10
    return ok, f"F = K gap {kernel_gap:.3g}, ||K||_4^4 = {l4:.6f} vs {quadruples} quadruples, Parseval {parseval:.3g}"


def run_selftest(seed=0, workers=1, progress=None):
    """
    Runs every reduced-scale oracle check.

    Args:
        seed (int): Seed for the randomized checks
        workers (int): Threads (reserved for shell enumeration)
        progress (ProgressBar): Optional progress display

    Returns:
        ExperimentReport: One row per check and an overall verdict
    """
    checks = [
        ("gauss_modulus", _gauss_modulus),
        ("salie_closed_form", _salie_closed_form),
        ("weil_bounds", _weil_bounds),
        ("singular_series", lambda: _singular_series(seed)),
        ("shells", _shells),
        ("poisson", lambda: _poisson(seed)),
        ("kernel_integral", lambda: _kernel_integral(seed)),
        ("mollifier_transform", lambda: _mollifier_transform(seed)),
        ("decomposition", lambda: _decomposition(seed)),
        ("extensions", lambda: _extensions(seed)),
    ]
    rows = []
    for index, (name, check) in enumerate(checks):
        passed, detail = check()
        rows.append({"check": name, "passed": bool(passed), "detail": detail})
        logger.info("%s: %s (%s)", name, "ok" if passed else "FAILED", detail)
        if progress is not None:
            progress.set_progress(int((index + 1) * 100 / len(checks)), name)
    summary = {"checks": len(rows), "failed": [r["check"] for r in rows if not r["passed"]]}
    summary["passed"] = not summary["failed"]
    return ExperimentReport("selftest", {"seed": seed, "primes_checked": len(primes_in(2, 31))}, rows, summary)
