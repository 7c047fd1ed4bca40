"""
Smooth Weyl sums, their Poisson-summation expansion on major arcs and the
oscillatory integrals that expansion needs.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core import bounds
from core.arith import dirichlet_fraction
from core.errors import QuadratureNotConverged, WindowTooSmall
from core.exp_sums import quad_sum_column
from core.numerics import TWO_PI, compensated_sum, e, integrate_panels, smooth_step
from core.report import ExperimentReport
from core.rng import derive_generator

logger = logging.getLogger(__name__)

BUMP_KINDS = ("gamma", "eta", "eta7")

# Breakpoints of each bump on [0, inf); pieces between them are C-infinity
_BREAKPOINTS = {
    "gamma": (0.0, 1.0, 2.0),
    "eta": (0.0, 1.0),
    "eta7": (0.0, 0.125, 0.25, 0.5, 1.0),
}


class BumpFunction:
    """
    Compactly supported smooth bump.

    gamma is 1 on [-1, 1] and 0 outside [-2, 2]; eta is exp(1 - 1/(1 - y^2))
    on (-1, 1); eta7 is 1 on 1/4 <= |t| <= 1/2 and 0 outside 1/8 <= |t| <= 1.
    """
    def __init__(self, kind):
        if kind not in BUMP_KINDS:
            raise ValueError(f"unknown bump kind: {kind}")
        self.kind = kind
        self.breakpoints = _BREAKPOINTS[kind]
        self.radius = self.breakpoints[-1]
        self._transform_cache = {}

    def __repr__(self):
        return f"BumpFunction({self.kind!r})"

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        if self.kind == "gamma":
            out[y <= 1.0] = 1.0
            mid = (y > 1.0) & (y < 2.0)
            out[mid] = smooth_step(2.0 - y[mid])
        elif self.kind == "eta":
            inside = y < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
        else:
            rise = (y > 0.125) & (y < 0.25)
            out[rise] = smooth_step((y[rise] - 0.125) * 8.0)
            out[(y >= 0.25) & (y <= 0.5)] = 1.0
            fall = (y > 0.5) & (y < 1.0)
            out[fall] = smooth_step((1.0 - y[fall]) * 2.0)
        return out

    def _segments(self):
        positive = self.breakpoints
        edges = sorted(set([-b for b in positive] + list(positive)))
        return list(zip(edges[:-1], edges[1:]))

    def transform(self, z, order=16):
        """
        Fourier transform at z: the integral of bump(u) e(-z u) du.

        Args:
            z (float): Frequency
            order (int): Gauss-Legendre nodes per panel

        Returns:
            complex: The transform value (real, since every bump is even)
        """
        key = float(z)
        if key in self._transform_cache:
            return self._transform_cache[key]
        total = 0.0
        for lo, hi in self._segments():
            panels = 32 + int(math.ceil(8 * (hi - lo) * abs(key)))
            total += integrate_panels(lambda u: self(u) * np.cos(TWO_PI * key * u), lo, hi, panels, order)
        value = complex(total, 0.0)
        if len(self._transform_cache) < 100000:
            self._transform_cache[key] = value
        return value

    def mass(self):
        """Integral of the bump over the line."""
        return self.transform(0.0).real


@dataclass(frozen=True)
class MajorArcPoint:
    """
    A circle point t = a/q + phi with gcd(a, q) = 1.
    """
    a: int
    q: int
    phi: float

    def __post_init__(self):
        if self.q < 1 or math.gcd(self.a, self.q) != 1:
            raise ValueError(f"{self.a}/{self.q} is not reduced")

    @property
    def t(self):
        return self.a / self.q + self.phi


def _frequencies(N, gamma):
    k = np.arange(-2 * N, 2 * N + 1, dtype=np.int64)
    return k, gamma(k / N)


def weyl_direct(t, x, N, gamma):
    """
    Smooth Weyl sum G(t, x) = sum_k gamma(k/N) e(k x + k^2 t).

    Args:
        t (float): Quadratic phase
        x (float): Linear phase
        N (int): Scale >= 1
        gamma (BumpFunction): Cutoff

    Returns:
        complex: The sum over |k| <= 2N
    """
    k, weights = _frequencies(N, gamma)
    kf = k.astype(float)
    phase = np.mod(kf * x, 1.0) + np.mod(kf * kf * t, 1.0)
    return complex(compensated_sum(weights * e(phase)))


def weyl_arc(point, x, N, gamma):
    """
    G(a/q + phi, x) with the rational part of the phase reduced exactly.

    Args:
        point (MajorArcPoint): a, q, phi
        x (float): Linear phase
        N (int): Scale
        gamma (BumpFunction): Cutoff

    Returns:
        complex: The Weyl sum
    """
    k, weights = _frequencies(N, gamma)
    kf = k.astype(float)
    rational = (k * k % point.q) * (point.a % point.q) % point.q / point.q
    phase = rational + np.mod(kf * x, 1.0) + np.mod(kf * kf * point.phi, 1.0)
    return complex(compensated_sum(weights * e(phase)))


def weyl_many(ts, x, N, gamma, chunk=2048):
    """
    G(t, x) for an array of t values.

    Args:
        ts (ndarray): Quadratic phases
        x (float): Linear phase
        N (int): Scale
        gamma (BumpFunction): Cutoff
        chunk (int): Rows per block

    Returns:
        ndarray: Complex values
    """
    k, weights = _frequencies(N, gamma)
    kf = k.astype(float)
    linear = weights * e(np.mod(kf * x, 1.0))
    ts = np.asarray(ts, dtype=float)
    out = np.empty(len(ts), dtype=complex)
    for start in range(0, len(ts), chunk):
        block = ts[start:start + chunk]
        out[start:start + chunk] = e(np.mod(np.outer(block, kf * kf), 1.0)) @ linear
    return out


def weyl_grid(M, x, N, gamma):
    """
    G(j/M, x) for every j in [0, M) with one FFT.

    Args:
        M (int): Grid size
        x (float): Linear phase
        N (int): Scale
        gamma (BumpFunction): Cutoff

    Returns:
        ndarray: Complex array indexed by j
    """
    k, weights = _frequencies(N, gamma)
    w = np.zeros(M, dtype=complex)
    np.add.at(w, k * k % M, weights * e(np.mod(k.astype(float) * x, 1.0)))
    return M * np.fft.ifft(w)


def oscillatory_J(x, phi, m, q, N, gamma, tol=1e-9, max_doublings=6):
    """
    J(x, phi, m, q) = integral of gamma(y/N) e((x + m/q) y + phi y^2) dy.

    Composite Gauss-Legendre with about one oscillation per panel, doubled
    until two successive values agree within tol.

    Args:
        x (float): Linear phase
        phi (float): Quadratic offset
        m (int): Poisson frequency
        q (int): Modulus
        N (int): Scale
        gamma (BumpFunction): Cutoff
        tol (float): Absolute tolerance
        max_doublings (int): Refinement limit

    Returns:
        complex: The integral

    Raises:
        QuadratureNotConverged: If refinement stalls
    """
    A = x + m / q
    scale = N * gamma.radius
    oscillations = 2 * scale * (abs(A) + 2 * abs(phi) * scale)
    panels = int(math.ceil(oscillations)) + 16
    edges = sorted(set(b * N for b in gamma.breakpoints) | set(-b * N for b in gamma.breakpoints))

    def integrand(y):
        return gamma(y / N) * e(np.mod(A * y + phi * y * y, 1.0))

    def evaluate(count):
        total = 0j
        for lo, hi in zip(edges[:-1], edges[1:]):
            share = max(2, int(math.ceil(count * (hi - lo) / (2 * scale))))
            total += integrate_panels(integrand, lo, hi, share)
        return complex(total)

    previous = evaluate(panels)
    for _ in range(max_doublings):
        panels *= 2
        current = evaluate(panels)
        if abs(current - previous) <= tol:
            return current
        previous = current
    raise QuadratureNotConverged(
        f"J(x={x}, phi={phi}, m={m}, q={q}) did not reach tol={tol}",
        estimate=previous, error=abs(current - previous),
    )


def poisson_window(point, x, N):
    """
    Default half-width W of the Poisson window around m = -x q.

    Args:
        point (MajorArcPoint): The arc point
        x (float): Linear phase
        N (int): Scale

    Returns:
        int: Window half-width
    """
    q, phi = point.q, point.phi
    return max(
        8,
        int(math.ceil(q / N) * N ** 0.1 * 8),
        int(math.ceil(q * (4 * abs(phi) * N + 40.0 / N))) + 8,
    )


def weyl_poisson(point, x, N, gamma, m_window=None, tail_tol=1e-9, max_extensions=12):
    """
    G(a/q + phi, x) as the truncated Poisson series sum_m S(a, m, q) J(x, phi, m, q).

    Args:
        point (MajorArcPoint): a, q, phi
        x (float): Linear phase
        N (int): Scale
        gamma (BumpFunction): Cutoff
        m_window (int): Fixed half-width; None grows the window automatically
        tail_tol (float): Bound on each of the outermost terms
        max_extensions (int): Window doublings allowed in automatic mode

    Returns:
        complex: The series value

    Raises:
        WindowTooSmall: If the outermost terms exceed tail_tol
    """
    q = point.q
    column = quad_sum_column(point.a, q)
    centre = int(round(-x * q))
    cache = {}

    def term(m):
        if m not in cache:
            cache[m] = column[m % q] * oscillatory_J(x, point.phi, m, q, N, gamma)
        return cache[m]

    fixed = m_window is not None
    width = int(m_window) if fixed else poisson_window(point, x, N)
    for _ in range(max_extensions + 1):
        edge = max(abs(term(centre - width)), abs(term(centre + width)))
        if edge <= tail_tol:
            terms = [term(m) for m in range(centre - width, centre + width + 1)]
            return complex(compensated_sum(np.array(terms)))
        if fixed:
            break
        width *= 2
    raise WindowTooSmall(
        f"Poisson window {width} around m={centre} leaves edge terms of size {edge:.3g} > {tail_tol}"
    )


def dirichlet_arc(t, N):
    """
    Locates the Dirichlet arc of t: q <= N and |t - a/q| <= 1/(N q).

    Args:
        t (float): Circle point
        N (int): Scale

    Returns:
        MajorArcPoint: a reduced mod q and phi = t - a/q computed exactly
    """
    a, q = dirichlet_fraction(t, N)
    phi = float(Fraction(t) % 1 - Fraction(a, q))
    if q > N or abs(phi) > 1.0 / (N * q) * (1 + 1e-12):
        raise RuntimeError(f"Dirichlet locator failed for t={t}, N={N}: {a}/{q}, phi={phi}")
    return MajorArcPoint(a % q, q, phi)


def weyl_envelope(point, N):
    """(1/sqrt q) min(N, |phi|^(-1/2)), the major-arc envelope without N^eps."""
    cap = N if point.phi == 0 else min(N, abs(point.phi) ** -0.5)
    return cap / math.sqrt(point.q)


def weyl_envelope_check(N, samples, seed, gamma=None):
    """
    Compares |G(t, x)| with its major-arc envelope at random (t, x).

    The origin (t, x) = (0, 0) is always the first sample.

    Args:
        N (int): Scale >= 16
        samples (int): Number of random points
        seed (int): Experiment seed
        gamma (BumpFunction): Cutoff (gamma bump by default)

    Returns:
        ExperimentReport: Rows (t, x, q, a, phi, abs_G, envelope, ratio) and ratio quantiles
    """
    if N < 16:
        raise ValueError("weyl_envelope_check needs N >= 16")
    gamma = gamma or BumpFunction("gamma")
    rows = []
    for index in range(samples + 1):
        if index == 0:
            t, x = 0.0, 0.0
        else:
            t, x = derive_generator(seed, index).random(2)
        point = dirichlet_arc(t, N)
        value = abs(weyl_direct(t, x, N, gamma))
        envelope = weyl_envelope(point, N)
        rows.append({
            "t": float(t), "x": float(x), "q": point.q, "a": point.a, "phi": point.phi,
            "abs_G": value, "envelope": envelope, "ratio": value / envelope,
        })
    ratios = np.array([r["ratio"] for r in rows])
    summary = {
        "max_ratio": float(ratios.max()),
        "quantiles": {str(p): float(np.quantile(ratios, p)) for p in (0.5, 0.9, 0.99)},
        "max_ratio_over_N_0.2": float(ratios.max() / N ** 0.2),
    }
    summary["passed"] = summary["max_ratio_over_N_0.2"] <= 20.0
    logger.info("Weyl envelope N=%d: max ratio %.3f", N, summary["max_ratio"])
    return ExperimentReport(
        "weyl_envelope",
        {"N": N, "samples": samples, "seed": seed, "bump": gamma.kind},
        rows,
        summary,
    )


def weyl_levelset_profile(N, x, levels, M=None, gamma=None):
    """
    Measure of {t : |G(t, x)| >= 2^s} on a uniform grid against N^2 2^(-4s).

    Args:
        N (int): Scale
        x (float): Linear phase
        levels (sequence): Exponents s
        M (int): Grid size (default 16 N^2)
        gamma (BumpFunction): Cutoff

    Returns:
        ExperimentReport: One row per level
    """
    gamma = gamma or BumpFunction("gamma")
    M = M or 16 * N * N
    magnitudes = np.abs(weyl_grid(M, x, N, gamma))
    rows = []
    for s in levels:
        measure = float(np.count_nonzero(magnitudes >= 2.0 ** s)) / M
        envelope = bounds.weyl_levelset_envelope(N, s)
        rows.append({"s": s, "measure": measure, "envelope": envelope, "ratio": measure / envelope})
    summary = {"max_ratio": max((r["ratio"] for r in rows), default=0.0)}
    return ExperimentReport("weyl_levelsets", {"N": N, "x": x, "M": M}, rows, summary)


def poisson_check(N, cases, seed, gamma=None, tol=1e-6):
    """
    Compares the Poisson expansion with direct summation at random (t, x).

    Each t is placed on its Dirichlet arc with q <= N. Every row carries the
    absolute error, the error relative to |G| and the error scaled by
    max(|G|, 1). The verdict uses the scaled error, which is relative for
    |G| >= 1 and absolute below.

    Args:
        N (int): Scale
        cases (int): Number of random cases
        seed (int): Experiment seed
        gamma (BumpFunction): Cutoff
        tol (float): Acceptance threshold on the relative error

    Returns:
        ExperimentReport: One row per case and the worst error
    """
    gamma = gamma or BumpFunction("gamma")
    rows = []
    for index in range(cases):
        t, x = derive_generator(seed, 3, index).random(2)
        point = dirichlet_arc(t, N)
        direct = weyl_direct(t, x, N, gamma)
        series = weyl_poisson(point, x, N, gamma)
        error = abs(series - direct)
        rows.append({"t": float(t), "x": float(x), "a": point.a, "q": point.q, "phi": point.phi,
                     "direct": direct, "poisson": series, "abs_error": error,
                     "rel_error": error / abs(direct) if direct else None,
                     "scaled_error": error / max(abs(direct), 1.0)})
    worst = max((r["scaled_error"] for r in rows), default=0.0)
    logger.info("Poisson check N=%d: %d cases, worst error %.3g", N, cases, worst)
    summary = {"worst_scaled_error": worst,
               "worst_abs_error": max((r["abs_error"] for r in rows), default=0.0),
               "passed": worst <= tol}
    return ExperimentReport("poisson_check", {"N": N, "cases": cases, "seed": seed, "bump": gamma.kind},
                            rows, summary)
