"""
The kernel K of a lattice shell, its integral representation over Weyl sums,
the Farey mollifiers and the major/minor-arc pieces they cut out.

Fourier transforms use F(h)(l) = integral of h(t) e(-l t) dt, so that
F(K^Q)(k) = prod_i gamma(k_i/N) F(eta_Q)(|k|^2 - lambda).
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from core import bounds
from core.arith import farey_set, min_circle_gap, primes_in, ramanujan_sum
from core.errors import EmptyModuli, EmptyShell, InsufficientNodes, QuadratureNotConverged
from core.numerics import TWO_PI, compensated_sum, e, e_rational
from core.report import ExperimentReport
from core.rng import derive_generator
from core.weyl_oscillatory import BumpFunction, weyl_grid

logger = logging.getLogger(__name__)

VARIANTS = ("sec4", "sec4_all", "sec7")
PIECES = ("K", "KQ", "K-KQ", "KQs", "Kminor", "K1")

# Complex entries of the cached arc phase matrix
PHASE_CACHE_LIMIT = 2 * 10**7
# Complex entries per GEMM block
BLOCK_ENTRIES = 4 * 10**6


@dataclass(frozen=True)
class KernelSample:
    """
    One kernel piece evaluated at a torus point.
    """
    piece: str
    x: tuple
    value: complex
    quadrature_nodes: int = 0
    est_error: float = 0.0


def shell_phases(points, xs):
    """
    Matrix of characters e(xi . x).

    Args:
        points (ndarray): (count, n) integer shell points
        xs (ndarray): (M, n) torus points

    Returns:
        ndarray: (M, count) complex matrix
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return e(np.mod(xs @ points.T.astype(float), 1.0))


def kernel_direct(shell, x):
    """
    K(x) = sum over the shell of e(xi . x).

    Args:
        shell (SphereShell): Lattice shell
        x (sequence): Torus point

    Returns:
        complex: The kernel value (0 for an empty shell)
    """
    if shell.is_empty:
        return 0j
    return complex(compensated_sum(shell_phases(shell.points, x)[0]))


def kernel_direct_many(shell, xs, rows_per_block=None):
    """
    K at many points, evaluated block by block.

    Args:
        shell (SphereShell): Lattice shell
        xs (ndarray): (M, n) torus points
        rows_per_block (int): Points per block

    Returns:
        ndarray: Complex values
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if shell.is_empty:
        return np.zeros(len(xs), dtype=complex)
    rows = rows_per_block or max(1, BLOCK_ENTRIES // len(shell))
    out = np.empty(len(xs), dtype=complex)
    for start in range(0, len(xs), rows):
        out[start:start + rows] = shell_phases(shell.points, xs[start:start + rows]).sum(axis=1)
    return out


def exactness_threshold(n, lam, N):
    """Smallest uniform grid size accepted by kernel_integral."""
    return 4 * n * (2 * N) ** 2 + lam + 1


def kernel_integral(n, lam, N, gamma, x, M):
    """
    K(x) as the integral over t of prod_j G(t, x_j) e(-lambda t), on a uniform grid.

    The integrand is a trigonometric polynomial in t, so the grid average is
    exact once M exceeds its degree.

    Args:
        n (int): Dimension
        lam (int): Radius squared
        N (int): Weyl-sum scale, with lambda < N^2
        gamma (BumpFunction): Cutoff
        x (sequence): Torus point of length n
        M (int): Grid size

    Returns:
        complex: The kernel value

    Raises:
        InsufficientNodes: If M is below the exactness threshold
    """
    threshold = exactness_threshold(n, lam, N)
    if M < threshold:
        raise InsufficientNodes(f"M={M} is below the exactness threshold {threshold}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != n:
        raise ValueError(f"expected a point of dimension {n}, got {len(x)}")
    integrand = e_rational(-lam * np.arange(M, dtype=np.int64), M)
    for coordinate in x:
        integrand = integrand * weyl_grid(M, coordinate, N, gamma)
    return complex(compensated_sum(integrand) / M)


@dataclass
class MollifierSpec:
    """
    A Farey mollifier: c * sum over a/q of bump((t - a/q) * scale).

    Attributes:
        variant (str): "sec4" (prime moduli in [Q, 2Q]), "sec4_all" (all moduli
            in [Q, 2Q]) or "sec7" (all moduli in [Q, 2Q), dyadic scale N 2^s)
        Q (int): Modulus scale
        s (int): Dyadic index (sec7 only)
        N (int): Weyl-sum scale
        moduli (tuple): Denominators
        fractions (tuple): FareyFraction centres sorted by value
        scale (int): Spacing scale, 10 Q^2 or N 2^s
        c (float): Normalization constant
        bump (BumpFunction): Profile
    """
    variant: str
    Q: int
    s: int
    N: int
    moduli: tuple
    fractions: tuple
    scale: int
    c: float
    bump: BumpFunction

    def __post_init__(self):
        self._centres = np.array([float(f) for f in self.fractions])
        self._transform_cache = {}

    @property
    def support_radius(self):
        return self.bump.radius / self.scale

    def evaluate(self, t):
        """
        Mollifier values on the circle.

        Args:
            t (float or ndarray): Points (reduced mod 1)

        Returns:
            ndarray: Values
        """
        t = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), 1.0)
        centres = self._centres
        m = len(centres)
        idx = np.searchsorted(centres, t)
        left = centres[(idx - 1) % m]
        d_left = np.mod(t - left + 0.5, 1.0) - 0.5
        out = self.bump(d_left * self.scale)
        if m > 1:
            right = centres[idx % m]
            d_right = np.mod(t - right + 0.5, 1.0) - 0.5
            out = out + self.bump(d_right * self.scale)
        return self.c * out

    def transform(self, l):
        """
        Closed-form Fourier coefficient at the integer l.

        c/scale * bump^(l/scale) * sum over moduli of the Ramanujan sum c_q(l).
        """
        l = int(l)
        if l not in self._transform_cache:
            ramanujan = sum(ramanujan_sum(l, q) for q in self.moduli)
            value = self.c / self.scale * self.bump.transform(l / self.scale).real * ramanujan
            self._transform_cache[l] = complex(value)
        return self._transform_cache[l]

    def mass(self):
        """Integral of the mollifier over the circle."""
        return self.transform(0).real


def _check_disjoint(fractions, radius, scale):
    gap = min_circle_gap(fractions)
    if len(fractions) > 1 and not 2 * Fraction(radius) / scale < gap:
        raise ValueError(
            f"bump supports of half-width {radius}/{scale} overlap (minimal gap {gap})"
        )


def build_mollifier(variant, Q, N, s=None, eta=None, major_cut=100):
    """
    Builds a Farey mollifier.

    Args:
        variant (str): "sec4", "sec4_all" or "sec7"
        Q (int): Modulus scale; N <= Q <= N^2 for sec4, Q < N/major_cut for sec7
        N (int): Weyl-sum scale
        s (int): Dyadic index with Q <= 2^s <= N (sec7 only)
        eta (BumpFunction): Profile (eta for sec4, eta7 for sec7 by default)
        major_cut (int): Divisor in the sec7 condition Q < N/major_cut

    Returns:
        MollifierSpec: The mollifier with its normalization

    Raises:
        EmptyModuli: If no admissible modulus exists
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown mollifier variant: {variant}")
    if variant in ("sec4", "sec4_all"):
        if not N <= Q <= N * N:
            raise ValueError(f"the major-arc mollifier needs N <= Q <= N^2, got N={N}, Q={Q}")
        moduli = primes_in(Q, 2 * Q) if variant == "sec4" else list(range(Q, 2 * Q + 1))
        scale = 10 * Q * Q
        bump = eta or BumpFunction("eta")
        s = None
    else:
        if s is None:
            raise ValueError("the dyadic mollifier needs s")
        if not (Q < N / major_cut and Q <= 2 ** s <= N):
            raise ValueError(f"need Q < N/{major_cut} and Q <= 2^s <= N, got N={N}, Q={Q}, s={s}")
        moduli = list(range(Q, 2 * Q))
        scale = N * 2 ** s
        bump = eta or BumpFunction("eta7")
    if not moduli:
        raise EmptyModuli(f"no moduli for Q={Q}")
    fractions = tuple(farey_set(moduli))
    _check_disjoint(fractions, bump.radius, scale)
    if variant == "sec7":
        c = 1.0
    else:
        # integral of the mollifier is exactly 1
        c = scale / (len(fractions) * bump.mass())
    spec = MollifierSpec(variant, Q, s, N, tuple(moduli), fractions, scale, c, bump)
    logger.debug("Built %s mollifier Q=%d s=%s: %d fractions", variant, Q, s, len(fractions))
    return spec


def mollifier_transform(spec, l):
    """Closed-form F(eta)(l); see MollifierSpec.transform."""
    return spec.transform(l)


def mollifier_transform_direct(spec, ls, tol=1e-10, max_doublings=6):
    """
    F(eta)(l) from samples of the mollifier on a uniform circle grid.

    The grid is refined until two successive sizes agree within tol.

    Args:
        spec (MollifierSpec): Mollifier
        ls (sequence): Integer frequencies
        tol (float): Absolute tolerance
        max_doublings (int): Refinement limit

    Returns:
        ndarray: Complex coefficients
    """
    ls = np.atleast_1d(np.asarray(ls, dtype=np.int64))
    need = max(64 * spec.scale, 4 * int(np.abs(ls).max(initial=0)) + 1)
    M = 1 << int(math.ceil(math.log2(need)))

    def on_grid(size):
        values = spec.evaluate(np.arange(size) / size)
        return (np.fft.fft(values) / size)[np.mod(ls, size)]

    previous = on_grid(M)
    for _ in range(max_doublings):
        M *= 2
        current = on_grid(M)
        if np.max(np.abs(current - previous)) <= tol:
            return current
        previous = current
    raise QuadratureNotConverged("mollifier transform grid did not converge", estimate=previous)


class Sec7Family:
    """
    All dyadic mollifiers eta_{Q,s} with Q < N/major_cut, Q dyadic and Q <= 2^s <= N,
    together with rho = 1 - sum eta_{Q,s}.
    """
    def __init__(self, N, eta=None, major_cut=100):
        self.N = N
        self.major_cut = major_cut
        self.eta = eta or BumpFunction("eta7")
        self.specs = []
        Q = 1
        while Q < N / major_cut:
            for s in range(N.bit_length()):
                if Q <= 2 ** s <= N:
                    self.specs.append(build_mollifier("sec7", Q, N, s=s, eta=self.eta, major_cut=major_cut))
            Q *= 2
        self._rho_cache = {}
        self._rho_grids = {}

    def __len__(self):
        return len(self.specs)

    def eta_sum(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        total = np.zeros_like(t)
        for spec in self.specs:
            total += spec.evaluate(t)
        return total

    def rho(self, t):
        """rho(t) = 1 - sum of all eta_{Q,s}(t)."""
        return 1.0 - self.eta_sum(t)

    def rho_grid(self, size):
        """rho at j/size for j in [0, size), cached per size."""
        if size not in self._rho_grids:
            self._rho_grids[size] = self.rho(np.arange(size) / size)
        return self._rho_grids[size]

    def rho_transform(self, l):
        """F(rho)(l) = [l = 0] - sum of F(eta_{Q,s})(l)."""
        l = int(l)
        if l not in self._rho_cache:
            self._rho_cache[l] = (1.0 if l == 0 else 0.0) - sum(spec.transform(l) for spec in self.specs)
        return self._rho_cache[l]

    def alpha(self, spec):
        """alpha_{Q,s} = F(K^{Q,s})(0) / F(rho)(0), taken at frequency offset zero."""
        return spec.transform(0).real / self.rho_transform(0).real

    def max_scale(self):
        return max((spec.scale for spec in self.specs), default=self.N)


def build_sec7_family(N, eta=None, major_cut=100):
    """
    Builds every dyadic mollifier for scale N.

    Args:
        N (int): Weyl-sum scale
        eta (BumpFunction): Profile (eta7 by default)
        major_cut (int): Pieces need Q < N/major_cut

    Returns:
        Sec7Family: The family (possibly empty for small N)
    """
    return Sec7Family(N, eta=eta, major_cut=major_cut)


class ArcQuadrature:
    """
    Arc-by-arc quadrature of t -> prod_j G(t, x_j) e(-lambda t) eta(t).

    Only arcs with a/q <= 1/2 are integrated: the integrand at -t is the
    conjugate of the integrand at t, so the full integral is the real part of
    twice the half-circle sum (arcs at 0 and 1/2 counted once).
    """
    def __init__(self, spec, n, lam, gamma=None):
        """
        Args:
            spec (MollifierSpec): Mollifier
            n (int): Dimension
            lam (int): Radius squared, below N^2
            gamma (BumpFunction): Weyl-sum cutoff
        """
        if lam >= spec.N ** 2:
            raise ValueError(f"lambda={lam} must be below N^2={spec.N ** 2}")
        self.spec = spec
        self.n = n
        self.lam = lam
        self.N = spec.N
        self.gamma = gamma or BumpFunction("gamma")
        self._k = np.arange(2 * self.N + 1, dtype=np.int64)
        self._k2 = self._k * self._k
        self._kweights = np.where(self._k == 0, 1.0, 2.0) * self.gamma(self._k / self.N)
        arcs = [f for f in spec.fractions if 2 * f.a <= f.q]
        self._arc_a = np.array([f.a for f in arcs], dtype=np.int64)
        self._arc_q = np.array([f.q for f in arcs], dtype=np.int64)
        self._arc_w = np.array([1.0 if f.q <= 2 else 2.0 for f in arcs])
        self.nodes_per_arc = None
        self.est_error = None
        self._rule_cache = None
        self._phase_cache = None

    @property
    def node_count(self):
        if self._rule_cache is None:
            return 0
        return len(self._rule_cache[1][0])

    def _rule(self, m):
        if self._rule_cache is not None and self._rule_cache[0] == m:
            return self._rule_cache[1]
        spec = self.spec
        r = spec.support_radius
        h = 2.0 * r / m
        u = -r + h * np.arange(1, m)
        profile = spec.c * spec.bump(u * spec.scale) * h
        keep = profile != 0.0
        u, profile = u[keep], profile[keep]
        arcs = len(self._arc_a)
        a = np.repeat(self._arc_a, len(u))
        q = np.repeat(self._arc_q, len(u))
        uu = np.tile(u, arcs)
        weights = (np.repeat(self._arc_w, len(u)) * np.tile(profile, arcs)
                   * e_rational(-self.lam * a, q) * e(np.mod(-self.lam * uu, 1.0)))
        rule = (a, q, uu, weights)
        self._rule_cache = (m, rule)
        self._phase_cache = None
        return rule

    def _phases(self, a, q, u):
        rational = (self._k2[None, :] * a[:, None] % q[:, None]) / q[:, None]
        return self._kweights * e(rational + np.mod(self._k2[None, :] * u[:, None], 1.0))

    def evaluate(self, xs, m=None):
        """
        The piece at many torus points.

        Args:
            xs (ndarray): (M, n) points, or one point
            m (int): Trapezoid intervals per arc (calibrated value by default)

        Returns:
            ndarray: Real values
        """
        m = m or self.nodes_per_arc
        if m is None:
            raise RuntimeError("ArcQuadrature.evaluate called before calibrate()")
        a, q, u, weights = self._rule(m)
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        count = len(xs)
        cosines = np.cos(TWO_PI * np.outer(self._k, xs.ravel()))
        cache_ok = len(a) * len(self._k) <= PHASE_CACHE_LIMIT
        if cache_ok and self._phase_cache is None:
            self._phase_cache = self._phases(a, q, u)
        block = max(1, BLOCK_ENTRIES // max(1, xs.size))
        total = np.zeros(count, dtype=complex)
        for start in range(0, len(a), block):
            stop = start + block
            if cache_ok:
                phases = self._phase_cache[start:stop]
            else:
                phases = self._phases(a[start:stop], q[start:stop], u[start:stop])
            values = (phases @ cosines).reshape(-1, count, self.n).prod(axis=2)
            total += weights[start:stop] @ values
        return total.real

    def calibrate(self, tol=None, max_doublings=6):
        """
        Doubles the nodes per arc until two successive rules agree within tol.

        Args:
            tol (float): Absolute tolerance (1e-8 N^n by default)
            max_doublings (int): Refinement limit

        Returns:
            int: The accepted nodes per arc
        """
        tol = tol if tol is not None else 1e-8 * self.N ** self.n
        width = 2 * self.spec.support_radius
        oscillations = (self.n * (2 * self.N) ** 2 + self.lam) * width
        m = max(32, 2 * int(math.ceil(4 * oscillations)))
        probes = np.vstack([np.zeros(self.n), derive_generator(0, self.n, self.lam).random(self.n)])
        previous = self.evaluate(probes, m)
        for _ in range(max_doublings):
            m *= 2
            current = self.evaluate(probes, m)
            error = float(np.max(np.abs(current - previous)))
            if error <= tol:
                self.nodes_per_arc = m
                self.est_error = error
                return m
            previous = current
        raise QuadratureNotConverged(
            f"arc quadrature for {self.spec.variant} Q={self.spec.Q} did not reach tol={tol}",
            estimate=previous, error=error,
        )


def kernel_piece(spec, n, lam, x, gamma=None, tol=None, quadrature=None):
    """
    K^Q(x) or K^{Q,s}(x), integrated arc by arc.

    Args:
        spec (MollifierSpec): Mollifier
        n (int): Dimension
        lam (int): Radius squared
        x (sequence): Torus point
        gamma (BumpFunction): Weyl-sum cutoff
        tol (float): Calibration tolerance
        quadrature (ArcQuadrature): Reusable calibrated quadrature

    Returns:
        KernelSample: The value with node count and error estimate
    """
    quadrature = quadrature or ArcQuadrature(spec, n, lam, gamma)
    if quadrature.nodes_per_arc is None:
        quadrature.calibrate(tol)
    value = quadrature.evaluate(np.asarray(x, dtype=float)[None, :])[0]
    piece = "KQs" if spec.variant == "sec7" else "KQ"
    return KernelSample(piece, tuple(float(v) for v in x), complex(value),
                        quadrature.node_count, quadrature.est_error)


def piece_transform(piece, spec=None, family=None):
    """
    Fourier coefficient of a piece as a function of l = |k|^2 - lambda,
    before the prod_i gamma(k_i/N) factor.

    Args:
        piece (str): One of PIECES
        spec (MollifierSpec): Mollifier for KQ, K-KQ, KQs and K1
        family (Sec7Family): Family for Kminor and K1

    Returns:
        callable: l -> complex coefficient
    """
    if piece not in PIECES:
        raise ValueError(f"unknown piece: {piece}")
    if piece == "K":
        return lambda l: 1.0 + 0j if l == 0 else 0j
    if piece in ("KQ", "KQs"):
        return spec.transform
    if piece == "K-KQ":
        return lambda l: (1.0 if l == 0 else 0.0) - spec.transform(l)
    if piece == "Kminor":
        return family.rho_transform
    alpha = family.alpha(spec)
    return lambda l: spec.transform(l) - alpha * family.rho_transform(l)


def fourier_coefficient(piece, k, lam, N, spec=None, family=None, gamma=None):
    """
    F(piece)(k) = prod_i gamma(k_i/N) * h(|k|^2 - lambda) in closed form.

    Args:
        piece (str): One of PIECES
        k (sequence): Integer frequency vector
        lam (int): Radius squared
        N (int): Weyl-sum scale
        spec (MollifierSpec): Mollifier where needed
        family (Sec7Family): Family where needed
        gamma (BumpFunction): Cutoff

    Returns:
        complex: The coefficient
    """
    gamma = gamma or BumpFunction("gamma")
    k = np.asarray(k, dtype=np.int64)
    weight = float(np.prod(gamma(k / N)))
    if weight == 0.0:
        return 0j
    l = int(k @ k) - lam
    return complex(weight * piece_transform(piece, spec, family)(l))


def _max_gamma_product(n, N, gamma):
    """best[mu] = max of prod_i gamma(k_i/N) over |k_i| <= 2N with |k|^2 = mu."""
    top = n * (2 * N) ** 2
    k = np.arange(2 * N + 1)
    weights = gamma(k / N)
    best = np.full(top + 1, -1.0)
    best[0] = 1.0
    for _ in range(n):
        nxt = np.full(top + 1, -1.0)
        for kk, w in zip(k, weights):
            if w <= 0:
                continue
            shift = kk * kk
            candidate = best[:top + 1 - shift] * w
            nxt[shift:] = np.maximum(nxt[shift:], np.where(best[:top + 1 - shift] >= 0, candidate, -1.0))
        best = nxt
    return best


def fourier_sup(piece, n, lam, N, spec=None, family=None, gamma=None, skip_shell=False):
    """
    Max over |k_i| <= 2N of |F(piece)(k)|, optionally only off the shell |k|^2 != lambda.

    Args:
        piece (str): One of PIECES
        n (int): Dimension
        lam (int): Radius squared
        N (int): Weyl-sum scale
        spec (MollifierSpec): Mollifier where needed
        family (Sec7Family): Family where needed
        gamma (BumpFunction): Cutoff
        skip_shell (bool): Leave out the frequencies with l = 0

    Returns:
        tuple: (maximum, l at the maximum)
    """
    gamma = gamma or BumpFunction("gamma")
    best = _max_gamma_product(n, N, gamma)
    transform = piece_transform(piece, spec, family)
    top_value, top_l = 0.0, None
    for mu in np.nonzero(best > 0)[0]:
        if skip_shell and mu == lam:
            continue
        value = best[mu] * abs(transform(int(mu) - lam))
        if value > top_value:
            top_value, top_l = value, int(mu) - lam
    return top_value, top_l


def kernel_piece_spectral(piece, n, lam, N, x, spec=None, family=None, gamma=None):
    """
    A piece evaluated on the Fourier side: sum over |k_i| <= 2N of
    prod gamma(k_i/N) e(k . x) h(|k|^2 - lambda).

    Args:
        piece (str): One of PIECES
        n (int): Dimension (small; the box has (4N+1)^n points)
        lam (int): Radius squared
        N (int): Weyl-sum scale
        x (sequence): Torus point
        spec (MollifierSpec): Mollifier where needed
        family (Sec7Family): Family where needed
        gamma (BumpFunction): Cutoff

    Returns:
        complex: The value
    """
    gamma = gamma or BumpFunction("gamma")
    axis = np.arange(-2 * N, 2 * N + 1, dtype=np.int64)
    box = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    weights = np.prod(gamma(box / N), axis=1)
    keep = weights > 0
    box, weights = box[keep], weights[keep]
    ls = (box * box).sum(axis=1) - lam
    transform = piece_transform(piece, spec, family)
    unique, inverse = np.unique(ls, return_inverse=True)
    coefficients = np.array([transform(int(l)) for l in unique])[inverse]
    phases = e(np.mod(box.astype(float) @ np.asarray(x, dtype=float), 1.0))
    return complex(compensated_sum(weights * coefficients * phases))


def kernel_minor(family, n, lam, xs, gamma=None, tol=None, max_doublings=8):
    """
    K^minor(x) = integral of prod_j G(t, x_j) e(-lambda t) rho(t) dt on a uniform grid.

    The grid starts above the trigonometric degree and the narrowest bump
    width and doubles until successive values agree within tol.

    Args:
        family (Sec7Family): The dyadic family defining rho
        n (int): Dimension
        lam (int): Radius squared
        xs (ndarray): (M, n) torus points
        gamma (BumpFunction): Cutoff
        tol (float): Absolute tolerance (1e-9 N^n by default)
        max_doublings (int): Refinement limit

    Returns:
        list: KernelSample per point
    """
    gamma = gamma or BumpFunction("gamma")
    N = family.N
    tol = tol if tol is not None else 1e-9 * N ** n
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    need = max(exactness_threshold(n, lam, N), 32 * family.max_scale())
    M0 = 1 << int(math.ceil(math.log2(need)))

    def on_grid(size, x):
        integrand = family.rho_grid(size) * e_rational(-lam * np.arange(size, dtype=np.int64), size)
        for coordinate in x:
            integrand = integrand * weyl_grid(size, coordinate, N, gamma)
        return complex(compensated_sum(integrand) / size)

    samples = []
    for x in xs:
        M = M0
        previous = on_grid(M, x)
        for _ in range(max_doublings):
            M *= 2
            current = on_grid(M, x)
            error = abs(current - previous)
            if error <= tol:
                break
            previous = current
        else:
            raise QuadratureNotConverged("minor-arc grid did not converge", estimate=current, error=error)
        point = tuple(float(v) for v in x)
        samples.append(KernelSample("Kminor", point, complex(current.real, current.imag), M, error))
    return samples


def decomposition_check(n, lam, xs, major_cut=100, gamma=None, tol=None):
    """
    Verifies K = sum K^{Q,s} + K^minor at the given points.

    Args:
        n (int): Dimension
        lam (int): Radius squared; N = isqrt(lambda) + 1
        xs (ndarray): (M, n) torus points
        major_cut (int): Dyadic pieces need Q < N/major_cut
        gamma (BumpFunction): Cutoff
        tol (float): Quadrature tolerance

    Returns:
        ExperimentReport: Per-point values and the worst error relative to |F_{n,lambda}|
    """
    from core.sphere_lattice import enumerate_shell

    gamma = gamma or BumpFunction("gamma")
    N = math.isqrt(lam) + 1
    tol = tol if tol is not None else 1e-10 * N ** n
    shell = enumerate_shell(n, lam)
    family = build_sec7_family(N, major_cut=major_cut)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    pieces = np.zeros(len(xs))
    for spec in family.specs:
        quadrature = ArcQuadrature(spec, n, lam, gamma)
        quadrature.calibrate(tol)
        pieces += quadrature.evaluate(xs)
    minor = np.array([s.value.real for s in kernel_minor(family, n, lam, xs, gamma, tol)])
    direct = kernel_direct_many(shell, xs).real
    scale = max(len(shell), 1)
    rows = []
    for x, k, p, mnr in zip(xs, direct, pieces, minor):
        rows.append({"x": x.tolist(), "K": k, "major": p, "minor": mnr,
                     "rel_error": abs(k - p - mnr) / scale})
    worst = max((r["rel_error"] for r in rows), default=0.0)
    summary = {"pieces": len(family), "worst_rel_error": worst, "passed": worst <= 1e-6}
    logger.info("Decomposition n=%d lambda=%d: %d pieces, worst error %.3g", n, lam, len(family), worst)
    return ExperimentReport("decomposition", {"n": n, "lambda": lam, "N": N, "major_cut": major_cut}, rows, summary)


@dataclass(frozen=True)
class SupNormEstimate:
    """
    A certified lower bound on a sup norm with the point attaining it.
    """
    value: float
    point: tuple
    bound: float = None
    evaluations: int = 0

    @property
    def ratio(self):
        if not self.bound:
            return None
        return self.value / self.bound


def sup_norm_estimate(evaluator, n, samples=1000, seed=0, starts=10, sweeps=1, width=0.05, bound=None):
    """
    Lower bound on sup |piece| by random search plus coordinate ascent.

    The origin is always among the samples. The best starts are refined one
    coordinate at a time with bounded scalar maximization on a window of
    half-width width around the current value.

    Args:
        evaluator (callable): Maps an (M, n) array of points to values
        n (int): Dimension
        samples (int): Random points, >= 1000
        seed (int): Experiment seed
        starts (int): Points refined by ascent
        sweeps (int): Coordinate sweeps per start
        width (float): Ascent window half-width
        bound (float): Envelope value for the ratio report

    Returns:
        SupNormEstimate: Maximum found and its point
    """
    if samples < 1000:
        raise ValueError("sup_norm_estimate needs at least 1000 samples")
    points = np.vstack([np.zeros(n), derive_generator(seed, 0).random((samples - 1, n))])
    values = np.abs(np.asarray(evaluator(points)))
    evaluations = len(points)
    order = np.argsort(-values, kind="stable")[:starts]
    best_value = float(values[order[0]])
    best_point = points[order[0]].copy()
    for index in order:
        x = points[index].copy()
        current = float(values[index])
        for _ in range(sweeps):
            for i in range(n):
                def objective(v, i=i, x=x):
                    y = x.copy()
                    y[i] = v
                    return -float(np.abs(evaluator(y[None, :]))[0])
                result = minimize_scalar(objective, bounds=(x[i] - width, x[i] + width),
                                         method="bounded", options={"xatol": width * 1e-4})
                evaluations += result.nfev
                if -result.fun > current:
                    x[i] = result.x % 1.0
                    current = -result.fun
        if current > best_value:
            best_value, best_point = current, x
    return SupNormEstimate(best_value, tuple(float(v) for v in best_point), bound, evaluations)


def supnorm_sweep(n, lam, Qs, samples=1000, seed=0, variant="sec4", gamma=None, tol=None):
    """
    Estimates sup |K^Q| for several Q against Q^((n-1)/2) and the combined bound.

    Args:
        n (int): Dimension
        lam (int): Radius squared; N = isqrt(lambda) + 1
        Qs (sequence): Modulus scales with N <= Q <= N^2
        samples (int): Random points per Q
        seed (int): Experiment seed
        variant (str): "sec4" or "sec4_all"
        gamma (BumpFunction): Cutoff
        tol (float): Quadrature tolerance

    Returns:
        ExperimentReport: Rows per Q; passes when the ratios stay within a
            factor 10 of each other and below 20 N^0.3
    """
    N = math.isqrt(lam) + 1
    rows = []
    for Q in Qs:
        spec = build_mollifier(variant, Q, N)
        quadrature = ArcQuadrature(spec, n, lam, gamma)
        quadrature.calibrate(tol)
        estimate = sup_norm_estimate(quadrature.evaluate, n, samples, seed,
                                     width=0.25 / N, bound=bounds.small_modulus_envelope(n, Q))
        rows.append({
            "Q": Q, "sup": estimate.value, "point": list(estimate.point),
            "small_modulus_bound": bounds.small_modulus_envelope(n, Q), "ratio": estimate.ratio,
            "combined": bounds.kq_sup_envelope(n, N, Q),
            "conjectured": bounds.conjectured_kq_envelope(n, Q),
            "nodes": quadrature.node_count,
        })
        logger.info("sup |K^Q| n=%d N=%d Q=%d: %.4g (ratio %.3f)", n, N, Q, estimate.value, estimate.ratio)
    ratios = [r["ratio"] for r in rows]
    spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else math.inf
    summary = {"ratio_spread": spread, "max_ratio": max(ratios, default=0.0),
               "cap": 20 * N ** 0.3}
    summary["passed"] = spread <= 10 and summary["max_ratio"] <= summary["cap"]
    return ExperimentReport("supnorm", {"n": n, "lambda": lam, "N": N, "Qs": list(Qs), "samples": samples,
                                        "seed": seed, "variant": variant}, rows, summary)


def _memoized(evaluator):
    """Wraps a points -> values evaluator with a per-point cache."""
    cache = {}

    def evaluate(xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        missing = [x for x in xs if x.tobytes() not in cache]
        if missing:
            for x, value in zip(missing, evaluator(np.array(missing))):
                cache[x.tobytes()] = value
        return np.array([cache[x.tobytes()] for x in xs])

    return evaluate


def _ratio(value, bound):
    return value / bound if bound else None


def dyadic_supnorm_sweep(n, lam, major_cut=100, samples=1000, seed=0, starts=10, gamma=None, tol=None):
    """
    Sup norms and Fourier coefficients of every dyadic piece against their envelopes.

    For each (Q, s) it estimates sup |K^{Q,s}| and sup |K1^{Q,s}| with
    K1^{Q,s} = K^{Q,s} - alpha_{Q,s} K^minor, both against
    (N 2^s)^(n/2 - 1) Q^(-(n-3)/2), and compares F(K^{Q,s}) on and off the
    shell with Q^2/(N 2^s) and Q/(N 2^s). One more row does the same for
    K^minor against N^((n-1)/2) and F(rho).

    Args:
        n (int): Dimension
        lam (int): Radius squared; N = isqrt(lambda) + 1
        major_cut (int): Dyadic pieces need Q < N/major_cut
        samples (int): Random points per sup estimate, >= 1000
        seed (int): Experiment seed
        starts (int): Points refined by coordinate ascent
        gamma (BumpFunction): Cutoff
        tol (float): Quadrature tolerance

    Returns:
        ExperimentReport: One row per piece. Passes when every sup and
            off-shell ratio stays below 20 N^0.3, every on-shell ratio of
            K^{Q,s} lies in [1/4, 4] and F(K1^{Q,s}) vanishes on the shell

    Raises:
        ValueError: If the family is empty at this scale
    """
    gamma = gamma or BumpFunction("gamma")
    N = math.isqrt(lam) + 1
    family = build_sec7_family(N, major_cut=major_cut)
    if not len(family):
        raise ValueError(f"no dyadic pieces at N={N} with major_cut={major_cut}")
    width = 0.25 / N
    minor = _memoized(lambda xs: np.array([s.value.real for s in kernel_minor(family, n, lam, xs, gamma, tol)]))

    def row(piece, spec, estimate, on_shell, on_bound, off_shell, off_bound):
        return {
            "piece": piece, "Q": spec.Q if spec else None, "s": spec.s if spec else None,
            "sup": estimate.value, "point": list(estimate.point), "sup_bound": estimate.bound,
            "sup_ratio": estimate.ratio,
            "on_shell": on_shell, "on_shell_bound": on_bound, "on_shell_ratio": _ratio(on_shell, on_bound),
            "off_shell": off_shell, "off_shell_bound": off_bound, "off_shell_ratio": _ratio(off_shell, off_bound),
        }

    minor_sup = sup_norm_estimate(minor, n, samples, seed, starts=starts, width=width,
                                  bound=bounds.kminor_sup_envelope(n, N))
    off_minor, _ = fourier_sup("Kminor", n, lam, N, family=family, gamma=gamma, skip_shell=True)
    rows = [row("Kminor", None, minor_sup, abs(family.rho_transform(0)), bounds.kminor_fourier_envelope(N, True),
                off_minor, bounds.kminor_fourier_envelope(N, False))]
    for spec in family.specs:
        quadrature = ArcQuadrature(spec, n, lam, gamma)
        quadrature.calibrate(tol)
        alpha = family.alpha(spec)
        envelope = bounds.kqs_sup_envelope(n, N, spec.Q, spec.s)
        on_bound = bounds.kqs_fourier_envelope(N, spec.Q, spec.s, True)
        off_bound = bounds.kqs_fourier_envelope(N, spec.Q, spec.s, False)

        piece_sup = sup_norm_estimate(quadrature.evaluate, n, samples, seed, starts=starts, width=width,
                                      bound=envelope)
        off_piece, _ = fourier_sup("KQs", n, lam, N, spec=spec, gamma=gamma, skip_shell=True)
        rows.append(row("KQs", spec, piece_sup, abs(spec.transform(0)), on_bound, off_piece, off_bound))

        k1_sup = sup_norm_estimate(lambda xs, q=quadrature, a=alpha: q.evaluate(xs) - a * minor(xs),
                                   n, samples, seed, starts=starts, width=width, bound=envelope)
        k1_shell = abs(spec.transform(0) - alpha * family.rho_transform(0))
        off_k1, _ = fourier_sup("K1", n, lam, N, spec=spec, family=family, gamma=gamma, skip_shell=True)
        rows.append(row("K1", spec, k1_sup, k1_shell, on_bound, off_k1, off_bound))
        logger.info("Dyadic piece Q=%d s=%d: sup %.4g (ratio %.3f), K1 sup %.4g", spec.Q, spec.s,
                    piece_sup.value, piece_sup.ratio, k1_sup.value)

    cap = 20 * N ** 0.3
    ratios = [r["sup_ratio"] for r in rows] + [r["off_shell_ratio"] for r in rows]
    band = [r["on_shell_ratio"] for r in rows if r["piece"] == "KQs"]
    k1_shell = max(r["on_shell"] for r in rows if r["piece"] == "K1")
    summary = {
        "pieces": len(family),
        "rho_mass": family.rho_transform(0).real,
        "cap": cap,
        "max_ratio": max(ratios),
        "on_shell_band": [min(band), max(band)],
        "k1_on_shell": k1_shell,
    }
    summary["passed"] = summary["max_ratio"] <= cap and 0.25 <= min(band) and max(band) <= 4 and k1_shell <= 1e-12
    return ExperimentReport("dyadic_supnorm", {"n": n, "lambda": lam, "N": N, "major_cut": major_cut,
                                               "samples": samples, "seed": seed}, rows, summary)


def fourier_remainder_sweep(n, lam, Qs, variant="sec4", gamma=None):
    """
    max_k |F(K - K^Q)(k)| against the 1/Q envelope for several Q; the ratio
    must stay below 20 N^0.2.

    Args:
        n (int): Dimension
        lam (int): Radius squared
        Qs (sequence): Modulus scales
        variant (str): "sec4" or "sec4_all"
        gamma (BumpFunction): Cutoff

    Returns:
        ExperimentReport: Rows per Q
    """
    N = math.isqrt(lam) + 1
    rows = []
    for Q in Qs:
        spec = build_mollifier(variant, Q, N)
        top, at = fourier_sup("K-KQ", n, lam, N, spec=spec, gamma=gamma)
        bound = bounds.fourier_remainder_envelope(Q)
        rows.append({"Q": Q, "max_coefficient": top, "at_l": at, "bound": bound, "ratio": top / bound,
                     "on_shell": abs(1.0 - spec.transform(0).real)})
    cap = 20 * N ** 0.2
    summary = {"cap": cap, "max_ratio": max((r["ratio"] for r in rows), default=0.0)}
    summary["passed"] = summary["max_ratio"] <= cap
    return ExperimentReport("fourier_remainder", {"n": n, "lambda": lam, "N": N, "Qs": list(Qs), "variant": variant},
                            rows, summary)


def levelset_chain_check(shell, coefficients, alpha, Q, samples=10**5, seed=0, batches=20,
                         gamma=None, sup_samples=1000, tol=None):
    """
    Monte-Carlo check of the level-set chain
    alpha |E| <= int_E |F|, (int_E |F|)^2 <= <K*f, f>,
    <K*f, f> <= sup|K^Q| |E|^2 + sup|F(K - K^Q)| |E|.

    <K*f, f> = sum over the shell of |F(f)(xi)|^2 is estimated without bias
    by (|S|^2 - sum |z|^2) / (m (m - 1)) per frequency. Errors come from
    batch means.

    Args:
        shell (SphereShell): Nonempty shell
        coefficients (CoefficientVector or ndarray): Unit l2-norm coefficients
        alpha (float): Threshold
        Q (int): Major-arc modulus scale, N <= Q <= N^2
        samples (int): Monte-Carlo points
        seed (int): Experiment seed
        batches (int): Batches for the error bars
        gamma (BumpFunction): Cutoff
        sup_samples (int): Random points for sup |K^Q|
        tol (float): Arc quadrature tolerance

    Returns:
        ExperimentReport: Estimates, the three inequalities and a verdict
    """
    if shell.is_empty:
        raise EmptyShell("level-set chain needs a nonempty shell")
    a = np.asarray(getattr(coefficients, "a", coefficients), dtype=complex)
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise ValueError("coefficients must have unit l2 norm")
    n, lam, N = shell.n, shell.lam, shell.N
    gamma = gamma or BumpFunction("gamma")
    count = len(shell)
    per_batch = max(2, samples // batches)
    rows_per_block = max(1, BLOCK_ENTRIES // count)
    stats = []
    for b in range(batches):
        xs = derive_generator(seed, b).random((per_batch, n))
        S = np.zeros(count, dtype=complex)
        in_set = 0
        mass = 0.0
        for start in range(0, per_batch, rows_per_block):
            phases = shell_phases(shell.points, xs[start:start + rows_per_block])
            F = phases @ a
            magnitude = np.abs(F)
            hit = magnitude > alpha
            f = np.where(hit, F / np.where(hit, magnitude, 1.0), 0.0)
            S += phases.conj().T @ f
            in_set += int(hit.sum())
            mass += float(magnitude[hit].sum())
        m = per_batch
        measure = in_set / m
        integral = mass / m
        kff = (float(np.sum(np.abs(S) ** 2)) - count * in_set) / (m * (m - 1))
        stats.append((measure, integral, kff))
    stats = np.array(stats)

    spec = build_mollifier("sec4", Q, N)
    quadrature = ArcQuadrature(spec, n, lam, gamma)
    quadrature.calibrate(tol)
    kq_sup = sup_norm_estimate(quadrature.evaluate, n, sup_samples, seed, width=0.25 / N).value
    remainder_sup, _ = fourier_sup("K-KQ", n, lam, N, spec=spec, gamma=gamma)

    measure_b, integral_b, kff_b = stats[:, 0], stats[:, 1], stats[:, 2]
    sides = [
        ("alpha*|E| <= int_E|F|", alpha * measure_b, integral_b),
        ("(int_E|F|)^2 <= <K*f,f>", integral_b ** 2, kff_b),
        ("<K*f,f> <= sup|K^Q||E|^2 + sup|F(K-K^Q)||E|", kff_b,
         kq_sup * measure_b ** 2 + remainder_sup * measure_b),
    ]
    checks = []
    for label, lhs, rhs in sides:
        diff = lhs - rhs
        sigma = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
        checks.append({"inequality": label, "lhs": float(lhs.mean()), "rhs": float(rhs.mean()),
                       "sigma": sigma, "holds": float(diff.mean()) <= 3 * sigma + 1e-12})

    def mean_err(column):
        return float(column.mean()), float(column.std(ddof=1) / math.sqrt(len(column)))

    summary = {
        "measure": mean_err(measure_b),
        "integral": mean_err(integral_b),
        "kff": mean_err(kff_b),
        "kq_sup": kq_sup,
        "fourier_remainder_sup": remainder_sup,
        "alpha2_measure2": float((alpha * measure_b.mean()) ** 2),
        "passed": all(c["holds"] for c in checks),
    }
    return ExperimentReport(
        "levelset_chain",
        {"n": n, "lambda": lam, "N": N, "alpha": alpha, "Q": Q, "samples": per_batch * batches,
         "batches": batches, "seed": seed},
        checks,
        summary,
    )
