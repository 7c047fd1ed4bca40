"""
Closed-form exponents and bound envelopes used for ratio reports.

Every envelope omits the N^eps and implicit constants; reports compare
measured values against these and never claim a proof.
"""
import math


def critical_indices(n):
    """
    Critical Lebesgue exponents for dimension n.

    Args:
        n (int): Dimension >= 2

    Returns:
        dict: p_sub = 2n/(n-1), p_c = 2n/(n-2), p_n = 2n/(n-3), p_0 = 2(n-1)/(n-3);
            undefined indices are math.inf
    """
    def ratio(num, den):
        return num / den if den > 0 else math.inf

    return {
        "p_sub": ratio(2 * n, n - 1),
        "p_c": ratio(2 * n, n - 2),
        "p_n": ratio(2 * n, n - 3),
        "p_0": ratio(2 * (n - 1), n - 3),
    }


def predicted_exponent(n, p, q=2):
    """
    Conjectured growth exponent of M_{p,q,n} in N.

    Args:
        n (int): Dimension >= 3
        p (float): Lebesgue exponent >= 1
        q (float): Coefficient norm exponent >= 1

    Returns:
        float: The exponent in the matching regime
    """
    p_c = critical_indices(n)["p_c"]
    inv_q_dual = 1.0 - 1.0 / q
    supercritical = (n - 2) * inv_q_dual - n / p
    if q <= 2:
        p_cq = p_c / (2 * (1.0 - 1.0 / q)) if q > 1 else math.inf
        return 0.0 if p <= p_cq else supercritical
    if p <= p_c:
        return (n - 2) * (0.5 - 1.0 / q)
    return supercritical


def theorem1_exponent(n, p):
    """(n-2)/2 - n/p, the growth of M_{p,2,n} in the proven range."""
    return (n - 2) / 2 - n / p


def in_theorem1_range(n, p):
    """True if n >= 4 and p >= 2n/(n-3)."""
    return n >= 4 and p >= critical_indices(n)["p_n"]


def small_modulus_envelope(n, Q):
    """Q^((n-1)/2)."""
    return Q ** ((n - 1) / 2)


def large_modulus_envelope(n, N, Q):
    """N^2 Q^((n-4)/2)."""
    return N ** 2 * Q ** ((n - 4) / 2)


def kq_sup_envelope(n, N, Q):
    """
    Combined major-arc bound: N^2 Q^((n-4)/2) for Q >= N^(4/3), else Q^((n-1)/2).
    """
    if Q >= N ** (4 / 3):
        return large_modulus_envelope(n, N, Q)
    return small_modulus_envelope(n, Q)


def conjectured_kq_envelope(n, Q):
    """Q^((n-2)/2), the conjectured all-moduli bound."""
    return Q ** ((n - 2) / 2)


def fourier_remainder_envelope(Q):
    """Q^(-1), the Fourier-side bound on K - K^Q."""
    return 1.0 / Q


def kqs_sup_envelope(n, N, Q, s):
    """(N 2^s)^(n/2 - 1) Q^(-(n-3)/2)."""
    return (N * 2 ** s) ** (n / 2 - 1) * Q ** (-(n - 3) / 2)


def kqs_fourier_envelope(N, Q, s, on_shell):
    """Q^2/(N 2^s) at frequency offset zero, Q/(N 2^s) elsewhere."""
    return (Q ** 2 if on_shell else Q) / (N * 2 ** s)


def kminor_sup_envelope(n, N):
    """N^((n-1)/2)."""
    return N ** ((n - 1) / 2)


def kminor_fourier_envelope(N, on_shell):
    """1 at frequency offset zero, 1/N elsewhere."""
    return 1.0 if on_shell else 1.0 / N


def levelset_envelope(n, N, alpha):
    """
    Level-set bound for n >= 5 in its two ranges.

    alpha^(-2(n+1)/(n-1)) for N^((n-1)/4) <= alpha <= N^((n-1)/3);
    N^(4/(n-4)) alpha^(-(2n-4)/(n-4)) above. None below the first range.
    """
    if n < 5 or alpha < N ** ((n - 1) / 4):
        return None
    if alpha <= N ** ((n - 1) / 3):
        return alpha ** (-2 * (n + 1) / (n - 1))
    return N ** (4 / (n - 4)) * alpha ** (-(2 * n - 4) / (n - 4))


def bnew13_envelope(n, N, alpha):
    """alpha^(-2(n-1)/(n-3)) N^(2/(n-3)), valid above alpha_0 = N^((n-1)/4)."""
    if n < 4:
        return None
    return alpha ** (-2 * (n - 1) / (n - 3)) * N ** (2 / (n - 3))


def subcritical_levelset_envelope(n, alpha):
    """alpha^(-2n/(n-1)), the level-set form of the subcritical bound."""
    return alpha ** (-2 * n / (n - 1))


def sharp_levelset_envelope(n, alpha):
    """alpha^(-2n/(n-2)), the sharp conjectured level-set bound."""
    return alpha ** (-2 * n / (n - 2))


def weyl_levelset_envelope(N, s):
    """N^2 2^(-4s) for the measure of {|G| >= 2^s}."""
    return N ** 2 * 2.0 ** (-4 * s)


def sigma_prime_envelope(n, q, lam, C=4.0, eps=0.1):
    """C q^eps (sqrt q)^(1-n) sqrt(gcd(lambda, q))."""
    return C * q ** eps * math.sqrt(q) ** (1 - n) * math.sqrt(math.gcd(lam, q))


def weil_bound(q):
    """2 sqrt(q), for Kloosterman and Salie sums at primes."""
    return 2.0 * math.sqrt(q)


def shell_size_envelope(n, N):
    """N^(n-2)."""
    return N ** (n - 2)


def salie_bound(q):
    """2 sqrt(q); at primes the closed form gives |K2| = 2 sqrt(q) |cos(4 pi x/q)|."""
    return weil_bound(q)
