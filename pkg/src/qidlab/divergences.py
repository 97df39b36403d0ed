"""Classical divergences and the Poisson/multinomial distributions.

KL comes in two explicitly named bases: kl_bits (log2) and kl_nats (ln).
Pinsker and the chi-square comparison hold in nats, so the inequality
suite calls kl_nats; kl_bits matches the definition used for reporting.
"""

import math

import numpy as np
from scipy.special import gammaln

DIST_SUM_TOL = 1e-12


class DivergenceError(ValueError):
    pass


class LengthMismatch(DivergenceError):
    pass


class KLInfinite(DivergenceError):
    pass


class BadArguments(DivergenceError):
    pass


def validate_distribution(probs):
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DivergenceError("distribution must be a nonempty 1-d vector")
    if np.any(p < 0):
        raise DivergenceError(f"negative probability {p.min()}")
    if abs(p.sum() - 1.0) > DIST_SUM_TOL:
        raise DivergenceError(f"probabilities sum to {p.sum()}")
    return p


def _pair(p, q):
    p = validate_distribution(p)
    q = validate_distribution(q)
    if p.size != q.size:
        raise LengthMismatch(f"lengths {p.size} != {q.size}")
    return p, q


def chi_squared(p, q):
    """sum_i (p_i - q_i)^2 / p_i, skipping i with p_i = q_i = 0.

    Returns math.inf when some p_i = 0 but q_i != 0.  Note the denominator
    sits on the FIRST argument.
    """
    p, q = _pair(p, q)
    if np.any((p == 0) & (q != 0)):
        return math.inf
    mask = p > 0
    diff = p[mask] - q[mask]
    return float(np.sum(diff * diff / p[mask]))


def _kl(p, q, log):
    p, q = _pair(p, q)
    if np.any((p > 0) & (q == 0)):
        raise KLInfinite("supp(p) not contained in supp(q)")
    mask = p > 0
    return float(np.sum(p[mask] * log(p[mask] / q[mask])))


def kl_bits(p, q):
    """Kullback-Leibler divergence in bits (log base 2)."""
    return _kl(p, q, np.log2)


def kl_nats(p, q):
    """Kullback-Leibler divergence in nats (natural log)."""
    return _kl(p, q, np.log)


def tv_distance(p, q):
    """Total variational distance (1/2) sum_i |p_i - q_i|."""
    p, q = _pair(p, q)
    return 0.5 * float(np.abs(p - q).sum())


def poisson_pmf(mean, m):
    """exp(-mean) mean^m / m!, via log-gamma for stability."""
    if mean < 0:
        raise BadArguments(f"negative Poisson mean {mean}")
    m = int(m)
    if m < 0:
        raise BadArguments(f"negative count {m}")
    if mean == 0.0:
        return 1.0 if m == 0 else 0.0
    return float(math.exp(-mean + m * math.log(mean) - gammaln(m + 1)))


def poisson_cdf_table(mean, mmax):
    """pmf values Poi_mean(0..mmax) as an array."""
    ms = np.arange(mmax + 1)
    if mean == 0.0:
        out = np.zeros(mmax + 1)
        out[0] = 1.0
        return out
    return np.exp(-mean + ms * math.log(mean) - gammaln(ms + 1))


def poisson_cutoff(mean, tail):
    """Smallest M with P(X <= M) >= 1 - tail for X ~ Poi(mean)."""
    if tail <= 0:
        raise BadArguments("tail must be positive")
    if mean == 0.0:
        return 0
    m, term, cum = 0, math.exp(-mean), math.exp(-mean)
    while cum < 1.0 - tail:
        m += 1
        term *= mean / m
        cum += term
        if m > 100 * (mean + 10):
            raise BadArguments("cutoff search did not converge")
    return m


def multinomial_pmf(counts, probs, total):
    """Multinomial pmf at counts, for `total` draws with cell probabilities probs."""
    m = np.asarray(counts, dtype=int)
    p = validate_distribution(probs)
    if m.size != p.size:
        raise LengthMismatch(f"lengths {m.size} != {p.size}")
    if np.any(m < 0) or m.sum() != total:
        raise BadArguments(f"counts {m.tolist()} do not sum to {total}")
    if np.any((p == 0) & (m > 0)):
        return 0.0
    mask = m > 0
    logp = gammaln(total + 1) - gammaln(m + 1).sum() + np.sum(m[mask] * np.log(p[mask]))
    return float(math.exp(logp))
