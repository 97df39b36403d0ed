"""Hard-instance family and quantitative lower-bound ledgers.

Two spectra appear.  The farness family (Theta-witness, far_probability)
uses states with d/2 eigenvalues (1+8eps)/d and d/2 eigenvalues (1-8eps)/d.
The Schur-Weyl measure comparisons (product TV, ensemble trace distance,
chi-square tail) use the narrower spectrum (1±2eps)/d, the one for which
the tail constant 256 n^2 eps^4 / d^2 is valid; the stated bounds
16 eps^2 M / (d sqrt N) and exp(256 n^2 eps^4 / d^2) - 1 hold for it on the
whole desk-scale grid.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .collection import Collection
from .densmat import DensityMatrix, haar_unitary, trace_distance
from .divergences import multinomial_pmf
from .symmetry import partitions, schur_weyl_table

TV_ENUM_CAP = 8


class LowerBoundError(ValueError):
    pass


class OddDimension(LowerBoundError):
    pass


class EpsilonTooLarge(LowerBoundError):
    pass


class WrongFamily(LowerBoundError):
    pass


class TooLarge(LowerBoundError):
    pass


def skewed_spectrum(d, half_gap):
    """Spectrum with d/2 eigenvalues (1+half_gap)/d and d/2 at (1-half_gap)/d,
    interleaved so that entry k (1-based) is (1 + (-1)^k half_gap)/d."""
    if d % 2 != 0:
        raise OddDimension(f"d={d} must be even")
    if not 0 <= half_gap <= 1:
        raise EpsilonTooLarge(f"half gap {half_gap} outside [0, 1]")
    vals = np.empty(d)
    for k in range(1, d + 1):
        vals[k - 1] = (1.0 + (-1.0) ** k * half_gap) / d
    return vals


def make_rho0(d, epsilon):
    """The far-family seed state: half the spectrum at (1+8eps)/d, half at
    (1-8eps)/d, diagonal in the computational basis."""
    return DensityMatrix.diagonal(skewed_spectrum(d, 8.0 * epsilon))


def make_rho_eps(d, epsilon):
    """Skewed state for the ensemble-discrimination checks: spectrum (1±2eps)/d."""
    return DensityMatrix.diagonal(skewed_spectrum(d, 2.0 * epsilon))


def alternating_sign_operator(d):
    """diag((-1)^k) in the rho0 eigenbasis; squares to the identity and is
    traceless for even d."""
    if d % 2 != 0:
        raise OddDimension(f"d={d} must be even")
    return np.diag([(-1.0) ** k for k in range(1, d + 1)])


@dataclass
class HardInstance:
    """A sampled far collection: uniform weights over Haar conjugates of rho0."""

    d: int
    n_states: int
    epsilon: float
    rho0: DensityMatrix
    unitaries: list
    collection: Collection


def sample_hard_collection(d, n_states, epsilon, rng):
    rho0 = make_rho0(d, epsilon)
    unitaries = [haar_unitary(d, rng) for _ in range(n_states)]
    states = [rho0.conjugate_by(u) for u in unitaries]
    coll = Collection(np.full(n_states, 1.0 / n_states), states)
    return HardInstance(d, n_states, epsilon, rho0, unitaries, coll)


def sample_conjugate_collection(seed_state, n_states, rng):
    """Uniform collection of independent Haar conjugates of one seed state."""
    states = [seed_state.conjugate_by(haar_unitary(seed_state.dim, rng)) for _ in range(n_states)]
    return Collection(np.full(n_states, 1.0 / n_states), states)


def farness_witness_estimate(instance):
    """Sign-witness lower bound on the (unhalved) trace-norm spread:
    8 eps - (1/N^2) sum_ij Tr[Theta U_i^+ U_j rho0 U_j^+ U_i].

    Returns (estimate, trace_norm_avg, mean_trace_distance) where
    trace_norm_avg = (1/N) sum_i ||rho_i - rhobar||_1 = 2 * mean_trace_distance
    is the quantity the estimate provably lower-bounds.
    """
    if not isinstance(instance, HardInstance):
        raise WrongFamily("needs a HardInstance from sample_hard_collection")
    theta = alternating_sign_operator(instance.d)
    rho0 = instance.rho0.mat
    n = instance.n_states
    acc = 0.0
    for ui in instance.unitaries:
        for uj in instance.unitaries:
            w = ui.conj().T @ uj
            acc += float(np.real(np.trace(theta @ w @ rho0 @ w.conj().T)))
    estimate = 8.0 * instance.epsilon - acc / n**2
    m_tr = instance.collection.mean_trace_distance()
    return estimate, 2.0 * m_tr, m_tr


def far_probability(d, n_states, epsilon, trials, rng):
    """Empirical frequency of (1/N) sum_i ||rho_i - rhobar||_1 > 4 eps over
    seeded hard-instance draws.  A 1e-12 floor on the threshold absorbs
    rounding so the eps = 0 family counts as never-far."""
    if n_states < 10:
        warnings.warn("farness guarantee is stated for N >= 10", stacklevel=2)
    hits = 0
    for _ in range(trials):
        inst = sample_hard_collection(d, n_states, epsilon, rng)
        if 2.0 * inst.collection.mean_trace_distance() > 4.0 * epsilon + 1e-12:
            hits += 1
    return hits / trials


# ---------------------------------------------------------------------------
# Schur-Weyl measure comparisons (spectrum (1±2eps)/d)


def _sw_tables(counts, d, epsilon):
    spec_eps = skewed_spectrum(d, 2.0 * epsilon)
    spec_unif = np.full(d, 1.0 / d)
    per_factor = []
    for m in counts:
        lams = partitions(int(m), d)
        if int(m) == 0:
            per_factor.append((np.array([1.0]), np.array([1.0])))
            continue
        t_eps = schur_weyl_table(int(m), spec_eps)
        t_unif = schur_weyl_table(int(m), spec_unif)
        per_factor.append(
            (
                np.array([t_unif[lam] for lam in lams]),
                np.array([t_eps[lam] for lam in lams]),
            )
        )
    return per_factor


def sw_product_tv(counts, d, epsilon):
    """Total variation between the products over blocks of the Schur-Weyl
    measures at the uniform spectrum vs the (1±2eps)/d spectrum."""
    if sum(int(m) for m in counts) > TV_ENUM_CAP:
        raise TooLarge(f"sum of counts beyond the enumeration cap {TV_ENUM_CAP}")
    per_factor = _sw_tables(counts, d, epsilon)
    p_joint = np.array([1.0])
    q_joint = np.array([1.0])
    for p_i, q_i in per_factor:
        p_joint = np.multiply.outer(p_joint, p_i).ravel()
        q_joint = np.multiply.outer(q_joint, q_i).ravel()
    return 0.5 * float(np.abs(p_joint - q_joint).sum())


def trace_distance_AB(d, n_states, epsilon, total):
    """Exact trace distance between M samples of the all-maximally-mixed
    ensemble and the Haar-averaged far ensemble: the multinomial expectation
    of sw_product_tv over count vectors (uniform labels)."""
    if total > TV_ENUM_CAP:
        raise TooLarge(f"M={total} beyond the enumeration cap {TV_ENUM_CAP}")
    p_unif = np.full(n_states, 1.0 / n_states)
    acc = 0.0
    for lam in partitions(total, n_states):
        counts = list(lam) + [0] * (n_states - len(lam))
        # arrangements of this multiset over the N labeled slots
        mults = {}
        for v in counts:
            mults[v] = mults.get(v, 0) + 1
        arrangements = math.factorial(n_states)
        for c in mults.values():
            arrangements //= math.factorial(c)
        weight = arrangements * multinomial_pmf(counts, p_unif, total)
        acc += weight * sw_product_tv(counts, d, epsilon)
    return acc


def tv_bound(d, n_states, epsilon, total):
    """The displayed bound 16 eps^2 M / (d sqrt N)."""
    return 16.0 * epsilon**2 * total / (d * math.sqrt(n_states))


def chi2_sw_bound_check(n, d, epsilon):
    """(lhs, rhs) with lhs the chi-square divergence of the (1±2eps)/d
    Schur-Weyl measure from the uniform one (denominator on the skewed
    measure) and rhs = exp(256 n^2 eps^4 / d^2) - 1."""
    if n > TV_ENUM_CAP or d > 4:
        raise TooLarge("chi-square check is pinned to n <= 8, d <= 4")
    if n == 0:
        return 0.0, math.exp(0.0) - 1.0
    t_eps = schur_weyl_table(n, skewed_spectrum(d, 2.0 * epsilon))
    t_unif = schur_weyl_table(n, np.full(d, 1.0 / d))
    lhs = 0.0
    for lam, p in t_eps.items():
        q = t_unif[lam]
        if p > 0:
            lhs += (p - q) ** 2 / p
    rhs = math.exp(256.0 * n**2 * epsilon**4 / d**2) - 1.0
    return lhs, rhs


def kl_sw_bound(m, d, epsilon):
    """The per-block KL budget 256 * 1_{m>1} m^2 eps^4 / d^2."""
    return 0.0 if m <= 1 else 256.0 * m**2 * epsilon**4 / d**2


# ---------------------------------------------------------------------------
# headline numeric bounds


def sample_lower_bound(d, n_states, epsilon):
    """M >= 4e-3 sqrt(N) d / eps^2."""
    return 4e-3 * math.sqrt(n_states) * d / epsilon**2


def two_state_lower_bound(d, epsilon):
    """M >= 0.15 d / eps^2 for discriminating the maximally mixed state from
    the (1±2eps)/d state."""
    return 0.15 * d / epsilon**2


def reference_farness_check(collection, epsilon, rng, n_haar=100):
    """Checks the implication: if the collection is 4eps-far from its average
    (unhalved trace norm), it is eps-far from every reference state, over
    sampled references (Haar states, the average, and each member)."""
    if np.ptp(collection.weights) > 1e-12:
        raise LowerBoundError("stated for uniform weights")
    states = collection.states
    n = collection.n_states
    bar = collection.average_state()

    def avg_distance(sigma):
        return sum(2.0 * trace_distance(s, sigma) for s in states) / n

    hypothesis = avg_distance(bar) > 4.0 * epsilon
    from .densmat import Spectrum, random_state

    sigmas = [bar] + list(states)
    d = collection.dim
    for _ in range(n_haar):
        sigmas.append(random_state(Spectrum(rng.dirichlet(np.ones(d))), rng))
    values = [avg_distance(s) for s in sigmas]
    violations = sum(1 for v in values if v <= epsilon) if hypothesis else 0
    return {
        "hypothesis_holds": bool(hypothesis),
        "avg_distance_to_mean": avg_distance(bar),
        "n_sigma": len(sigmas),
        "min_avg_distance": min(values),
        "violations": violations,
    }
