"""Unbiased estimator of the mean squared Hilbert-Schmidt spread.

The estimator observable for a count vector m is assembled from averaged
transpositions within and between the sample blocks,

    D^m = sum_i 2 (1-p_i) m_i(m_i-1) / (mu^2 p_i) O_ii
        - sum_{i<j} 4 m_i m_j / mu^2 O_ij,

whose conditional mean depends on the states only through pair overlaps.
This module provides the dense block operators and a measurement oracle at
d**M <= 1024, the closed-form conditional moments (via the compiled/NumPy
kernels), exact truncated-Poisson mean and variance with a V1+V2 split,
the closed-form leading orders, and the covariance primitives with a dense
tensor oracle used to verify every one of them.

Moment conventions: any operator term whose prefactor m_i(m_i-1) or
m_i m_j vanishes contributes exactly zero; all triple traces enter through
their real part, which is independent of operator ordering.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .densmat import DimensionMismatch
from .divergences import poisson_cdf_table, poisson_cutoff, validate_distribution
from .symmetry import transposition_operator

OPERATOR_DIM_CAP = 1024
GRID_CELL_CAP = 5_000_000
MAX_TRUNCATION_TAIL = 1e-10
EIGENVALUE_CLUSTER_TOL = 1e-8

# scale factors applied to the covariance primitives; only ever changed by
# the verify harness's mutation mode to prove the oracle checks have teeth
_MUTATION_SCALES = {}


class EstimatorError(ValueError):
    pass


class TooLarge(EstimatorError):
    pass


class TooFewCopies(EstimatorError):
    pass


class BadKind(EstimatorError):
    pass


class TruncationTooLoose(EstimatorError):
    pass


@dataclass(frozen=True)
class EstimatorParams:
    """Poissonization mean mu > 0 and the label weights."""

    mu: float
    weights: np.ndarray

    def __post_init__(self):
        if self.mu <= 0:
            raise EstimatorError(f"mu must be positive, got {self.mu}")
        object.__setattr__(self, "weights", validate_distribution(self.weights))


@dataclass
class MomentReport:
    """Exact truncated moments of the Poissonized estimator."""

    mean: float
    variance: float
    v1: float
    v2: float
    truncation_mass: float
    mu: float
    instance_hash: str = ""
    cutoffs: tuple = ()

    def to_json(self):
        return json.dumps(
            {
                "mean": self.mean,
                "variance": self.variance,
                "v1": self.v1,
                "v2": self.v2,
                "truncation_mass": self.truncation_mass,
                "mu": self.mu,
                "instance_hash": self.instance_hash,
                "cutoffs": list(self.cutoffs),
            }
        )


def instance_hash(collection):
    return hashlib.sha256(collection.to_json().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# dense block operators (oracle scale)


def _block_offsets(counts):
    counts = np.asarray(counts, dtype=int)
    if np.any(counts < 0):
        raise EstimatorError("negative counts")
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return counts, offsets


def block_transposition_avg(i, j, counts, d):
    """Average of the transpositions between block i and block j registers
    (within one block when i == j) on the full d**M space."""
    counts, offsets = _block_offsets(counts)
    total = int(counts.sum())
    if d**total > OPERATOR_DIM_CAP:
        raise TooLarge(f"d^M = {d**total} exceeds {OPERATOR_DIM_CAP}")
    ri = range(offsets[i], offsets[i + 1])
    rj = range(offsets[j], offsets[j + 1])
    if i == j:
        if counts[i] < 2:
            raise TooFewCopies(f"block {i} has {counts[i]} < 2 copies")
        pairs = [(a, b) for a in ri for b in rj if a < b]
    else:
        if counts[i] < 1 or counts[j] < 1:
            raise TooFewCopies("both blocks need at least one copy")
        pairs = [(a, b) for a in ri for b in rj]
    acc = np.zeros((d**total, d**total))
    for a, b in pairs:
        acc += transposition_operator(total, d, a, b)
    return acc / len(pairs)


def block_estimator(counts, params, d):
    """The estimator observable D^m on the d**M block space."""
    counts, _ = _block_offsets(counts)
    total = int(counts.sum())
    if total == 0:
        return np.zeros((1, 1))
    if d**total > OPERATOR_DIM_CAP:
        raise TooLarge(f"d^M = {d**total} exceeds {OPERATOR_DIM_CAP}")
    p = params.weights
    mu2 = params.mu**2
    acc = np.zeros((d**total, d**total))
    for i, mi in enumerate(counts):
        if mi >= 2:
            coeff = 2.0 * (1.0 - p[i]) * mi * (mi - 1) / (mu2 * p[i])
            acc += coeff * block_transposition_avg(i, i, counts, d)
        for j in range(i + 1, len(counts)):
            if mi >= 1 and counts[j] >= 1:
                coeff = -4.0 * mi * counts[j] / mu2
                acc += coeff * block_transposition_avg(i, j, counts, d)
    return acc


def dense_product_state(collection, counts):
    """rho_1^{(x m_1)} (x) ... (x) rho_N^{(x m_N)} as a dense matrix."""
    counts, _ = _block_offsets(counts)
    if collection.dim ** int(counts.sum()) > OPERATOR_DIM_CAP:
        raise TooLarge("product state beyond the oracle cap")
    acc = np.eye(1, dtype=complex)
    for mi, state in zip(counts, collection.states):
        for _ in range(int(mi)):
            acc = np.kron(acc, state.mat)
    return acc


def dense_expectation(op, rho):
    return float(np.real(np.sum(op * rho.T)))


def dense_covariance(op_a, op_b, rho):
    """Symmetrized covariance Re Tr[(AB+BA) rho]/2 - Tr[A rho] Tr[B rho]."""
    ab = 0.5 * (op_a @ op_b + op_b @ op_a)
    return dense_expectation(ab, rho) - dense_expectation(op_a, rho) * dense_expectation(
        op_b, rho
    )


# ---------------------------------------------------------------------------
# conditional moments (closed forms)


def conditional_mean(collection, counts, params):
    """Tr[D^m rho^m], evaluated from overlaps only."""
    ov, tri = collection.overlap_tables()
    mean, _ = kernels.count_stats(
        np.asarray(counts, dtype=float), params.weights, params.mu, ov, tri
    )
    return float(mean[0])


def conditional_variance(collection, counts, params):
    """Var_{rho^m}[D^m], evaluated from overlaps and triple traces."""
    ov, tri = collection.overlap_tables()
    _, var = kernels.count_stats(
        np.asarray(counts, dtype=float), params.weights, params.mu, ov, tri
    )
    return float(var[0])


def covariance_primitive(kind, counts, idx, ov, tri):
    """Closed-form covariances of the block transposition averages on rho^m.

    kind/idx:
      "var_ii"   (i,)        Var[O_ii]
      "var_ij"   (i, j)      Var[O_ij], i != j
      "cov_ii_ij" (i, j)     Cov[O_ii, O_ij], i != j
      "cov_ij_ik" (i, j, k)  Cov[O_ij, O_ik], j != k, shared first index
      "cov_disjoint" (i, j, k, l)  0 for disjoint index pairs
    """
    m = np.asarray(counts, dtype=int)
    scale = _MUTATION_SCALES.get(kind, 1.0)
    if kind == "var_ii":
        (i,) = idx
        if m[i] < 2:
            raise TooFewCopies("Var[O_ii] needs m_i >= 2")
        t2, t3 = ov[i, i], tri[i, i, i]
        mi = float(m[i])
        val = 2.0 / (mi * (mi - 1.0)) * (1.0 - t2 * t2) + 4.0 * (mi - 2.0) / (
            mi * (mi - 1.0)
        ) * (t3 - t2 * t2)
        return scale * val
    if kind == "var_ij":
        i, j = idx
        if i == j or m[i] < 1 or m[j] < 1:
            raise TooFewCopies("Var[O_ij] needs i != j and one copy each")
        mi, mj = float(m[i]), float(m[j])
        val = (
            1.0 / (mi * mj)
            + (1.0 - mi - mj) / (mi * mj) * ov[i, j] ** 2
            + (1.0 / mj) * (1.0 - 1.0 / mi) * tri[i, i, j]
            + (1.0 / mi) * (1.0 - 1.0 / mj) * tri[i, j, j]
        )
        return scale * val
    if kind == "cov_ii_ij":
        i, j = idx
        if i == j or m[i] < 2 or m[j] < 1:
            raise TooFewCopies("Cov[O_ii, O_ij] needs m_i >= 2, m_j >= 1")
        val = 2.0 / float(m[i]) * (tri[i, i, j] - ov[i, i] * ov[i, j])
        return scale * val
    if kind == "cov_ij_ik":
        i, j, k = idx
        if len({i, j, k}) != 3 or m[i] < 1 or m[j] < 1 or m[k] < 1:
            raise TooFewCopies("Cov[O_ij, O_ik] needs three distinct occupied blocks")
        val = (tri[i, j, k] - ov[i, j] * ov[i, k]) / float(m[i])
        return scale * val
    if kind == "cov_disjoint":
        i, j, k, l = idx
        if len({i, j, k, l}) != 4:
            raise BadKind("cov_disjoint needs four distinct indices")
        return 0.0
    raise BadKind(f"unknown covariance primitive {kind!r}")


def conditional_variance_from_primitives(collection, counts, params):
    """Var_{rho^m}[D^m] assembled term by term from covariance_primitive;
    slow path used to cross-validate the kernels."""
    m = np.asarray(counts, dtype=int)
    p = params.weights
    mu2 = params.mu**2
    ov, tri = collection.overlap_tables()
    n = collection.n_states

    coeff_ii = {
        i: 2.0 * (1.0 - p[i]) * m[i] * (m[i] - 1) / (mu2 * p[i])
        for i in range(n)
        if m[i] >= 2
    }
    coeff_ij = {
        (i, j): -4.0 * m[i] * m[j] / mu2
        for i in range(n)
        for j in range(i + 1, n)
        if m[i] >= 1 and m[j] >= 1
    }

    var = 0.0
    for i, a in coeff_ii.items():
        var += a * a * covariance_primitive("var_ii", m, (i,), ov, tri)
    for (i, j), b in coeff_ij.items():
        var += b * b * covariance_primitive("var_ij", m, (i, j), ov, tri)
        for x, y in ((i, j), (j, i)):
            if x in coeff_ii:
                var += (
                    2.0
                    * coeff_ii[x]
                    * b
                    * covariance_primitive("cov_ii_ij", m, (x, y), ov, tri)
                )
    pairs = list(coeff_ij)
    for a in range(len(pairs)):
        for b in range(a + 1, len(pairs)):
            shared = set(pairs[a]) & set(pairs[b])
            if not shared:
                continue
            (i,) = shared
            j = (set(pairs[a]) - shared).pop()
            k = (set(pairs[b]) - shared).pop()
            var += (
                2.0
                * coeff_ij[pairs[a]]
                * coeff_ij[pairs[b]]
                * covariance_primitive("cov_ij_ik", m, (i, j, k), ov, tri)
            )
    return var


# ---------------------------------------------------------------------------
# truncated Poissonized moments


def _truncation_box(params, tail):
    if tail > MAX_TRUNCATION_TAIL:
        raise TruncationTooLoose(
            f"truncation tail {tail} exceeds {MAX_TRUNCATION_TAIL}"
        )
    means = params.weights * params.mu
    per_coord = tail / (2 * means.size)
    cutoffs = [poisson_cutoff(nu, per_coord) for nu in means]
    cells = math.prod(c + 1 for c in cutoffs)
    if cells > GRID_CELL_CAP:
        raise TooLarge(f"truncated grid has {cells} cells")
    tables = [poisson_cdf_table(nu, c) for nu, c in zip(means, cutoffs)]
    grids = np.meshgrid(*[np.arange(c + 1) for c in cutoffs], indexing="ij")
    counts = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    weights = tables[0]
    for t in tables[1:]:
        weights = np.multiply.outer(weights, t)
    weights = weights.ravel()
    return counts, weights, tuple(cutoffs)


def estimator_mean(collection, params, truncation=1e-12):
    """Truncated-Poisson expectation of the conditional mean; equals the mean
    squared HS spread up to the truncation error (unbiasedness)."""
    ov, tri = collection.overlap_tables()
    counts, weights, _ = _truncation_box(params, truncation)
    mean, _ = kernels.count_stats(counts, params.weights, params.mu, ov, tri)
    return float(weights @ mean)


def variance_exact(collection, params, truncation=1e-12):
    """Exact (truncated) variance with its V1 + V2 decomposition.

    V1 averages the intra-measurement variance of D^m over the counts; V2 is
    the variance of the conditional mean around the target functional.
    """
    ov, tri = collection.overlap_tables()
    counts, weights, cutoffs = _truncation_box(params, truncation)
    mean, var = kernels.count_stats(counts, params.weights, params.mu, ov, tri)
    mhs = collection.mean_sq_hs_distance()
    v1 = float(weights @ var)
    v2 = float(weights @ (mean - mhs) ** 2)
    return MomentReport(
        mean=float(weights @ mean),
        variance=v1 + v2,
        v1=v1,
        v2=v2,
        truncation_mass=float(weights.sum()),
        mu=params.mu,
        instance_hash=instance_hash(collection),
        cutoffs=cutoffs,
    )


def _leading_coefficients(collection, params):
    """1/mu coefficients (lam1, lam2) and exact 1/mu^2 coefficients (k1, k2)
    of the V1/V2 split; Var = (lam1+lam2)/mu + (k1+k2)/mu^2 exactly, with
    k1+k2 = 8(N-1)."""
    p = params.weights
    ov, tri = collection.overlap_tables()
    n = collection.n_states
    t2 = np.diag(ov)
    t3 = np.array([tri[i, i, i] for i in range(n)])

    lam1 = float(np.sum(16.0 * p * (1.0 - p) ** 2 * (t3 - t2 * t2)))
    k1 = float(np.sum(8.0 * (1.0 - p) ** 2 * (1.0 - t2 * t2)))
    lam2 = float(np.sum(16.0 * p * (1.0 - p) ** 2 * t2 * t2))
    k2 = float(np.sum(8.0 * (1.0 - p) ** 2 * t2 * t2))

    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            if j > i:
                lam1 += 16.0 * (
                    p[i] ** 2 * p[j] * tri[i, i, j]
                    + p[i] * p[j] ** 2 * tri[i, j, j]
                    - p[i] * p[j] * (p[i] + p[j]) * ov[i, j] ** 2
                )
                k1 += 16.0 * p[i] * p[j] * (1.0 - ov[i, j] ** 2)
                lam2 += 16.0 * p[i] * p[j] * (p[i] + p[j]) * ov[i, j] ** 2
                k2 += 16.0 * p[i] * p[j] * ov[i, j] ** 2
            lam1 -= 32.0 * (1.0 - p[i]) * p[i] * p[j] * (
                tri[i, i, j] - ov[i, i] * ov[i, j]
            )
            lam2 -= 32.0 * (1.0 - p[i]) * p[i] * p[j] * t2[i] * ov[i, j]
            for k in range(j + 1, n):
                if k == i:
                    continue
                lam1 += 32.0 * p[i] * p[j] * p[k] * (tri[i, j, k] - ov[i, j] * ov[i, k])
                lam2 += 32.0 * p[i] * p[j] * p[k] * ov[i, j] * ov[i, k]
    return lam1, lam2, k1, k2


def variance_leading_order(collection, params):
    """(v1_lead, v2_lead): the 1/mu parts of V1 and V2, all trace terms kept,
    only the 1/mu^2 remainders dropped."""
    lam1, lam2, _, _ = _leading_coefficients(collection, params)
    return lam1 / params.mu, lam2 / params.mu


def variance_closed_form(collection, params):
    """Untruncated variance via the exact identity
    Var = (lam1+lam2)/mu + (k1+k2)/mu^2; independent of the grid sums."""
    lam1, lam2, k1, k2 = _leading_coefficients(collection, params)
    mu = params.mu
    return {
        "lam1": lam1,
        "lam2": lam2,
        "k1": k1,
        "k2": k2,
        "v1": lam1 / mu + k1 / mu**2,
        "v2": lam2 / mu + k2 / mu**2,
        "variance": (lam1 + lam2) / mu + (k1 + k2) / mu**2,
    }


# ---------------------------------------------------------------------------
# measurement oracle


class OutcomeOracle:
    """Samples measurement outcomes of the estimator observable by dense
    eigendecomposition, caching eigensystems per count vector.

    Eigenvalues are clustered at 1e-8: the transposition averages have
    rational spectra and clustering restores exact degeneracies broken by
    floating point.
    """

    def __init__(self, collection, params):
        if collection.n_states != params.weights.size:
            raise DimensionMismatch("collection/params size mismatch")
        self.collection = collection
        self.params = params
        self._cache = {}

    def _eigensystem(self, key):
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        counts = np.asarray(key, dtype=int)
        op = block_estimator(counts, self.params, self.collection.dim)
        rho = dense_product_state(self.collection, counts)
        w, v = np.linalg.eigh(op)
        probs = np.real(np.einsum("ij,ji->i", v.conj().T @ rho, v))
        values, weights = [], []
        start = 0
        for idx in range(1, len(w) + 1):
            if idx == len(w) or w[idx] - w[start] > EIGENVALUE_CLUSTER_TOL:
                values.append(float(np.mean(w[start:idx])))
                weights.append(float(np.sum(probs[start:idx])))
                start = idx
        weights = np.clip(np.array(weights), 0.0, None)
        weights /= weights.sum()
        out = (np.array(values), weights)
        self._cache[key] = out
        return out

    def draw(self, counts, rng):
        counts = np.asarray(counts, dtype=int)
        if counts.sum() == 0:
            return 0.0
        values, weights = self._eigensystem(tuple(int(c) for c in counts))
        return float(values[rng.choice(len(values), p=weights)])


def measure_outcome(collection, counts, params, rng):
    """One draw of the estimator observable for the given counts."""
    return OutcomeOracle(collection, params).draw(counts, rng)
