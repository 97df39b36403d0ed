"""Accept/reject identity tests built on the spread estimator.

A test draws Poissonized counts through a 2*mu copy-budget wrapper, obtains
one estimator outcome per repetition (dense eigensampling at oracle scale,
or a Gaussian surrogate matching the exact conditional mean and variance),
and accepts when the median estimate falls below 0.995 of the threshold.

The surrogate keeps Monte Carlo sweeps cheap: the first two conditional
moments are exactly those of the true outcome law, which is all the
Chebyshev-style analysis of the tester uses.  The dense and surrogate modes
are compared head to head in the test suite.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collection import Collection
from .estimator import OPERATOR_DIM_CAP, EstimatorParams, OutcomeOracle

RANK_C = 2.0 - math.sqrt(2.0)
ACCEPT_FRACTION = 0.995
DEFAULT_B_CONST = 1.0


class TesterError(ValueError):
    pass


class MuTooSmall(TesterError):
    pass


@dataclass
class TestConfig:
    """Knobs of one identity test run."""

    repetitions: int = 1
    mu_override: float | None = None
    b_const: float = DEFAULT_B_CONST
    outcome_mode: str = "auto"  # auto | surrogate | dense

    def __post_init__(self):
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise TesterError("repetitions must be odd and >= 1")
        if self.outcome_mode not in ("auto", "surrogate", "dense"):
            raise TesterError(f"unknown outcome mode {self.outcome_mode!r}")


@dataclass
class Verdict:
    decision: str  # accept | reject | fail
    estimate: float
    mu_used: float
    m_total: int
    threshold: float
    repetitions_detail: list = field(default_factory=list)
    annotations: dict = field(default_factory=dict)

    def to_json(self):
        doc = {
            "decision": self.decision,
            "estimate": self.estimate,
            "mu": self.mu_used,
            "m_total": self.m_total,
            "threshold": self.threshold,
            "repetitions": self.repetitions_detail,
        }
        doc.update(self.annotations)
        return json.dumps(doc, sort_keys=True)


def required_mu(theta, n_states, b_const=DEFAULT_B_CONST):
    """Poissonization mean sufficient to resolve the threshold theta:
    max(sqrt(b_const * N)/theta, 16/theta)."""
    if theta <= 0:
        raise TesterError("theta must be positive")
    return max(math.sqrt(b_const * n_states) / theta, 16.0 / theta)


def chernoff_fail_bound(mu):
    """Valid Cramer-Chernoff bound for the wrapper fail event M >= 2*mu:
    exp(-mu*h(1)) with h(x) = (1+x)ln(1+x) - x."""
    h1 = 2.0 * math.log(2.0) - 1.0
    return math.exp(-mu * h1)


def displayed_fail_bound(mu):
    """exp(-mu*h(2)); the tail value displayed alongside the wrapper analysis
    (it bounds the 3*mu threshold, not the implemented 2*mu one)."""
    h2 = 3.0 * math.log(3.0) - 2.0
    return math.exp(-mu * h2)


# ---------------------------------------------------------------------------
# outcome samplers


class SurrogateSampler:
    """Gaussian outcome surrogate: conditional mean plus centered noise with
    the exact intra-measurement variance."""

    def __init__(self, collection, params):
        self.weights = params.weights
        self.params = params
        self._ov, self._tri = collection.overlap_tables()

    def sample(self, counts, rng):
        mean, var = kernels.count_stats(
            np.asarray(counts, dtype=float),
            self.weights,
            self.params.mu,
            self._ov,
            self._tri,
        )
        return float(mean[0] + math.sqrt(max(var[0], 0.0)) * rng.standard_normal())


class DenseSampler:
    """Exact outcome sampler via eigendecomposition (oracle scale)."""

    def __init__(self, collection, params):
        self.weights = params.weights
        self._oracle = OutcomeOracle(collection, params)

    def sample(self, counts, rng):
        return self._oracle.draw(counts, rng)


def _make_sampler(target, params, mode):
    if not isinstance(target, Collection):
        return target  # caller-provided black-box sampler
    if mode == "dense":
        return DenseSampler(target, params)
    if mode == "surrogate":
        return SurrogateSampler(target, params)
    budget = int(math.ceil(2 * params.mu))
    if target.dim**budget <= OPERATOR_DIM_CAP:
        return DenseSampler(target, params)
    return SurrogateSampler(target, params)


# ---------------------------------------------------------------------------
# the tests


def poissonized_budget_wrapper(test, mu, rng, budget=None):
    """Draw M ~ Poi(mu); fail when M >= budget (default 2*mu), else run
    test(M, rng).  Requires mu >= 1."""
    if mu < 1.0:
        raise MuTooSmall(f"mu={mu} below the wrapper's mu >= 1 requirement")
    budget = 2.0 * mu if budget is None else budget
    m_total = int(rng.poisson(mu))
    if m_total >= budget:
        return Verdict(
            decision="fail",
            estimate=math.nan,
            mu_used=mu,
            m_total=m_total,
            threshold=math.nan,
        )
    return test(m_total, rng)


def _one_repetition(sampler, params, threshold, rng):
    def run(m_total, rng_inner):
        counts = rng_inner.multinomial(m_total, params.weights)
        estimate = sampler.sample(counts, rng_inner)
        decision = "accept" if estimate < threshold else "reject"
        return Verdict(
            decision=decision,
            estimate=estimate,
            mu_used=params.mu,
            m_total=m_total,
            threshold=threshold,
        )

    return poissonized_budget_wrapper(run, params.mu, rng)


def amplify(verdicts):
    """Majority vote over an odd number of verdicts; fail only when more
    than half failed.  Ties between accept and reject resolve to reject."""
    if len(verdicts) % 2 == 0:
        raise TesterError("need an odd number of verdicts")
    n_fail = sum(v.decision == "fail" for v in verdicts)
    n_accept = sum(v.decision == "accept" for v in verdicts)
    n_reject = sum(v.decision == "reject" for v in verdicts)
    if n_fail > len(verdicts) / 2:
        decision = "fail"
    elif n_accept > n_reject:
        decision = "accept"
    else:
        decision = "reject"
    estimates = [v.estimate for v in verdicts if not math.isnan(v.estimate)]
    estimate = float(np.median(estimates)) if estimates else math.nan
    return Verdict(
        decision=decision,
        estimate=estimate,
        mu_used=verdicts[0].mu_used,
        m_total=sum(v.m_total for v in verdicts),
        threshold=verdicts[0].threshold,
        repetitions_detail=[
            {"decision": v.decision, "estimate": v.estimate, "M": v.m_total}
            for v in verdicts
        ],
    )


def identity_test_hs(target, delta, cfg, rng):
    """Accept when the collection behind `target` looks identical at squared
    Hilbert-Schmidt spread threshold delta (accept iff median estimate
    < 0.995*delta)."""
    if delta <= 0:
        raise TesterError("delta must be positive")
    weights = target.weights
    n_states = len(weights)
    mu = cfg.mu_override or required_mu(delta, n_states, cfg.b_const)
    params = EstimatorParams(mu=mu, weights=np.asarray(weights, dtype=float))
    sampler = _make_sampler(target, params, cfg.outcome_mode)
    threshold = ACCEPT_FRACTION * delta
    verdicts = [
        _one_repetition(sampler, params, threshold, rng)
        for _ in range(cfg.repetitions)
    ]
    out = amplify(verdicts)
    out.annotations["delta"] = delta
    out.annotations["mode"] = "hs"
    return out


def identity_test_trace(target, epsilon, d, cfg, rng):
    """Trace-distance flavored test: delegates at delta = 8 eps^2 / d."""
    if not 0 < epsilon < 1:
        raise TesterError("epsilon must lie in (0, 1)")
    out = identity_test_hs(target, 8.0 * epsilon**2 / d, cfg, rng)
    out.annotations["mode"] = "trace"
    out.annotations["epsilon"] = epsilon
    return out


def identity_test_rank_k(target, epsilon, k, cfg, rng):
    """Low-rank refinement: delta = 16 (2-sqrt 2)^2 eps^2 / k; when the
    target is a known collection the verdict carries eta, the distance of
    the average state from rank k."""
    if k < 1:
        raise TesterError("k must be >= 1")
    out = identity_test_hs(target, 16.0 * RANK_C**2 * epsilon**2 / k, cfg, rng)
    out.annotations["mode"] = "rank_k"
    out.annotations["epsilon"] = epsilon
    out.annotations["k"] = k
    if isinstance(target, Collection):
        from .densmat import rank_closeness

        out.annotations["eta"] = rank_closeness(target.average_state(), k)
        out.annotations["mean_trace_distance"] = target.mean_trace_distance()
        out.annotations["mean_sq_hs_distance"] = target.mean_sq_hs_distance()
    return out


# ---------------------------------------------------------------------------
# reporting helpers


def wilson_interval(successes, trials, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def accept_rate(verdicts):
    n = len(verdicts)
    acc = sum(v.decision == "accept" for v in verdicts)
    lo, hi = wilson_interval(acc, n)
    return {
        "trials": n,
        "accepts": acc,
        "rejects": sum(v.decision == "reject" for v in verdicts),
        "fails": sum(v.decision == "fail" for v in verdicts),
        "accept_rate": acc / n if n else math.nan,
        "wilson_lo": lo,
        "wilson_hi": hi,
    }
