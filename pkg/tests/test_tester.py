import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from qidlab import tester
from qidlab.collection import Collection, all_equal_collection, orthogonal_pure_collection
from qidlab.densmat import DensityMatrix
from qidlab.estimator import EstimatorParams
from qidlab.instances import stream


def test_required_mu_examples():
    assert tester.required_mu(0.1, 4, 1.0) == pytest.approx(160.0)
    assert tester.required_mu(0.1, 10_000, 1.0) == pytest.approx(1000.0)
    # halving theta doubles the sqrt branch and quadruples... the ratio is
    # 2 on the sqrt branch and 2 on the 16/theta branch; on a mixed pair it
    # sits in {2, 4} depending on which branch binds
    for n in (4, 10_000):
        ratio = tester.required_mu(0.05, n, 1.0) / tester.required_mu(0.1, n, 1.0)
        assert ratio in (pytest.approx(2.0), pytest.approx(4.0))


def test_delta_reductions():
    cfg = tester.TestConfig(mu_override=64.0, outcome_mode="surrogate")
    c = orthogonal_pure_collection(2)
    rng = np.random.default_rng(0)
    v = tester.identity_test_trace(c, 0.25, 2, cfg, rng)
    assert v.annotations["delta"] == pytest.approx(8 * 0.25**2 / 2)  # 0.25
    v = tester.identity_test_rank_k(c, 0.25, 1, cfg, rng)
    assert v.annotations["delta"] == pytest.approx((2 - math.sqrt(2)) ** 2)
    # ratio of rank-k delta (k=d) to trace delta is 2(2-sqrt2)^2
    ratio = (16 * tester.RANK_C**2 * 0.25**2 / 2) / (8 * 0.25**2 / 2)
    assert ratio == pytest.approx(2 * (2 - math.sqrt(2)) ** 2)
    assert "eta" in v.annotations


def test_config_validation():
    with pytest.raises(tester.TesterError):
        tester.TestConfig(repetitions=2)
    with pytest.raises(tester.TesterError):
        tester.TestConfig(outcome_mode="exact")


def _verdict(decision):
    return tester.Verdict(decision=decision, estimate=0.0, mu_used=1.0, m_total=0, threshold=0.0)


def test_amplify_rules():
    assert tester.amplify([_verdict("accept"), _verdict("accept"), _verdict("reject")]).decision == "accept"
    assert tester.amplify([_verdict("reject")] * 5).decision == "reject"
    assert tester.amplify([_verdict("accept"), _verdict("fail"), _verdict("fail")]).decision == "fail"
    assert tester.amplify([_verdict("accept"), _verdict("reject"), _verdict("fail")]).decision == "reject"
    with pytest.raises(tester.TesterError):
        tester.amplify([_verdict("accept")] * 2)


def test_amplify_majority_boost():
    # exact binomial: per-trial success 0.7 at 11 repetitions clears 0.90
    assert sps.binom.sf(5, 11, 0.7) >= 0.90
    rng = np.random.default_rng(1)
    wins = 0
    trials = 4000
    for _ in range(trials):
        verdicts = [_verdict("accept" if rng.random() < 0.7 else "reject") for _ in range(11)]
        wins += tester.amplify(verdicts).decision == "accept"
    assert wins / trials == pytest.approx(sps.binom.sf(5, 11, 0.7), abs=0.02)


def test_wrapper_requires_mu_at_least_one():
    rng = np.random.default_rng(2)
    with pytest.raises(tester.MuTooSmall):
        tester.poissonized_budget_wrapper(lambda m, r: _verdict("accept"), 0.5, rng)


def test_wrapper_fail_event_and_rates():
    rng = np.random.default_rng(3)
    for mu in (1.0, 2.0, 10.0):
        fails = 0
        trials = 100_000
        draws = rng.poisson(mu, size=trials)
        fails = int(np.sum(draws >= 2 * mu))
        exact_tail = 1.0 - sum(
            math.exp(-mu) * mu**k / math.factorial(k) for k in range(int(math.ceil(2 * mu)))
        )
        rate = fails / trials
        se = math.sqrt(exact_tail * (1 - exact_tail) / trials)
        assert rate == pytest.approx(exact_tail, abs=4 * se + 1e-4)
        assert rate <= tester.chernoff_fail_bound(mu)


@pytest.mark.xfail(
    strict=True,
    reason="exp(-mu*h(2)) bounds the 3*mu tail, not the implemented 2*mu budget; "
    "the true fail rate exceeds it at mu >= 2 (see decisions ledger)",
)
def test_wrapper_fail_rate_displayed_h2_bound():
    rng = np.random.default_rng(4)
    for mu in (1.0, 2.0, 10.0):
        draws = rng.poisson(mu, size=100_000)
        rate = float(np.mean(draws >= 2 * mu))
        assert rate <= tester.displayed_fail_bound(mu)


def test_wrapper_consistency_with_unwrapped():
    # wrapping changes the acceptance probability by at most P(M >= 2 mu)
    rng = np.random.default_rng(5)
    c = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    mu, delta = 2.0, 0.5
    cfg = tester.TestConfig(mu_override=mu, outcome_mode="surrogate")
    trials = 4000
    acc_wrapped = sum(
        tester.identity_test_hs(c, delta, cfg, stream(5, 0, t)).decision == "accept"
        for t in range(trials)
    ) / trials
    params = EstimatorParams(mu=mu, weights=c.weights)
    sampler = tester.SurrogateSampler(c, params)
    threshold = tester.ACCEPT_FRACTION * delta
    acc_unwrapped = sum(
        sampler.sample(c.draw_counts_poissonized(mu, stream(5, 1, t)), stream(5, 2, t)) < threshold
        for t in range(trials)
    ) / trials
    p_fail = 1.0 - sum(math.exp(-mu) * mu**k / math.factorial(k) for k in range(4))
    mc_slack = 3 * math.sqrt(0.25 / trials)
    assert abs(acc_wrapped - acc_unwrapped) <= p_fail + 2 * mc_slack


def test_identity_test_enormous_delta_accepts():
    rng = np.random.default_rng(6)
    cfg = tester.TestConfig(mu_override=16.0, outcome_mode="surrogate")
    v = tester.identity_test_hs(orthogonal_pure_collection(2), 1000.0, cfg, rng)
    assert v.decision == "accept"


def test_operating_characteristics_quick():
    cfg = tester.TestConfig(outcome_mode="surrogate")
    case_a = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    case_b = orthogonal_pure_collection(2)
    acc_a = acc_b = 0
    trials = 80
    for t in range(trials):
        acc_a += tester.identity_test_trace(case_a, 0.25, 2, cfg, stream(6, 0, t)).decision == "accept"
        acc_b += tester.identity_test_trace(case_b, 0.25, 2, cfg, stream(6, 1, t)).decision == "accept"
    assert acc_a / trials >= 2 / 3
    assert acc_b / trials <= 1 / 3


def test_acceptance_monotone_in_spread():
    # interpolate all-equal -> orthogonal pure; accept rate must not rise
    rng_states = orthogonal_pure_collection(2).states
    mixed = DensityMatrix.maximally_mixed(2)
    cfg = tester.TestConfig(mu_override=24.0, outcome_mode="surrogate")
    rates = []
    trials = 400
    for idx, t_mix in enumerate((0.0, 0.25, 0.5, 0.75, 1.0)):
        states = [
            DensityMatrix((1 - t_mix) * mixed.mat + t_mix * s.mat) for s in rng_states
        ]
        c = Collection([0.5, 0.5], states)
        acc = sum(
            tester.identity_test_hs(c, 0.25, cfg, stream(7, idx, t)).decision == "accept"
            for t in range(trials)
        )
        rates.append(acc / trials)
    for lo, hi in zip(rates[1:], rates[:-1]):
        assert lo <= hi + 0.02


def test_dense_vs_surrogate_gap():
    # at oracle scale the Gaussian surrogate tracks the exact outcome law
    c = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    rates = {}
    for mode in ("dense", "surrogate"):
        cfg = tester.TestConfig(mu_override=2.5, outcome_mode=mode)
        acc = sum(
            tester.identity_test_hs(c, 0.5, cfg, stream(8, mode == "dense", t)).decision == "accept"
            for t in range(600)
        )
        rates[mode] = acc / 600
    gap = abs(rates["dense"] - rates["surrogate"])
    print(f"oracle-vs-surrogate acceptance gap: {gap:.4f} ({rates})")
    assert gap <= 0.12


class _StubSampler:
    """Black-box outcome sampler: fixed weights, constant outcome."""

    def __init__(self, weights, value):
        self.weights = np.asarray(weights)
        self.value = value

    def sample(self, counts, rng):
        return self.value


def test_black_box_sampler_mode():
    rng = np.random.default_rng(10)
    cfg = tester.TestConfig(mu_override=16.0)
    low = tester.identity_test_hs(_StubSampler([0.5, 0.5], 0.01), 0.5, cfg, rng)
    assert low.decision == "accept"
    high = tester.identity_test_hs(_StubSampler([0.5, 0.5], 0.9), 0.5, cfg, rng)
    assert high.decision == "reject"


def test_auto_mode_picks_dense_at_oracle_scale():
    c = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    params = EstimatorParams(mu=2.0, weights=c.weights)
    assert isinstance(tester._make_sampler(c, params, "auto"), tester.DenseSampler)
    params = EstimatorParams(mu=64.0, weights=c.weights)
    assert isinstance(tester._make_sampler(c, params, "auto"), tester.SurrogateSampler)


def test_verdict_json_round_trip():
    rng = np.random.default_rng(9)
    cfg = tester.TestConfig(repetitions=3, mu_override=16.0, outcome_mode="surrogate")
    v = tester.identity_test_trace(orthogonal_pure_collection(2), 0.25, 2, cfg, rng)
    doc = json.loads(v.to_json())
    assert doc["decision"] in ("accept", "reject", "fail")
    assert len(doc["repetitions"]) == 3
    assert doc["mode"] == "trace"


def test_wilson_interval():
    lo, hi = tester.wilson_interval(190, 200)
    assert 0.90 < lo < 0.95 < hi <= 1.0
    assert tester.wilson_interval(0, 0) == (0.0, 1.0)
