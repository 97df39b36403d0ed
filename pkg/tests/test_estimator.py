import itertools
import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from qidlab import estimator as est
from qidlab.collection import Collection, all_equal_collection, orthogonal_pure_collection
from qidlab.densmat import DensityMatrix
from qidlab.instances import random_collection


def orth2():
    return orthogonal_pure_collection(2)


def params_for(c, mu):
    return est.EstimatorParams(mu=mu, weights=c.weights)


# ---------------------------------------------------------------------------
# block operators


def test_block_transposition_avg_within_block_is_swap():
    op = est.block_transposition_avg(0, 0, [2, 0], 2)
    swap = np.zeros((4, 4))
    swap[[0, 1, 2, 3], [0, 2, 1, 3]] = 1.0
    assert np.allclose(op, swap)


def test_block_transposition_avg_across_blocks_is_swap():
    op = est.block_transposition_avg(0, 1, [1, 1], 2)
    swap = np.zeros((4, 4))
    swap[[0, 1, 2, 3], [0, 2, 1, 3]] = 1.0
    assert np.allclose(op, swap)


def test_block_transposition_avg_expectation_is_overlap():
    rng = np.random.default_rng(0)
    for _ in range(10):
        c = random_collection(2, 2, rng)
        counts = np.array([int(rng.integers(1, 4)), int(rng.integers(1, 4))])
        op = est.block_transposition_avg(0, 1, counts, 2)
        rho = est.dense_product_state(c, counts)
        ov, _ = c.overlap_tables()
        assert est.dense_expectation(op, rho) == pytest.approx(ov[0, 1], abs=1e-12)


def test_block_transposition_avg_guards():
    with pytest.raises(est.TooFewCopies):
        est.block_transposition_avg(0, 0, [1, 2], 2)
    with pytest.raises(est.TooLarge):
        est.block_transposition_avg(0, 1, [6, 6], 2)


def test_block_estimator_zero_counts():
    p = params_for(orth2(), 2.0)
    assert np.allclose(est.block_estimator([0, 0], p, 2), np.zeros((1, 1)))


def test_block_estimator_hand_value():
    # N=2 uniform, mu=2, counts (2,2), orthogonal pure states: trace is 2
    c = orth2()
    p = params_for(c, 2.0)
    op = est.block_estimator([2, 2], p, 2)
    assert op.shape == (16, 16)
    assert np.abs(op - op.T).max() < 1e-10  # Hermitian (real symmetric here)
    rho = est.dense_product_state(c, [2, 2])
    assert est.dense_expectation(op, rho) == pytest.approx(2.0, abs=1e-12)
    assert est.conditional_mean(c, [2, 2], p) == pytest.approx(2.0, abs=1e-12)


def test_block_estimator_equal_states_matches_formula_not_zero():
    # with all states equal the conditional mean is NOT identically zero;
    # it only vanishes after Poisson averaging
    c = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    p = params_for(c, 1.0)
    op = est.block_estimator([1, 1], p, 2)
    rho = est.dense_product_state(c, [1, 1])
    got = est.dense_expectation(op, rho)
    assert got == pytest.approx(-4.0 * 0.5, abs=1e-12)  # -4 Tr[rho^2]/mu^2
    assert est.conditional_mean(c, [1, 1], p) == pytest.approx(got, abs=1e-12)


# ---------------------------------------------------------------------------
# conditional moments


def test_conditional_mean_orthogonal_singletons():
    c = orth2()
    p = params_for(c, 1.0)
    assert est.conditional_mean(c, [1, 1], p) == pytest.approx(0.0, abs=1e-14)


def test_conditional_mean_matches_dense_on_random_instances():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n = int(rng.integers(2, 4))
        c = random_collection(2, n, rng)
        p = params_for(c, float(rng.uniform(0.8, 3.0)))
        counts = rng.integers(0, 4, size=n)
        if 2 ** counts.sum() > 1024:
            continue
        if counts.sum() == 0:
            want = 0.0
        else:
            op = est.block_estimator(counts, p, 2)
            rho = est.dense_product_state(c, counts)
            want = est.dense_expectation(op, rho)
        assert est.conditional_mean(c, counts, p) == pytest.approx(want, abs=1e-11)


def test_conditional_mean_permutation_invariance():
    rng = np.random.default_rng(2)
    c = random_collection(2, 3, rng)
    p = params_for(c, 2.0)
    counts = np.array([3, 1, 2])
    base = est.conditional_mean(c, counts, p)
    for perm in itertools.permutations(range(3)):
        cp = Collection(c.weights[list(perm)], [c.states[i] for i in perm])
        pp = est.EstimatorParams(mu=2.0, weights=cp.weights)
        assert est.conditional_mean(cp, counts[list(perm)], pp) == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# covariance primitives


def test_primitive_examples():
    pure = all_equal_collection([0.5, 0.5], DensityMatrix.basis_state(2, 0))
    ov, tri = pure.overlap_tables()
    assert est.covariance_primitive("var_ii", [2, 0], (0,), ov, tri) == pytest.approx(0.0, abs=1e-12)
    mixed = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    ov, tri = mixed.overlap_tables()
    assert est.covariance_primitive("var_ii", [2, 0], (0,), ov, tri) == pytest.approx(0.75)
    assert est.covariance_primitive("var_ij", [1, 1], (0, 1), ov, tri) == pytest.approx(0.75)
    assert est.covariance_primitive("cov_disjoint", [1, 1, 1, 1], (0, 1, 2, 3), ov, tri) == 0.0


def test_primitive_errors():
    mixed = all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2))
    ov, tri = mixed.overlap_tables()
    with pytest.raises(est.BadKind):
        est.covariance_primitive("nope", [2, 2], (0,), ov, tri)
    with pytest.raises(est.TooFewCopies):
        est.covariance_primitive("var_ii", [1, 1], (0,), ov, tri)


def test_primitives_match_dense_oracle_random():
    rng = np.random.default_rng(3)
    c = random_collection(2, 3, rng)
    ov, tri = c.overlap_tables()
    cases = [
        ("var_ii", np.array([4, 0, 0]), (0,), lambda m: (("O", 0, 0), ("O", 0, 0))),
        ("var_ij", np.array([3, 2, 0]), (0, 1), lambda m: (("O", 0, 1), ("O", 0, 1))),
        ("cov_ii_ij", np.array([2, 2, 0]), (0, 1), lambda m: (("O", 0, 0), ("O", 0, 1))),
        ("cov_ij_ik", np.array([2, 2, 1]), (0, 1, 2), lambda m: (("O", 0, 1), ("O", 0, 2))),
    ]
    for kind, counts, idx, ops in cases:
        (_, a1, a2), (_, b1, b2) = ops(counts)
        op_a = est.block_transposition_avg(a1, a2, counts, 2)
        op_b = est.block_transposition_avg(b1, b2, counts, 2)
        rho = est.dense_product_state(c, counts)
        dense = est.dense_covariance(op_a, op_b, rho)
        assert est.covariance_primitive(kind, counts, idx, ov, tri) == pytest.approx(dense, abs=1e-9)


def test_disjoint_blocks_have_zero_covariance():
    rng = np.random.default_rng(4)
    c = random_collection(2, 4, rng)
    counts = np.array([2, 2, 2, 2])
    op_a = est.block_transposition_avg(0, 1, counts, 2)
    op_b = est.block_transposition_avg(2, 3, counts, 2)
    rho = est.dense_product_state(c, counts)
    assert est.dense_covariance(op_a, op_b, rho) == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------------------
# Poissonized moments


def test_estimator_mean_all_equal_is_zero():
    c = all_equal_collection([0.3, 0.7], DensityMatrix.diagonal([0.8, 0.2]))
    for mu in (1.0, 2.0, 4.0):
        assert abs(est.estimator_mean(c, params_for(c, mu))) < 1e-8


def test_estimator_mean_orthogonal_pure():
    c = orth2()
    for mu in (1.0, 2.0, 4.0):
        assert est.estimator_mean(c, params_for(c, mu)) == pytest.approx(1.0, abs=1e-8)


def test_estimator_mean_cross_module():
    c = Collection(
        np.full(3, 1 / 3),
        [DensityMatrix.basis_state(2, 0), DensityMatrix.basis_state(2, 1), DensityMatrix.maximally_mixed(2)],
    )
    want = c.mean_sq_hs_distance()
    assert est.estimator_mean(c, params_for(c, 2.0)) == pytest.approx(want, abs=1e-8)


def test_truncation_guard():
    c = orth2()
    with pytest.raises(est.TruncationTooLoose):
        est.estimator_mean(c, params_for(c, 1.0), truncation=1e-6)


def test_variance_exact_matches_dense_oracle_same_grid():
    # closed-form per-count sums vs dense tensor sums over the same grid;
    # the grid is restricted to d^M <= 1024 so both sides are computable
    rng = np.random.default_rng(5)
    for c, mu in ((all_equal_collection([0.5, 0.5], DensityMatrix.maximally_mixed(2)), 1.5),
                  (orth2(), 2.0),
                  (random_collection(2, 2, rng), 1.5)):
        p = params_for(c, mu)
        ov, tri = c.overlap_tables()
        mhs = c.mean_sq_hs_distance()
        from qidlab.divergences import poisson_cdf_table, poisson_cutoff

        cuts = [min(poisson_cutoff(w * mu, 1e-13), 5) for w in c.weights]
        v1_closed = v1_dense = v2_closed = v2_dense = 0.0
        from qidlab import kernels

        for counts in itertools.product(*[range(cu + 1) for cu in cuts]):
            weight = math.prod(
                poisson_cdf_table(c.weights[i] * mu, cuts[i])[counts[i]] for i in range(2)
            )
            mean_k, var_k = kernels.count_stats(np.array(counts, dtype=float), c.weights, mu, ov, tri)
            v1_closed += weight * var_k[0]
            v2_closed += weight * (mean_k[0] - mhs) ** 2
            if sum(counts) == 0:
                gd, vd = 0.0, 0.0
            else:
                op = est.block_estimator(np.array(counts), p, 2)
                rho = est.dense_product_state(c, np.array(counts))
                gd = est.dense_expectation(op, rho)
                vd = est.dense_expectation(op @ op, rho) - gd**2
            v1_dense += weight * vd
            v2_dense += weight * (gd - mhs) ** 2
        assert v1_closed == pytest.approx(v1_dense, abs=1e-8)
        assert v2_closed == pytest.approx(v2_dense, abs=1e-8)


def test_variance_exact_report_fields():
    c = orth2()
    rep = est.variance_exact(c, params_for(c, 2.0))
    assert rep.variance == pytest.approx(rep.v1 + rep.v2, abs=1e-12)
    assert rep.variance >= -1e-9
    assert rep.truncation_mass >= 1 - 1e-10
    doc = json.loads(rep.to_json())
    assert set(doc) == {
        "mean", "variance", "v1", "v2", "truncation_mass", "mu", "instance_hash", "cutoffs",
    }
    assert doc["instance_hash"]


def test_variance_matches_closed_form_identity():
    rng = np.random.default_rng(6)
    for _ in range(5):
        c = random_collection(2, int(rng.integers(2, 4)), rng)
        mu = float(rng.uniform(1.0, 8.0))
        rep = est.variance_exact(c, params_for(c, mu))
        cf = est.variance_closed_form(c, params_for(c, mu))
        assert rep.variance == pytest.approx(cf["variance"], rel=1e-6, abs=1e-7)
        assert cf["k1"] + cf["k2"] == pytest.approx(8.0 * (c.n_states - 1), abs=1e-9)


def test_variance_large_mu_leading_term_one_sided():
    # mu * Var approaches its leading coefficient, which never exceeds
    # 16 * spread; check the bound with 15% headroom at mu = 64
    rng = np.random.default_rng(7)
    c = random_collection(2, 2, rng)
    mu = 64.0
    rep = est.variance_exact(c, params_for(c, mu))
    assert mu * rep.variance <= 1.15 * 16.0 * c.mean_sq_hs_distance() + 8 * (c.n_states - 1) / mu


def test_variance_leading_order_values():
    pure_equal = all_equal_collection([0.4, 0.6], DensityMatrix.basis_state(2, 0))
    v1_lead, _ = est.variance_leading_order(pure_equal, params_for(pure_equal, 4.0))
    assert v1_lead == pytest.approx(0.0, abs=1e-12)
    # orthogonal pure uniform: every trace term with a cross overlap vanishes
    # and t3 = t2^2 = 1 kills the purity-fluctuation row, so v1_lead = 0 and
    # v2_lead = 16 sum_i p_i (1-p_i)^2 t2_i^2 / mu = 4/mu
    c = orth2()
    v1_lead, v2_lead = est.variance_leading_order(c, params_for(c, 8.0))
    assert v1_lead == pytest.approx(0.0, abs=1e-12)
    assert v2_lead == pytest.approx(4.0 / 8.0, abs=1e-12)


def test_leading_order_remainder_scales_like_inverse_mu_squared():
    rng = np.random.default_rng(8)
    c = random_collection(2, 3, rng)
    mus = np.array([8.0, 16.0, 32.0, 64.0])
    gaps = []
    for mu in mus:
        rep = est.variance_exact(c, params_for(c, float(mu)))
        v1_lead, v2_lead = est.variance_leading_order(c, params_for(c, float(mu)))
        gaps.append(abs(rep.variance - v1_lead - v2_lead))
    fit = sps.linregress(np.log(mus), np.log(gaps))
    assert fit.slope == pytest.approx(-2.0, abs=0.1)
    fitted_c = max(g * mu**2 / c.n_states for g, mu in zip(gaps, mus))
    assert all(
        g <= fitted_c * c.n_states / mu**2 + 1e-12 for g, mu in zip(gaps, mus)
    )


# ---------------------------------------------------------------------------
# measurement oracle


def test_measure_outcome_zero_counts():
    c = orth2()
    rng = np.random.default_rng(9)
    assert est.measure_outcome(c, [0, 0], params_for(c, 1.0), rng) == 0.0


def test_measure_outcome_composed_monte_carlo():
    # Poissonized counts then an outcome draw: the mean recovers the spread
    rng = np.random.default_rng(10)
    c = orth2()
    mu = 1.25
    p = params_for(c, mu)
    oracle = est.OutcomeOracle(c, p)
    rep = est.variance_exact(c, p)
    n_draws = 100_000
    draws = np.empty(n_draws)
    for k in range(n_draws):
        counts = c.draw_counts_poissonized(mu, rng)
        draws[k] = oracle.draw(counts, rng)
    mhs = c.mean_sq_hs_distance()
    se = math.sqrt(rep.variance / n_draws)
    assert draws.mean() == pytest.approx(mhs, abs=3 * se)
    assert draws.var() == pytest.approx(rep.variance, rel=0.05)


def test_measure_outcome_eigenvalue_support():
    # outcomes are eigenvalues of the block estimator
    c = orth2()
    p = params_for(c, 2.0)
    rng = np.random.default_rng(11)
    counts = np.array([2, 1])
    op = est.block_estimator(counts, p, 2)
    eigs = np.linalg.eigvalsh(op)
    for _ in range(20):
        out = est.measure_outcome(c, counts, p, rng)
        assert np.min(np.abs(eigs - out)) < 1e-7
