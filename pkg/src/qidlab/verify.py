"""Named invariant checks behind the `verify` subcommand.

Each check is a fast, seeded verification of one of the package's standing
invariants; `run_checks` returns machine-readable results and the CLI maps
any failure to a nonzero exit.  A mutation hook (scaling one covariance
primitive) exists so the harness can prove these checks have teeth.
"""

import math

import numpy as np

from . import divergences as dv
from . import estimator as est
from . import lowerbound as lb
from . import symmetry as sym
from . import tester
from .collection import all_equal_collection, orthogonal_pure_collection
from .densmat import (
    DensityMatrix,
    Spectrum,
    haar_unitary,
    helstrom_success,
    hs_distance,
    random_state,
    rank_closeness,
    trace_distance,
)
from .instances import check_frozen_suite, frozen_suite, load_calibration, random_collection, stream

RANK_C = 2.0 - math.sqrt(2.0)

_CHECKS = []


def register(name):
    def deco(fn):
        _CHECKS.append((name, fn))
        return fn

    return deco


def _random_pair(rng, d):
    return (
        random_state(Spectrum(rng.dirichlet(np.ones(d))), rng),
        random_state(Spectrum(rng.dirichlet(np.ones(d))), rng),
    )


@register("densmat.norm_chain")
def _check_norm_chain(seed):
    rng = stream(seed, 1)
    worst = 0.0
    for _ in range(300):
        d = int(rng.integers(2, 6))
        a, b = _random_pair(rng, d)
        dtr, dhs = trace_distance(a, b), hs_distance(a, b)
        worst = max(worst, 0.5 * dhs - dtr, dtr - 0.5 * math.sqrt(d) * dhs)
    return worst <= 1e-9, f"worst slack {worst:.2e}"


@register("densmat.helstrom_optimum")
def _check_helstrom(seed):
    rng = stream(seed, 2)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 5))
        a, b = _random_pair(rng, d)
        w, v = np.linalg.eigh(a.mat - b.mat)
        best = 0.5
        for mask in range(2**d):
            proj = sum(
                np.outer(v[:, k], v[:, k].conj()) for k in range(d) if mask >> k & 1
            )
            if mask:
                val = 0.5 * float(np.real(np.trace(proj @ (a.mat - b.mat)))) + 0.5
                best = max(best, val)
        worst = max(worst, abs(best - helstrom_success(a, b)))
    return worst <= 1e-10, f"worst |exhaustive - formula| {worst:.2e}"


@register("densmat.rank_bound")
def _check_rank_bound(seed):
    rng = stream(seed, 3)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 6))
        a, b = _random_pair(rng, d)
        for k in range(1, d + 1):
            eta = rank_closeness(b, k)
            slack = trace_distance(a, b) - (math.sqrt(k) / RANK_C) * hs_distance(a, b) - eta
            worst = max(worst, slack)
    return worst <= 1e-9, f"worst slack {worst:.2e}"


@register("densmat.unitary_invariance")
def _check_unitary_invariance(seed):
    rng = stream(seed, 4)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        a, b = _random_pair(rng, d)
        u = haar_unitary(d, rng)
        au, bu = a.conjugate_by(u), b.conjugate_by(u)
        worst = max(
            worst,
            abs(trace_distance(a, b) - trace_distance(au, bu)),
            abs(hs_distance(a, b) - hs_distance(au, bu)),
        )
        c = random_state(Spectrum(rng.dirichlet(np.ones(d))), rng)
        worst = max(
            worst, trace_distance(a, b) - trace_distance(a, c) - trace_distance(c, b)
        )
    return worst <= 1e-9, f"worst violation {worst:.2e}"


@register("divergences.pinsker")
def _check_pinsker(seed):
    rng = stream(seed, 5)
    worst = 0.0
    for _ in range(2000):
        n = int(rng.integers(2, 6))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        worst = max(worst, dv.tv_distance(p, q) - math.sqrt(0.5 * dv.kl_nats(p, q)))
    return worst <= 1e-12, f"worst slack {worst:.2e}"


@register("divergences.kl_chi2")
def _check_kl_chi2(seed):
    rng = stream(seed, 6)
    worst = 0.0
    for _ in range(2000):
        n = int(rng.integers(2, 6))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        worst = max(worst, dv.kl_nats(p, q) - math.log1p(dv.chi_squared(q, p)))
    return worst <= 1e-12, f"worst slack {worst:.2e}"


@register("divergences.kl_additivity")
def _check_kl_additivity(seed):
    rng = stream(seed, 7)
    worst = 0.0
    for _ in range(200):
        factors = int(rng.integers(2, 5))
        ps, qs = [], []
        for _ in range(factors):
            n = int(rng.integers(2, 4))
            ps.append(rng.dirichlet(np.ones(n)))
            qs.append(rng.dirichlet(np.ones(n)))
        pj, qj = np.array([1.0]), np.array([1.0])
        for p, q in zip(ps, qs):
            pj = np.multiply.outer(pj, p).ravel()
            qj = np.multiply.outer(qj, q).ravel()
        total = sum(dv.kl_bits(p, q) for p, q in zip(ps, qs))
        worst = max(worst, abs(dv.kl_bits(pj, qj) - total))
    return worst <= 1e-10, f"worst |joint - sum| {worst:.2e}"


@register("divergences.poissonized_multinomial")
def _check_poiside(seed):
    rng = stream(seed, 8)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        p = rng.dirichlet(np.ones(n))
        mu = float(rng.uniform(0.5, 4.0))
        counts = rng.integers(0, 6, size=n)
        total = int(counts.sum())
        lhs = dv.poisson_pmf(mu, total) * dv.multinomial_pmf(counts, p, total)
        rhs = math.prod(dv.poisson_pmf(p[i] * mu, counts[i]) for i in range(n))
        worst = max(worst, abs(lhs - rhs))
    return worst <= 1e-12, f"worst |lhs - rhs| {worst:.2e}"


@register("collection.spread_inequalities")
def _check_spread_ineq(seed):
    rng = stream(seed, 9)
    worst_basic = worst_rank = 0.0
    for _ in range(300):
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 5))
        c = random_collection(d, n, rng)
        mtr, mhs = c.mean_trace_distance(), math.sqrt(c.mean_sq_hs_distance())
        worst_basic = max(worst_basic, mtr - math.sqrt(d) / (2 * math.sqrt(2)) * mhs)
        bar = c.average_state()
        for k in range(1, d + 1):
            eta = rank_closeness(bar, k)
            worst_rank = max(
                worst_rank, mtr - math.sqrt(k) / (RANK_C * math.sqrt(2)) * mhs - eta
            )
    ok = worst_basic <= 1e-10 and worst_rank <= 1e-10
    return ok, f"worst basic {worst_basic:.2e}, worst rank {worst_rank:.2e}"


@register("collection.dual_form")
def _check_dual_form(seed):
    rng = stream(seed, 10)
    for _ in range(100):
        c = random_collection(int(rng.integers(2, 5)), int(rng.integers(2, 5)), rng)
        c.mean_sq_hs_distance()  # raises FormMismatch beyond 1e-8
    equal = all_equal_collection(np.full(3, 1 / 3), DensityMatrix.maximally_mixed(2))
    ok = equal.mean_trace_distance() == 0.0 and equal.mean_sq_hs_distance() == 0.0
    return ok, "pairwise and average forms agree; all-equal spread is exactly 0"


@register("symmetry.block_identity")
def _check_block_identity(seed):
    worst = 0.0
    for d, l in ((2, 2), (2, 3), (2, 4), (2, 5), (3, 3), (3, 4)):
        avg = sym.transposition_average(d, l)
        acc = np.zeros_like(avg)
        for lam in sym.partitions(l, d):
            acc += sym.avg_transposition_eigenvalue(lam) * sym.young_projector(lam, d)
        worst = max(worst, float(np.abs(avg - acc).max()))
    return worst <= 1e-9, f"worst operator max-norm error {worst:.2e}"


@register("symmetry.measure_consistency")
def _check_measure_consistency(seed):
    rng = stream(seed, 11)
    worst = 0.0
    for d, l in ((2, 2), (2, 3), (2, 4), (3, 3)):
        rho = random_state(Spectrum(rng.dirichlet(np.ones(d))), rng)
        big = np.eye(1, dtype=complex)
        for _ in range(l):
            big = np.kron(big, rho.mat)
        for lam in sym.partitions(l, d):
            proj = sym.young_projector(lam, d)
            got = float(np.real(np.trace(proj @ big)))
            want = sym.schur_weyl_pmf(l, rho.spectrum(), lam)
            worst = max(worst, abs(got - want))
    return worst <= 1e-9, f"worst |trace - pmf| {worst:.2e}"


@register("symmetry.nested_commutation")
def _check_nested_commutation(seed):
    worst = 0.0
    for d, splits in ((2, (3, 2)), (2, (2, 2)), (3, (2, 2))):
        l = sum(splits)
        for lam in sym.partitions(l, d):
            glob = sym.young_projector(lam, d)
            for combo in _local_combos(splits, d):
                loc = np.eye(1)
                for ll in combo:
                    loc = np.kron(loc, sym.young_projector(ll, d))
                comm = glob @ loc - loc @ glob
                worst = max(worst, float(np.abs(comm).max()))
    return worst <= 1e-9, f"worst commutator {worst:.2e}"


def _local_combos(splits, d):
    import itertools

    choices = [sym.partitions(m, d) for m in splits]
    return itertools.product(*choices)


@register("estimator.unbiasedness")
def _check_unbiasedness(seed):
    worst = 0.0
    for name, coll in frozen_suite():
        mhs = coll.mean_sq_hs_distance()
        for mu in (1.0, 2.0, 4.0):
            mean = est.estimator_mean(coll, est.EstimatorParams(mu=mu, weights=coll.weights))
            worst = max(worst, abs(mean - mhs))
    return worst <= 1e-8, f"worst |mean - target| {worst:.2e}"


@register("estimator.primitive_oracle")
def _check_primitive_oracle(seed):
    rng = stream(seed, 12)
    d = 2
    coll = random_collection(d, 3, rng)
    ov, tri = coll.overlap_tables()
    worst = 0.0
    cases = [
        ("var_ii", np.array([3, 0, 0]), (0,), (0, 0)),
        ("var_ij", np.array([2, 3, 0]), (0, 1), (0, 1)),
        ("cov_ii_ij", np.array([3, 2, 0]), (0, 1), None),
        ("cov_ij_ik", np.array([2, 1, 2]), (0, 1, 2), None),
    ]
    for kind, counts, idx, _ in cases:
        closed = est.covariance_primitive(kind, counts, idx, ov, tri)
        rho = est.dense_product_state(coll, counts)
        if kind == "var_ii":
            a = b = est.block_transposition_avg(0, 0, counts, d)
        elif kind == "var_ij":
            a = b = est.block_transposition_avg(0, 1, counts, d)
        elif kind == "cov_ii_ij":
            a = est.block_transposition_avg(0, 0, counts, d)
            b = est.block_transposition_avg(0, 1, counts, d)
        else:
            a = est.block_transposition_avg(0, 1, counts, d)
            b = est.block_transposition_avg(0, 2, counts, d)
        dense = est.dense_covariance(a, b, rho)
        worst = max(worst, abs(closed - dense))
    return worst <= 1e-9, f"worst |closed - dense| {worst:.2e}"


@register("estimator.variance_identity")
def _check_variance_identity(seed):
    rng = stream(seed, 13)
    worst = 0.0
    for _ in range(5):
        coll = random_collection(2, int(rng.integers(2, 4)), rng)
        mu = float(rng.uniform(1.5, 6.0))
        params = est.EstimatorParams(mu=mu, weights=coll.weights)
        rep = est.variance_exact(coll, params)
        closed = est.variance_closed_form(coll, params)
        worst = max(worst, abs(rep.variance - closed["variance"]))
    return worst <= 1e-7, f"worst |grid - closed| {worst:.2e}"


@register("estimator.variance_bound")
def _check_variance_bound(seed):
    cal = load_calibration()
    worst = -math.inf
    for name, coll in frozen_suite():
        mhs = coll.mean_sq_hs_distance()
        for mu in (1.0, 2.0, 4.0):
            rep = est.variance_exact(coll, est.EstimatorParams(mu=mu, weights=coll.weights))
            bound = cal["variance_C"] * coll.n_states / mu**2 + 16.0 * mhs / mu
            worst = max(worst, rep.variance - bound)
    return worst <= 1e-9, f"worst variance - bound {worst:.2e}"


@register("tester.wrapper_tail")
def _check_wrapper_tail(seed):
    rng = stream(seed, 14)
    ok = True
    details = []
    for mu in (1.0, 2.0, 10.0):
        draws = rng.poisson(mu, size=20000)
        rate = float(np.mean(draws >= 2 * mu))
        bound = tester.chernoff_fail_bound(mu)
        ok = ok and rate <= bound
        details.append(f"mu={mu}: rate {rate:.4f} <= bound {bound:.4f}")
    return ok, "; ".join(details)


@register("tester.operating_characteristics")
def _check_operating(seed):
    cfg = tester.TestConfig(outcome_mode="surrogate")
    case_a = all_equal_collection(np.full(2, 0.5), DensityMatrix.maximally_mixed(2))
    case_b = orthogonal_pure_collection(2)
    acc_a = acc_b = 0
    trials = 60
    for t in range(trials):
        va = tester.identity_test_trace(case_a, 0.25, 2, cfg, stream(seed, 15, 0, t))
        vb = tester.identity_test_trace(case_b, 0.25, 2, cfg, stream(seed, 15, 1, t))
        acc_a += va.decision == "accept"
        acc_b += vb.decision == "accept"
    ok = acc_a / trials >= 2 / 3 and acc_b / trials <= 1 / 3
    return ok, f"case-A accept {acc_a}/{trials}, case-B accept {acc_b}/{trials}"


@register("lowerbound.tv_grid")
def _check_tv_grid(seed):
    worst = -math.inf
    for n in (2, 4):
        for eps in (0.05, 0.1):
            for total in range(0, 5):
                tv = lb.trace_distance_AB(2, n, eps, total)
                worst = max(worst, tv - lb.tv_bound(2, n, eps, total))
    return worst <= 1e-12, f"worst tv - bound {worst:.2e}"


@register("lowerbound.chi2_grid")
def _check_chi2_grid(seed):
    worst = -math.inf
    for d in (2, 4):
        for eps in (0.05, 0.1):
            for n in range(1, 9):
                lhs, rhs = lb.chi2_sw_bound_check(n, d, eps)
                worst = max(worst, lhs - rhs)
    return worst <= 0.0, f"worst lhs - rhs {worst:.2e}"


@register("lowerbound.witness")
def _check_witness(seed):
    rng = stream(seed, 16)
    worst = -math.inf
    for _ in range(20):
        inst = lb.sample_hard_collection(2, 10, 0.05, rng)
        estimate, unhalved, _ = lb.farness_witness_estimate(inst)
        worst = max(worst, estimate - unhalved)
    return worst <= 1e-9, f"worst estimate - bound {worst:.2e}"


@register("instances.frozen_hashes")
def _check_frozen_hashes(seed):
    mismatches = check_frozen_suite()
    return not mismatches, f"{len(mismatches)} hash mismatches"


def run_checks(seed=0, name_filter=None, mutate=None):
    """Run the registered checks; returns a list of result dicts."""
    if mutate:
        est._MUTATION_SCALES[mutate] = 1.001
    try:
        results = []
        for name, fn in _CHECKS:
            if name_filter and name_filter not in name:
                continue
            try:
                ok, detail = fn(seed)
            except Exception as exc:  # a crash is a failure, not an abort
                ok, detail = False, f"exception: {exc!r}"
            results.append({"name": name, "ok": bool(ok), "detail": detail})
        return results
    finally:
        if mutate:
            est._MUTATION_SCALES.pop(mutate, None)
