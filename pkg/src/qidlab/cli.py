"""Reproducible experiment harness.

Subcommands: verify, estimate, test, sweep, lowerbound, calibrate.
One JSON config per run (flags override fields); every RNG stream derives
from the master seed via SeedSequence spawn keys; outputs are UTF-8 CSV
('\n' endings, schema id + config hash in a comment line) and JSONL, byte
identical for identical (config, seed).
"""

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import __version__, lowerbound as lb, tester, verify
from .collection import all_equal_collection, orthogonal_pure_collection, Collection
from .densmat import DensityMatrix
from .estimator import EstimatorParams, variance_exact
from .instances import (
    FROZEN_MUS,
    frozen_suite,
    load_calibration,
    make_instance,
    stream,
    tetrahedral_collection,
)

SCHEMAS = {
    "estimate": "qidlab.estimate.v1",
    "test_summary": "qidlab.test_summary.v1",
    "sweep": "qidlab.sweep.v1",
    "sweep_fit": "qidlab.sweep_fit.v1",
    "lowerbound": "qidlab.lowerbound.v1",
}

DEFAULT_CONFIG = {
    "seed": 20240901,
    "workers": 1,
    "estimate": {"mus": list(FROZEN_MUS), "truncation": 1e-12},
    "test": {
        "epsilon": 0.25,
        "d": 2,
        "Ns": [2, 4],
        "trials": 200,
        "repetitions": 1,
        "mode": "trace",
    },
    "sweep": {
        "Ns": [2, 4, 8, 16],
        "ds": [2, 4],
        "epsilon": 0.25,
        "trials": 300,
        "target": 0.75,
        "bisection_steps": 11,
    },
    "lowerbound": {
        "ds": [2],
        "Ns": [2, 4, 16],
        "epsilons": [0.05, 0.1],
        "max_M": 6,
        "chi2_max_n": 8,
        "far_trials": 2000,
        "far_N": 10,
        "far_epsilon": 0.05,
        "witness_samples": 20,
    },
}


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def _config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_csv(path, schema, config_hash, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# schema={SCHEMAS[schema]} config={config_hash} version={__version__}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def _merge(base, override):
    out = dict(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(args):
    config = DEFAULT_CONFIG
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            config = _merge(config, json.load(f))
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["workers"] = args.workers
    return config


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args, config):
    results = verify.run_checks(
        seed=config["seed"], name_filter=args.filter, mutate=args.mutate
    )
    failures = [r for r in results if not r["ok"]]
    for r in results:
        print(("PASS" if r["ok"] else "FAIL"), r["name"].ljust(40), r["detail"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump({"failures": failures, "results": results}, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{len(results) - len(failures)}/{len(results)} checks passed")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(args, config):
    cal = load_calibration()
    chash = _config_hash(config)
    rows = []
    for name, coll in frozen_suite():
        mhs = coll.mean_sq_hs_distance()
        for mu in config["estimate"]["mus"]:
            params = EstimatorParams(mu=float(mu), weights=coll.weights)
            rep = variance_exact(coll, params, config["estimate"]["truncation"])
            bound = cal["variance_C"] * coll.n_states / mu**2 + 16.0 * mhs / mu
            rows.append(
                (
                    name,
                    mu,
                    rep.mean,
                    mhs,
                    rep.variance,
                    rep.v1,
                    rep.v2,
                    bound,
                    rep.truncation_mass,
                )
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "estimate.csv",
        "estimate",
        chash,
        ["instance", "mu", "mean", "m_hs_sq", "variance", "v1", "v2", "bound_rhs", "truncation_mass"],
        rows,
    )
    print(f"wrote {out / 'estimate.csv'} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# test


def _case_collections(d, n, master_seed):
    case_a = all_equal_collection(np.full(n, 1.0 / n), DensityMatrix.maximally_mixed(d))
    if n <= d:
        case_b = orthogonal_pure_collection(d, n)
    elif d == 2 and n == 4:
        case_b = tetrahedral_collection()
    else:
        rng = stream(master_seed, 900, d, n)
        states = [DensityMatrix.pure(
            rng.standard_normal(d) + 1j * rng.standard_normal(d)
        ) for _ in range(n)]
        case_b = Collection(np.full(n, 1.0 / n), states)
    return case_a, case_b


def _run_test_trials(payload):
    case_json, mode, epsilon, d, reps, master_seed, case_idx, lo, hi = payload
    coll = Collection.from_json(case_json)
    cfg = tester.TestConfig(repetitions=reps, outcome_mode="surrogate")
    records = []
    for t in range(lo, hi):
        rng = stream(master_seed, 300, case_idx, t)
        verdict = tester.identity_test_trace(coll, epsilon, d, cfg, rng)
        records.append(
            (
                t,
                {
                    "trial": t,
                    "case": case_idx,
                    "decision": verdict.decision,
                    "estimate": verdict.estimate,
                    "mu": verdict.mu_used,
                    "M": verdict.m_total,
                    "threshold": verdict.threshold,
                },
                verdict.decision,
            )
        )
    return records


def cmd_test(args, config):
    tc = config["test"]
    chash = _config_hash(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    jsonl_path = out / "test.jsonl"
    workers = config["workers"]
    with open(jsonl_path, "w", encoding="utf-8", newline="\n") as jf:
        case_idx = 0
        for n in tc["Ns"]:
            case_a, case_b = _case_collections(tc["d"], n, config["seed"])
            for label, coll in (("A", case_a), ("B", case_b)):
                payloads = []
                trials = tc["trials"]
                chunk = max(1, trials // max(workers, 1))
                for lo in range(0, trials, chunk):
                    payloads.append(
                        (
                            coll.to_json(),
                            tc["mode"],
                            tc["epsilon"],
                            tc["d"],
                            tc["repetitions"],
                            config["seed"],
                            case_idx,
                            lo,
                            min(lo + chunk, trials),
                        )
                    )
                if workers > 1:
                    with ProcessPoolExecutor(max_workers=workers) as pool:
                        chunks = list(pool.map(_run_test_trials, payloads))
                else:
                    chunks = [_run_test_trials(p) for p in payloads]
                records = sorted(
                    (rec for ch in chunks for rec in ch), key=lambda r: r[0]
                )
                for _, doc, _ in records:
                    doc["case_label"] = f"{label}_N{n}"
                    jf.write(json.dumps(doc, sort_keys=True) + "\n")
                verdict_stats = tester.accept_rate(
                    [_FakeVerdict(decision) for _, _, decision in records]
                )
                mu = tester.required_mu(
                    8 * tc["epsilon"] ** 2 / tc["d"], n, tester.DEFAULT_B_CONST
                )
                summary_rows.append(
                    (
                        f"{label}_N{n}",
                        tc["d"],
                        n,
                        tc["epsilon"],
                        8 * tc["epsilon"] ** 2 / tc["d"],
                        tc["mode"],
                        verdict_stats["trials"],
                        verdict_stats["accepts"],
                        verdict_stats["rejects"],
                        verdict_stats["fails"],
                        verdict_stats["accept_rate"],
                        verdict_stats["wilson_lo"],
                        verdict_stats["wilson_hi"],
                        mu,
                    )
                )
                case_idx += 1
    write_csv(
        out / "test_summary.csv",
        "test_summary",
        chash,
        [
            "case", "d", "N", "epsilon", "delta", "mode", "trials", "accepts",
            "rejects", "fails", "accept_rate", "wilson_lo", "wilson_hi", "mu",
        ],
        summary_rows,
    )
    print(f"wrote {jsonl_path} and {out / 'test_summary.csv'}")
    return 0


class _FakeVerdict:
    def __init__(self, decision):
        self.decision = decision


# ---------------------------------------------------------------------------
# sweep


def _sweep_success(d, n, epsilon, mu, trials, master_seed, tag):
    """min(case-A accept rate, case-B reject rate) at forced mu."""
    case_a, case_b = _case_collections(d, n, master_seed)
    cfg = tester.TestConfig(mu_override=mu, outcome_mode="surrogate")
    acc_a = rej_b = 0
    for t in range(trials):
        va = tester.identity_test_trace(case_a, epsilon, d, cfg, stream(master_seed, 400, tag, 0, t))
        vb = tester.identity_test_trace(case_b, epsilon, d, cfg, stream(master_seed, 400, tag, 1, t))
        acc_a += va.decision == "accept"
        rej_b += vb.decision != "accept"
    return min(acc_a / trials, rej_b / trials)


def _minimal_mu(d, n, epsilon, sw, master_seed, cell_tag):
    delta = 8 * epsilon**2 / d
    lo, hi = 1.0, 4.0 * tester.required_mu(delta, n, 8.0)
    # make sure the bracket actually brackets
    for step in range(sw["bisection_steps"]):
        mid = math.sqrt(lo * hi)
        succ = _sweep_success(
            d, n, epsilon, mid, sw["trials"], master_seed, (cell_tag, step)
        )
        if succ >= sw["target"]:
            hi = mid
        else:
            lo = mid
    return hi


def cmd_sweep(args, config):
    sw = config["sweep"]
    chash = _config_hash(config)
    cells = []
    for d in sw["ds"]:
        for n in sw["Ns"]:
            tag = len(cells)
            mu_min = _minimal_mu(d, n, sw["epsilon"], sw, config["seed"], tag)
            succ = _sweep_success(
                d, n, sw["epsilon"], mu_min, sw["trials"], config["seed"], (tag, 99)
            )
            cells.append((d, n, sw["epsilon"], "trace", sw["target"], sw["trials"], mu_min, succ))
    fit_rows = []
    for d in sw["ds"]:
        xs = np.log([c[1] for c in cells if c[0] == d])
        ys = np.log([c[6] for c in cells if c[0] == d])
        fit = sps.linregress(xs, ys)
        fit_rows.append(("N", f"d={d}", fit.slope, fit.stderr, fit.intercept, len(xs)))
    for n in sw["Ns"]:
        xs = np.log([c[0] for c in cells if c[1] == n])
        ys = np.log([c[6] for c in cells if c[1] == n])
        if len(xs) >= 2:
            fit = sps.linregress(xs, ys)
            stderr = 0.0 if math.isnan(fit.stderr) else fit.stderr
            fit_rows.append(("d", f"N={n}", fit.slope, stderr, fit.intercept, len(xs)))
    for axis in ("N", "d"):
        slopes = [r[2] for r in fit_rows if r[0] == axis]
        if slopes:
            fit_rows.append(
                (axis, "aggregate", float(np.mean(slopes)),
                 float(np.std(slopes) / math.sqrt(len(slopes))) if len(slopes) > 1 else 0.0,
                 math.nan, len(slopes))
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "sweep.csv",
        "sweep",
        chash,
        ["d", "N", "epsilon", "mode", "target", "trials", "mu_min", "success_at_mu_min"],
        cells,
    )
    write_csv(
        out / "sweep_fit.csv",
        "sweep_fit",
        chash,
        ["axis", "fixed", "slope", "stderr", "intercept", "npoints"],
        fit_rows,
    )
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep_fit.csv'}")
    for r in fit_rows:
        print(f"  slope vs {r[0]} ({r[1]}): {r[2]:.4f} +- {r[3]:.4f}")
    return 0


# ---------------------------------------------------------------------------
# lowerbound


def cmd_lowerbound(args, config):
    lc = config["lowerbound"]
    chash = _config_hash(config)
    rows = []
    for d in lc["ds"]:
        for n in lc["Ns"]:
            for eps in lc["epsilons"]:
                for total in range(0, lc["max_M"] + 1):
                    lhs = lb.trace_distance_AB(d, n, eps, total)
                    rhs = lb.tv_bound(d, n, eps, total)
                    rows.append(("tv", d, n, eps, total, lhs, rhs, rhs - lhs))
    for d in lc["ds"]:
        for eps in lc["epsilons"]:
            for n_copies in range(1, lc["chi2_max_n"] + 1):
                lhs, rhs = lb.chi2_sw_bound_check(n_copies, d, eps)
                rows.append(("chi2", d, math.nan, eps, n_copies, lhs, rhs, rhs - lhs))
    rng = stream(config["seed"], 500)
    freq = lb.far_probability(
        lc["ds"][0], lc["far_N"], lc["far_epsilon"], lc["far_trials"], rng
    )
    sigma = math.sqrt(11 / 15 * (1 - 11 / 15) / lc["far_trials"])
    rows.append(
        ("far", lc["ds"][0], lc["far_N"], lc["far_epsilon"], lc["far_trials"],
         freq, 11 / 15 - 3 * sigma, freq - (11 / 15 - 3 * sigma))
    )
    for k in range(lc["witness_samples"]):
        inst = lb.sample_hard_collection(
            lc["ds"][0], lc["far_N"], lc["far_epsilon"], stream(config["seed"], 501, k)
        )
        est_val, unhalved, _ = lb.farness_witness_estimate(inst)
        rows.append(
            ("witness", lc["ds"][0], lc["far_N"], lc["far_epsilon"], k,
             est_val, unhalved, unhalved - est_val)
        )
    # headline lower-bound values for the grid
    for d in lc["ds"]:
        for n in lc["Ns"]:
            for eps in lc["epsilons"]:
                rows.append(
                    ("headline_bound", d, n, eps, math.nan,
                     lb.sample_lower_bound(d, n, eps), lb.two_state_lower_bound(d, eps),
                     math.nan)
                )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "lowerbound.csv",
        "lowerbound",
        chash,
        ["kind", "d", "N", "epsilon", "M", "lhs", "rhs", "slack"],
        rows,
    )
    neg = [r for r in rows if r[0] in ("tv", "chi2", "far", "witness") and r[7] < -1e-12]
    print(f"wrote {out / 'lowerbound.csv'} ({len(rows)} rows, {len(neg)} negative slacks)")
    return 1 if neg else 0


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args, config):
    worst = 0.0
    for name, coll in frozen_suite():
        mhs = coll.mean_sq_hs_distance()
        for mu in FROZEN_MUS:
            rep = variance_exact(coll, EstimatorParams(mu=float(mu), weights=coll.weights))
            worst = max(worst, (rep.variance - 16.0 * mhs / mu) * mu**2 / coll.n_states)
    # The exact mu^-2 coefficient is 8(N-1) <= 8N, so 8 dominates any sweep;
    # a sweep maximum above 8 would signal a regression.
    variance_c = max(8.0, math.ceil(worst * 10) / 10)
    doc = {
        "variance_C": variance_c,
        "b_const": variance_c,
        "suite_max_C": round(worst, 10),
        "note": "variance bound constant: Var <= C*N/mu^2 + 16*MHS^2/mu; the exact mu^-2 "
        "coefficient is 8(N-1), so C=8 is tight over all N; suite_max_C is the largest "
        "value observed on the frozen suite",
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "calibration.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    print(f"wrote {out / 'calibration.json'}: C={variance_c}, suite max {worst:.6f}")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(prog="qidlab", description=__doc__)
    parser.add_argument("--config", type=str, default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    parser.add_argument("--workers", type=int, default=None, help="worker pool size")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--filter", type=str, default=None, help="substring filter")
    p_verify.add_argument(
        "--mutate", type=str, default=None,
        help="mutation-test mode: scale one covariance primitive (e.g. cov_ii_ij)",
    )
    sub.add_parser("estimate", help="estimator moment table over the frozen suite")
    sub.add_parser("test", help="identity-test operating characteristics")
    sub.add_parser("sweep", help="minimal-mu scaling study")
    sub.add_parser("lowerbound", help="lower-bound ledgers")
    sub.add_parser("calibrate", help="fit and freeze the variance constant")

    args = parser.parse_args(argv)
    config = load_config(args)
    handlers = {
        "verify": cmd_verify,
        "estimate": cmd_estimate,
        "test": cmd_test,
        "sweep": cmd_sweep,
        "lowerbound": cmd_lowerbound,
        "calibrate": cmd_calibrate,
    }
    return handlers[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
