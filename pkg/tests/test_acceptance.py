"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in an "acceptance criteria" section at the end of the run.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from mukit.cli import main
from mukit.constructions import (
    build_index_encoding,
    exact_relu_oracle,
    gen_near_orthogonal,
    gen_weighted_hypercube,
    perturbed_relu_oracle,
    recover_bits,
    reduction_gap,
)
from mukit.core import relu_loss
from mukit.datagen import SyntheticSpec
from mukit.experiment import (
    APPR_LOWER,
    APPR_UPPER,
    EXACT_FULL,
    EXACT_SKETCHED,
    ExperimentConfig,
    rows_to_csv,
    run_experiment,
)
from mukit.lowrank import additive_bound, loss_gap, tightness_ratio, truncated_svd
from mukit.mu_exact import compute_mu_exact
from mukit.mu_oracle import mu_bruteforce
from mukit.mu_sketch import min_neg_mass_orthants, solve_min_neg_mass


def _elapsed(start):
    return time.perf_counter() - start


def test_criterion_1_exact_matches_bruteforce(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, verdicts, done = 0.0, 0, 0
    while done < 200:
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        A = rng.integers(-5, 6, (n, d)).astype(float)
        if not np.any(A):
            continue  # mu is undefined for the zero matrix
        done += 1
        exact = compute_mu_exact(A).mu
        brute = mu_bruteforce(A).mu
        if math.isinf(exact) != math.isinf(brute):
            verdicts += 1
        elif math.isfinite(exact):
            worst = max(worst, abs(exact - brute) / brute)
    elapsed = _elapsed(start)
    passed = verdicts == 0 and worst <= 1e-6 and elapsed < 30
    record_criterion(
        1, "exact LP vs brute force", passed,
        f"200 instances, finiteness mismatches={verdicts}, max rel err={worst:.2e}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_2_weighted_hypercube(record_criterion):
    start = time.perf_counter()
    max_mu, min_ratio = 0.0, np.inf
    for k in (2, 3, 4):
        for seed in range(10):
            inst = gen_weighted_hypercube(k, seed)
            max_mu = max(max_mu, compute_mu_exact(inst.X, inst.y).mu)
            betas = np.random.default_rng(1000 * k + seed).standard_normal((1000, k))
            relu = np.maximum(betas @ inst.X.T, 0.0).sum(axis=1)
            min_ratio = min(min_ratio, float(np.min(relu / np.abs(betas).sum(axis=1))))
    elapsed = _elapsed(start)
    passed = max_mu <= 4 + 1e-6 and min_ratio >= 3.0 and elapsed < 60
    record_criterion(
        2, "weighted hypercube mu <= 4 and ReLU >= 3 l1", passed,
        f"max mu={max_mu:.4f}, min ReLU/l1={min_ratio:.4f}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_3_logistic_to_relu(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst_scaled, worst_final = 0.0, 0.0
    for _ in range(50):
        n, d = int(rng.integers(2, 41)), int(rng.integers(1, 6))
        X = rng.standard_normal((n, d)) * rng.uniform(0.1, 5.0)
        betas = rng.standard_normal((100, d))
        for t in (10.0, 1e2, 1e3, 1e4):
            for beta in betas:
                gap = reduction_gap(X, beta, t)
                worst_scaled = max(worst_scaled, gap * t / n)
                if t == 1e4:
                    worst_final = max(worst_final, gap / n)
    elapsed = _elapsed(start)
    passed = worst_scaled <= 1.0 and worst_final <= 1e-3 and elapsed < 60
    record_criterion(
        3, "|L(t beta)/t - R(beta)| <= n/t", passed,
        f"max gap*t/n={worst_scaled:.4f}, max gap/n at t=1e4={worst_final:.2e}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_4_index_bit_recovery(record_criterion):
    start = time.perf_counter()
    n, h = 256, 128
    acc_exact, acc_noisy, sep_exact, sep_noisy, cases = 1.0, 1.0, np.inf, np.inf, True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        M = gen_near_orthogonal(h, 2401, tau_ip=4 * math.log2(n) ** 2, seed=seed)
        inst = build_index_encoding(rng.integers(0, 2, h), M)
        idx = rng.choice(h, size=32, replace=False)
        exact = recover_bits(inst, idx, exact_relu_oracle(inst))
        noisy = recover_bits(inst, idx, perturbed_relu_oracle(inst, seed))
        acc_exact = min(acc_exact, exact.accuracy)
        acc_noisy = min(acc_noisy, noisy.accuracy)
        sep_exact = min(sep_exact, exact.separation)
        sep_noisy = min(sep_noisy, noisy.separation)
        cases &= exact.cases_hold
    elapsed = _elapsed(start)
    passed = acc_exact == 1.0 and acc_noisy == 1.0 and min(sep_exact, sep_noisy) >= 2.0 and elapsed < 300
    record_criterion(
        4, "INDEX bit recovery at n=256", passed,
        f"accuracy exact={acc_exact:.0%} noisy={acc_noisy:.0%}, min separation exact={sep_exact:.2f} "
        f"noisy={sep_noisy:.2f}, row cases hold={cases}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_5_index_mu_bound(record_criterion):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        M = gen_near_orthogonal(8, 8, seed=seed)
        inst = build_index_encoding(rng.integers(0, 2, 8), M, mu_weight=0.05)
        assert inst.X.shape == (16, 9)
        worst = max(worst, compute_mu_exact(inst.X).mu)
    elapsed = _elapsed(start)
    passed = worst <= 1 / 0.05 + 1e-6 and elapsed < 10
    record_criterion(5, "INDEX instance mu <= 1/mu_weight", passed, f"max mu={worst:.9f} vs 20, {elapsed:.2f}s")
    assert passed


def test_criterion_6_spectral_perturbation_bound(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    violations, worst = 0, 0.0
    for _ in range(500):
        n, d = int(rng.integers(2, 61)), int(rng.integers(1, 11))
        X = rng.standard_normal((n, d)) * rng.uniform(0.1, 10.0)
        r = int(rng.integers(0, min(n, d)))
        Xt = truncated_svd(X, r).X_tilde
        beta = rng.standard_normal(d) * rng.uniform(0.1, 5.0)
        gap, bound = loss_gap(X, Xt, beta), additive_bound(X, Xt, beta)
        violations += gap > bound
        worst = max(worst, gap / bound)
    elapsed = _elapsed(start)
    passed = violations == 0 and elapsed < 60
    record_criterion(
        6, "|dL| <= sqrt(n) ||X - X~||_2 ||beta||_2", passed,
        f"500 trials, violations={violations}, max gap/bound={worst:.4f}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_7_bound_is_tight(record_criterion):
    start = time.perf_counter()
    ratios = {n: tightness_ratio(n, 30.0, 0.5) for n in (1, 4, 16)}
    elapsed = _elapsed(start)
    passed = min(ratios.values()) >= 1 - 1e-6 and elapsed < 5
    detail = ", ".join(f"n={n}: 1-ratio={1 - r:.1e}" for n, r in ratios.items())
    record_criterion(7, "scaled identity attains the bound", passed, f"{detail}, {elapsed:.3f}s")
    assert passed


@pytest.mark.slow
def test_criterion_8_desk_scale_experiment(record_criterion):
    start = time.perf_counter()
    d = 20
    cfg = ExperimentConfig(
        n_primes=(128, 256, 512), seeds=tuple(range(20)), synthetic=SyntheticSpec(n=2000, d=d, seed=0)
    )
    rows = run_experiment(cfg)
    elapsed = _elapsed(start)
    assert all(r.ok for r in rows)
    full = next(r.mu_value for r in rows if r.method == EXACT_FULL)
    cells = {}
    for r in rows:
        if r.method != EXACT_FULL:
            cells.setdefault((r.n_prime, r.seed), {})[r.method] = r.mu_value
    contained = sum(c[APPR_LOWER] <= full <= c[APPR_UPPER] for c in cells.values())
    frac = contained / len(cells)
    log_err = float(np.median([abs(math.log(c[EXACT_SKETCHED]) - math.log(full)) for c in cells.values()]))
    min_ratio = min(c[APPR_UPPER] / c[APPR_LOWER] for c in cells.values())
    ok_a, ok_b, ok_c = frac >= 0.8, log_err <= math.log(2), min_ratio >= d
    passed = ok_a and ok_b and ok_c and elapsed < 600
    record_criterion(
        8, "desk-scale sketch experiment", passed,
        f"exact mu={full:.4f}; (a) containment {contained}/{len(cells)} {'ok' if ok_a else 'FAIL'}; "
        f"(b) median |log ratio|={log_err:.3f} vs {math.log(2):.3f} {'ok' if ok_b else 'FAIL'}; "
        f"(c) min upper/lower={min_ratio:.1f} {'ok' if ok_c else 'FAIL'}; {elapsed:.0f}s",
    )
    assert passed


def _orthant_reference(U):
    """min over sign patterns of an LP in (beta, b), solved with HiGHS."""
    n, d = U.shape
    best = np.inf
    for signs in itertools.product((1.0, -1.0), repeat=d):
        s = np.array(signs)
        c = np.concatenate([np.zeros(d), np.ones(n)])
        A_ub = np.hstack([-U, -np.eye(n)])
        A_eq = np.concatenate([s, np.zeros(n)])[None, :]
        bounds = [(0, None) if si > 0 else (None, 0) for si in s] + [(0, None)] * n
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
        assert res.status == 0
        best = min(best, res.fun)
    return best


def test_criterion_9_milp_matches_orthant_enumeration(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_ref, worst_own = 0.0, 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 51)), int(rng.integers(1, 4))
        U = rng.standard_normal((n, d))
        t = solve_min_neg_mass(U).t
        worst_ref = max(worst_ref, abs(t - _orthant_reference(U)))
        worst_own = max(worst_own, abs(t - min_neg_mass_orthants(U).t))
    elapsed = _elapsed(start)
    passed = max(worst_ref, worst_own) <= 1e-8 and elapsed < 60
    record_criterion(
        9, "MILP t equals orthant enumeration", passed,
        f"100 instances, max |diff| vs HiGHS={worst_ref:.1e}, vs own orthant LPs={worst_own:.1e}, {elapsed:.1f}s",
    )
    assert passed


def test_criterion_10_seeded_pipelines_are_deterministic(record_criterion, tmp_path, capsys):
    start = time.perf_counter()
    data = tmp_path / "data.csv"
    pipelines = {
        "gen-data": lambda out: ["gen-data", "--n", "300", "--d", "4", "--seed", "11", "--output", out],
        "mu-exact": lambda out: ["mu-exact", "--input", str(data), "--output", out],
        "mu-approx": lambda out: ["mu-approx", "--input", str(data), "--n-prime", "40", "--seed", "2", "--output", out],
        "lowrank": lambda out: ["lowrank", "--input", str(data), "--rank", "2", "--seed", "3", "--output", out],
        "verify-constructions": lambda out: ["verify-constructions", "--seed", "1", "--output", out],
        "experiment csv": lambda out: [
            "experiment", "--input", str(data), "--n-prime", "24,48", "--seeds", "0-3", "--output", out,
        ],
        "experiment synthetic json": lambda out: [
            "experiment", "--n", "400", "--d", "5", "--data-seed", "2", "--n-prime", "32",
            "--seeds", "0-2", "--format", "json", "--output", out,
        ],
        "experiment threads": lambda out: [
            "experiment", "--input", str(data), "--n-prime", "24,48", "--seeds", "0-3", "--output", out,
            "--threads", "1" if out.endswith("a") else "3",
        ],
    }
    assert main(pipelines["gen-data"](str(data))) == 0
    mismatched = []
    for name, make in pipelines.items():
        a, b = str(tmp_path / f"{name}.a"), str(tmp_path / f"{name}.b")
        assert main(make(a)) == 0
        assert main(make(b)) == 0
        if open(a, "rb").read() != open(b, "rb").read():
            mismatched.append(name)
    capsys.readouterr()
    elapsed = _elapsed(start)
    passed = not mismatched
    record_criterion(
        10, "byte-identical reruns", passed,
        f"{len(pipelines)} pipelines, mismatches={mismatched or 'none'}, {elapsed:.1f}s",
    )
    assert passed
