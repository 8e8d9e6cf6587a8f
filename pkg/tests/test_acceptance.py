"""Acceptance criteria 1-10, one test each, each printing a pass/fail line."""

import csv
import json
import math
import time

import numpy as np
import pytest

from otsr import cli
from otsr.core import cost_lattice1d, make_probvec
from otsr.pipeline import (
    SYNTHETIC_DEFAULTS,
    MultiBandImage,
    blob_patch,
    classify,
    classify_naive,
    synthetic_set,
    write_manifest,
)
from otsr.simulate import noise_bench, sparse_retrieval_bruteforce
from otsr.sinkhorn import SinkhornConfig, grad_wrt_first, sinkhorn
from otsr.solver import SIMULATION_DEFAULTS, SolverConfig, sparse_approx
from otsr.topology import h0_rank

from invariants import trace_violations
from oracles import union_find_components
from report import SOLVER_LOG, record
from support_cases import constructed_case, random_cases

SIM_FLAGS = ["--epsilon", "0.1", "--step-cap", "0.01", "--initial-step", "0.01",
             "--max-steps", "50", "--sinkhorn-iters", "5000"]


def _demo_final(tmp_path, lam):
    out = tmp_path / f"demo_{lam}.csv"
    t0 = time.perf_counter()
    code = cli.main(["demo1d", "--lambda", str(lam), "--output", str(out)] + SIM_FLAGS)
    elapsed = time.perf_counter() - t0
    with open(out) as f:
        last = list(csv.reader(f))[-1]
    return code, np.array(last[1:11], dtype=float), elapsed


def test_criterion_01_golden_two_peaks(tmp_path):
    target = np.zeros(10)
    target[0], target[7] = 0.35, 0.65
    code, final, elapsed = _demo_final(tmp_path, 10)
    err = float(np.abs(final - target).max())
    ok = code == 0 and err <= 0.02 and elapsed < 30
    record(1, "demo1d lambda=10 two-peak approximation", ok,
           f"final={np.round(final, 4).tolist()} max|err|={err:.4f} (tol 0.02) time={elapsed:.1f}s (<30s)")
    assert ok


def test_criterion_02_golden_point_mass(tmp_path):
    target = np.eye(10)[7]
    code, final, elapsed = _demo_final(tmp_path, 100)
    err = float(np.abs(final - target).max())
    ok = code == 0 and err <= 0.01 and elapsed < 30
    record(2, "demo1d lambda=100 point mass at position 8", ok,
           f"max|err|={err:.2e} (tol 0.01) time={elapsed:.1f}s (<30s)")
    assert ok


def test_criterion_03_sinkhorn_oracle_gap():
    t0 = time.perf_counter()
    rows = cli.oracle_rows(10, 200, 0.01, seed=2024)
    elapsed = time.perf_counter() - t0
    gap_bad = [r for r in rows if r[5] > 2 * 0.01 * math.log(r[1]) + 1e-6]
    lp_err = max(abs(r[3] - r[4]) for r in rows)
    ok = not gap_bad and lp_err <= 1e-9 and elapsed < 60 and max(r[1] for r in rows) <= 10
    record(3, "Sinkhorn vs exact transport, 200 instances, eps=0.01", ok,
           f"gap violations={len(gap_bad)} max gap={max(r[5] for r in rows):.2e} "
           f"max|1d-LP|={lp_err:.1e} (tol 1e-9) time={elapsed:.1f}s (<60s)")
    assert ok


def _fd_instances(count=50, n=6, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        mu = make_probvec(rng.uniform(0.2, 1.0, n))
        nu = make_probvec(rng.uniform(0.2, 1.0, n))
        d = rng.standard_normal(n)
        d -= d.mean()
        yield mu, nu, d / np.abs(d).max()


FD_CFG = SinkhornConfig(epsilon=0.1, max_iter=500_000, tol=1e-10)
FD_STEP = 1e-5


def _fd_errors(value):
    cost = cost_lattice1d(6)
    errs_plus, errs_minus = [], []
    for mu, nu, d in _fd_instances():
        r = sinkhorn(mu, nu, cost, FD_CFG)
        assert r.marginal_error < 1e-9
        g = grad_wrt_first(r, mu, require_converged=False)
        f = lambda x: value(sinkhorn(x, nu, cost, FD_CFG))
        fd = (f(mu + FD_STEP * d) - f(mu - FD_STEP * d)) / (2 * FD_STEP)
        scale = max(abs(fd), 1e-12)
        errs_plus.append(abs(float(g @ d) - fd) / scale)
        errs_minus.append(abs(-float(g @ d) - fd) / scale)
    return np.array(errs_plus), np.array(errs_minus)


def test_criterion_04_gradient_matches_transport_cost_differences():
    plus, minus = _fd_errors(lambda r: r.distance)
    sign = "+" if np.median(plus) < np.median(minus) else "-"
    ok = bool(np.all(plus < 1e-2))
    record(4, "potential vs finite differences of the transport cost sum C*P", ok,
           f"sign {sign}eps*log f fits better; max rel err={plus.max():.3f} "
           f"median={np.median(plus):.3f} (tol 1e-2, 50 instances, n=6, eps=0.1)")
    assert ok


def test_criterion_04_companion_gradient_of_regularized_cost():
    plus, minus = _fd_errors(lambda r: r.regularized_cost)
    ok = bool(np.all(plus < 1e-2)) and bool(np.all(minus > 1e-2))
    record("4b", "potential vs finite differences of the regularized cost", ok,
           f"+eps*log f max rel err={plus.max():.2e}; -eps*log f min rel err={minus.min():.2f} "
           "(tol 1e-2, 50 instances)")
    assert ok


def test_criterion_05_noise_bound_monte_carlo():
    d, sigma, n, k, trials = 2, 0.5, 10, 3, 1000
    t0 = time.perf_counter()
    rows = noise_bench(d, sigma, n, k, trials, seed=7)
    elapsed = time.perf_counter() - t0
    N = n * k
    bounds = np.array([r[1] for r in rows])
    exact = np.array([r[2] for r in rows])
    var_target = 2 * d * sigma**4 / N
    se = math.sqrt(var_target / trials)
    mean_ok = abs(bounds.mean() - d * sigma**2) <= 3 * se
    var_ok = abs(bounds.var(ddof=1) - var_target) <= 0.2 * var_target
    dom = int(np.sum(bounds >= exact - 1e-12))
    ok = mean_ok and var_ok and dom == trials and elapsed < 300
    record(5, "Gaussian noise transport bound", ok,
           f"mean={bounds.mean():.4f} (0.5 +/- {3 * se:.4f}) var={bounds.var(ddof=1):.5f} "
           f"({var_target:.5f} +/- 20%) bound>=exact {dom}/{trials} time={elapsed:.1f}s (<300s)")
    assert ok


def test_criterion_06_support_recovery():
    t0 = time.perf_counter()
    cases = [constructed_case()] + random_cases(20, seed=0)
    hits = 0
    for nu, nubar, delta in cases:
        out = sparse_retrieval_bruteforce(nubar, cost_lattice1d(nu.size), delta)
        hits += bool(np.array_equal(out > 0, nu > 0))
    elapsed = time.perf_counter() - t0
    ok = hits == len(cases) and elapsed < 120
    record(6, "brute-force sparse retrieval identifies the support", ok,
           f"{hits}/{len(cases)} supports recovered time={elapsed:.1f}s (<120s)")
    assert ok


def test_criterion_07_solver_invariants():
    nu = make_probvec([0.2, 0.15, 0, 0, 0, 0.1, 0.15, 0.2, 0.15, 0.1])
    traces = [sparse_approx(nu, cost_lattice1d(10, 2), SIMULATION_DEFAULTS.with_(lam=lam))
              for lam in (0.0, 10.0, 100.0)]
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(2, 10))
        w = rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.8)
        if w.sum() == 0:
            w[0] = 1
        cfg = SolverConfig(lam=float(rng.choice([0.0, 0.5, 5.0, 50.0])), max_steps=15,
                           sinkhorn=SinkhornConfig(epsilon=float(rng.choice([0.1, 0.5, 1.0])),
                                                   max_iter=2000))
        traces.append(sparse_approx(make_probvec(w), cost_lattice1d(n, float(rng.choice([1, 2]))), cfg))
    for img, _ in synthetic_set(4, m=10, seed=5):
        classify(img, SYNTHETIC_DEFAULTS)
    own = sum(len(trace_violations(t)) for t in traces)
    session = sum(len(v) for v in SOLVER_LOG)
    ok = own == 0 and session == 0
    record(7, "solver invariants (monotone J, simplex, shrinking support)", ok,
           f"violations={own + session} over {len(SOLVER_LOG)} traces recorded so far")
    assert ok


def test_criterion_08_topology_vs_union_find():
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(1000):
        mask = rng.uniform(size=(8, 8)) < rng.uniform(0.1, 0.7)
        for conn in (4, 8):
            mismatches += h0_rank(mask, conn) != union_find_components(mask.tolist(), conn)
    ok = mismatches == 0
    record(8, "h0_rank vs union-find on 1000 random 8x8 images", ok,
           f"mismatches={mismatches} (both connectivities, exact)")
    assert ok


def _accuracy(records, truth):
    return float(np.mean([r.label == t for r, t in zip(records, truth)]))


@pytest.mark.slow
def test_criterion_09_synthetic_classification():
    clean = synthetic_set(40, m=16, noise=0.02, seed=9)
    salty = synthetic_set(40, m=16, noise=0.02, salt=0.03, salt_level=0.85, seed=9)
    truth = [s for _, s in clean]
    acc_clean = _accuracy([classify(img, SYNTHETIC_DEFAULTS) for img, _ in clean], truth)
    acc_salty = _accuracy([classify(img, SYNTHETIC_DEFAULTS) for img, _ in salty], truth)
    acc_naive = _accuracy([classify_naive(img) for img, _ in salty], truth)
    drop = acc_salty - acc_naive
    ok = acc_clean >= 0.95 and drop >= 0.20
    record(9, "synthetic star-cluster classification", ok,
           f"sparse clean={acc_clean:.3f} (>=0.95); salt noise: sparse={acc_salty:.3f} "
           f"naive={acc_naive:.3f} gap={drop:.3f} (>=0.20)")
    assert ok


def _run_twice(tmp_path, argv_for, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}"
        code = cli.main(argv_for(str(path)))
        stdout = capsys.readouterr().out
        outs.append((code, path.read_bytes(), stdout))
    return outs[0] == outs[1] and outs[0][0] == 0


def test_criterion_10_cli_determinism(tmp_path, capsys):
    images = [MultiBandImage("one", (blob_patch(8, [(3.5, 3.5)], 1.0),), ("V",)),
              MultiBandImage("two", (blob_patch(8, [(1, 1), (6, 6)], 1.0),), ("V",))]
    manifest = write_manifest(images, tmp_path / "data")
    commands = {
        "demo1d": lambda o: ["demo1d", "--output", o],
        "classify": lambda o: ["classify", "--input", manifest, "--output", o, "--epsilon", "1"],
        "classify-naive": lambda o: ["classify-naive", "--input", manifest, "--output", o],
        "noise-bench": lambda o: ["noise-bench", "--trials", "200", "--seed", "3", "--output", o],
        "oracle-check": lambda o: ["oracle-check", "--instances", "40", "--seed", "3", "--output", o],
    }
    same = {name: _run_twice(tmp_path / name.replace("-", "_"), argv, capsys)
            for name, argv in commands.items()
            if not (tmp_path / name.replace("-", "_")).mkdir()}
    ok = all(same.values())
    record(10, "CLI output byte-identical across runs", ok,
           ", ".join(f"{k}={'same' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok
