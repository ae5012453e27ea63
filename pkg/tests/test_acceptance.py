"""Acceptance criteria 1-9, one PASS/FAIL line each (see the terminal summary)."""

import filecmp
import math
import os
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE, crandn
from markovcs.certify import (
    brute_force_recovery,
    decomposition_error,
    dense_system_matrix,
    gamma,
    h,
    min_measurements_iid,
    min_measurements_markov,
    monte_carlo_tail,
    theta_sup_norms,
)
from markovcs.chains import (
    GridGraph,
    TransitionKernel,
    build_metropolis,
    iid_kernel,
    mix_kernel,
    simulate,
    spectral_gap,
    stationary_residual,
)
from markovcs.density import compute_density, sample_iid
from markovcs.experiment import ExperimentConfig, run_experiment
from markovcs.transforms import MeasurementSystem, dft2, dwt2, idft2, idwt2

pytestmark = pytest.mark.acceptance


def record(k, ok, seconds, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}"
    ACCEPTANCE[k] = line
    print(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_criterion_1_operators():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    ident = 0.0
    specs = ["haar:1", "haar:3", "haar:5", "db4:1", "db4:3", "haar:0"]
    for k in range(1000):
        spec = specs[k % len(specs)]
        mask = rng.choice(1024, size=int(rng.integers(1, 1025)), replace=False)
        sysm = MeasurementSystem((32, 32), spec, mask)
        x = crandn(rng, 1024)
        y = crandn(rng, sysm.m)
        lhs = np.vdot(y, sysm.forward(x))
        rhs = np.vdot(sysm.adjoint(y), x)
        worst = max(worst, rel(lhs, rhs))
        img = crandn(rng, 32, 32)
        worst = max(worst, rel(np.linalg.norm(dft2(img)), np.linalg.norm(img)))
        worst = max(worst, rel(np.linalg.norm(dwt2(img, sysm.wavelet)), np.linalg.norm(img)))
        worst = max(worst, np.abs(idft2(dft2(img)) - img).max() / np.abs(img).max())
        worst = max(worst, np.abs(idwt2(dwt2(img, sysm.wavelet), sysm.wavelet) - img).max() / np.abs(img).max())
        ident = max(ident, np.linalg.norm(sysm.forward(sysm.adjoint(y)) - y) / np.linalg.norm(y))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and ident < 1e-10 and elapsed < 10
    record(1, ok, elapsed, f"max adjoint/Parseval rel err {worst:.1e}, "
                           f"forward(adjoint) err {ident:.1e}")


def test_criterion_2_decomposition():
    start = time.perf_counter()
    errs = []
    for shape in ((1, 64), (16, 16)):
        sysm = MeasurementSystem(shape)
        d = compute_density(sysm)
        A = dense_system_matrix(sysm)
        errs.append(decomposition_error(sysm, d, A))
        errs.append(float(np.max(np.abs(theta_sup_norms(sysm, d, A) - d.L))))
    elapsed = time.perf_counter() - start
    record(2, max(errs) < 1e-10, elapsed,
           f"sum pi_i Theta_i - I and ||Theta_i|| - L: max {max(errs):.1e}")


def asymptotic_tv(kernel, m):
    """Expected TV of ergodic frequencies from the CLT variance of each indicator."""
    P = kernel.dense()
    pi = kernel.pi
    n = pi.size
    Z = np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    var = 2 * pi * np.diag(Z) - pi - pi**2
    return 0.5 * np.sum(np.sqrt(2 * np.maximum(var, 0) / (np.pi * m)))


def test_criterion_3_chains():
    start = time.perf_counter()
    d = compute_density(MeasurementSystem((16, 16)))
    base = build_metropolis(GridGraph((16, 16)), d)
    balance = base.detailed_balance_error()
    resid = max(stationary_residual(mix_kernel(base, a)) for a in (0, 0.001, 0.01, 0.1, 1))
    kernel = mix_kernel(base, 0.01)
    sites = simulate(kernel, 10**6, seed=0).sites
    tv = 0.5 * np.abs(np.bincount(sites, minlength=256) / 10**6 - d.pi).sum()
    iid_sites = sample_iid(d, 10**6, 0)
    tv_iid = 0.5 * np.abs(np.bincount(iid_sites, minlength=256) / 10**6 - d.pi).sum()
    expected = asymptotic_tv(kernel, 10**6)
    elapsed = time.perf_counter() - start
    ok = balance < 1e-12 and resid < 1e-10 and tv < 0.01 and elapsed < 60
    record(3, ok, elapsed,
           f"balance {balance:.1e}, stationarity {resid:.1e}, TV at alpha=0.01 {tv:.4f} "
           f"(CLT expectation {expected:.4f}, iid draws {tv_iid:.4f})")


def test_criterion_4_gap():
    start = time.perf_counter()
    d = compute_density(MeasurementSystem((16, 16)))
    e_iid = abs(spectral_gap(iid_kernel(d)) - 1)
    p, q = 0.3, 0.45
    two = TransitionKernel.from_matrix(np.array([[1 - p, p], [q, 1 - q]]),
                                       np.array([q, p]) / (p + q))
    e_two = abs(spectral_gap(two) - (p + q))
    slack = math.inf
    for shape in ((8, 8), (16, 16)):
        ds = compute_density(MeasurementSystem(shape))
        base = build_metropolis(GridGraph(shape), ds)
        for a in (0.0, 0.001, 0.01, 0.1, 0.5, 1.0):
            slack = min(slack, spectral_gap(mix_kernel(base, a)) - a)
    elapsed = time.perf_counter() - start
    ok = e_iid < 1e-10 and e_two < 1e-12 and slack >= -1e-10
    record(4, ok, elapsed,
           f"|gap(iid)-1| {e_iid:.1e}, |gap-(p+q)| {e_two:.1e}, min(gap-alpha) {slack:.2e}")


def test_criterion_5_tails():
    start = time.perf_counter()
    sysm = MeasurementSystem((1, 64))
    d = compute_density(sysm)
    grid = np.linspace(0.05, 1.0, 20)
    details = []
    bad = 0
    curves = [("iid", d)]
    for a in (0.5, 0.9):
        curves.append((f"markov alpha={a}",
                       mix_kernel(build_metropolis(GridGraph((1, 64)), d), a)))
    for name, gen in curves:
        # m large enough that the bounds fall below 1 somewhere on the grid
        curve = monte_carlo_tail(gen, sysm, d, 4000, grid, 2000, seed=5)
        bad += curve.violations().size
        gap = "" if curve.gap is None else f" gap {curve.gap:.3f}"
        details.append(f"{name}{gap}: {curve.violations().size} violations, "
                       f"{int(np.sum(curve.bound < 1))}/20 points with bound < 1")
    elapsed = time.perf_counter() - start
    record(5, bad == 0 and elapsed < 600, elapsed, "; ".join(details))


def test_criterion_6_theorem():
    start = time.perf_counter()
    tested = {16: 0, 32: 0}
    failures = 0
    for shape, spec, draws in (((1, 16), "haar:2", 8), ((1, 32), "haar:3", 14)):
        sysm = MeasurementSystem(shape, spec)
        d = compute_density(sysm)
        A = dense_system_matrix(sysm)
        for seed in range(6):
            mask = np.unique(sample_iid(d, draws, seed))
            g = gamma(A[mask])
            for s in (1, 2):
                if g.certifies(s):
                    tested[sysm.n] += 1
                    table = brute_force_recovery(A[mask], s, support_trials=60, seed=seed,
                                                 patterns=2)
                    failures += not table.all_recovered
    elapsed = time.perf_counter() - start
    ok = failures == 0 and min(tested.values()) > 0
    record(6, ok, elapsed, f"certified (instance, s) pairs {tested}, recovery failures {failures}")


def test_criterion_7_formulas():
    mpmath.mp.dps = 50
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(20):
        L = float(rng.uniform(1, 8))
        s = int(rng.integers(1, 6))
        n = int(2 ** rng.integers(4, 17))
        eta = float(rng.uniform(1e-4, 1))
        gap = float(rng.uniform(1e-3, 1))
        Lm, nm, em, gm = map(mpmath.mpf, (L, n, eta, gap))
        iid = int(mpmath.ceil(5 * Lm**2 * s**2 * mpmath.log(nm**2 / em)))
        mk = int(mpmath.ceil(12 * Lm**2 * s**2 * mpmath.log(2 * nm**2 / em) / gm))
        mismatches += min_measurements_iid(L, s, n, eta) != iid
        mismatches += min_measurements_markov(L, s, n, eta, gap) != mk
    e0 = abs(h(0.0))
    e1 = abs(h(1.0) - 0.45711)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and e0 == 0 and e1 < 1e-5
    record(7, ok, elapsed, f"{mismatches} mismatches on 20 tuples, h(0)={h(0.0)}, "
                           f"h(1)={h(1.0):.6f}")


@pytest.mark.slow
def test_criterion_8_trend(tmp_path):
    start = time.perf_counter()
    cfg = ExperimentConfig(rows=256, cols=256, alphas=[1.0, 0.1, 0.001], repetitions=10,
                           output=str(tmp_path / "fig"), jobs=3)
    rows = run_experiment(cfg)
    means = [np.mean([r["psnr"] for r in rows if r["alpha"] == a]) for a in cfg.alphas]
    elapsed = time.perf_counter() - start
    ok = means[0] >= means[1] >= means[2] and means[0] - means[2] >= 1.0 and elapsed < 900
    record(8, ok, elapsed, "mean PSNR " + ", ".join(
        f"alpha={a}: {m:.2f} dB" for a, m in zip(cfg.alphas, means)))


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(same_tree(os.path.join(a, d), os.path.join(b, d)) for d in cmp.common_dirs)


def test_criterion_9_determinism(tmp_path, monkeypatch):
    start = time.perf_counter()
    trees = []
    for name, jobs in (("first", 1), ("second", 1), ("parallel", 3)):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        run_experiment(ExperimentConfig(rows=64, cols=64, alphas=[1.0, 0.1, 0.001],
                                        repetitions=2, max_iter=100, output="results",
                                        jobs=jobs))
        trees.append(str(tmp_path / name / "results"))
    rerun = same_tree(trees[0], trees[1])
    # config.txt records the jobs setting itself; every other file must match
    os.remove(os.path.join(trees[0], "config.txt"))
    os.remove(os.path.join(trees[2], "config.txt"))
    parallel = same_tree(trees[0], trees[2])
    elapsed = time.perf_counter() - start
    record(9, rerun and parallel, elapsed,
           f"serial rerun identical: {rerun}, parallel identical: {parallel}")
