"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (or ``python tests/test_acceptance.py``).
Criterion 9 needs a user-supplied cps71 CSV (columns ``age,logwage``) named by
the ``KBOOST_CPS71`` environment variable and is skipped otherwise.
"""

import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from kboost.boosting import l2_boost
from kboost.cli import main
from kboost.experiments import (
    RealDataConfig,
    SimulationModel,
    StudyConfig,
    fixed_fit_mse,
    parse_method,
    pilot_scale,
    run_benchmark,
    run_lowrank_study,
    run_robust_study,
    simulate,
)
from kboost.io import load_dataset
from kboost.kernels import KernelKind, KernelSpec
from kboost.robust import RobustSpec, robust_boost
from kboost.smoothers import build_nw_smoother, build_projection_smoother
from kboost.spectral import approximation_error, boosting_operator, eigendecompose, nonsymmetric_spectrum
from kboost.tuning import MethodConfig

KERNELS = (KernelKind.EPANECHNIKOV, KernelKind.GAUSSIAN)
H_GRID = (0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
TOL = 1e-8


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} [{elapsed:.1f}s of {budget:.0f}s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def _design(n, seed=0):
    return simulate(SimulationModel("m1"), n, seed)


def _band(value, centre, half):
    return abs(value - centre) <= half


# ---------------------------------------------------------------- 1


def test_criterion_1_smoother_invariants(report):
    t0 = time.perf_counter()
    worst_sum = worst_lo = worst_hi = 0.0
    asym = 0
    for n in (20, 50, 100):
        data, _ = _design(n, seed=n)
        for kind in KERNELS:
            for h in H_GRID:
                for p in (0, 1):
                    H = build_projection_smoother(data, KernelSpec(kind, h), p).weights
                    asym += int(not np.array_equal(H, H.T))
                    worst_sum = max(worst_sum, np.max(np.abs(H.sum(axis=1) - 1)), np.max(np.abs(H.sum(axis=0) - 1)))
                    lam = np.linalg.eigvalsh(H)
                    worst_lo = min(worst_lo, lam[0])
                    worst_hi = max(worst_hi, lam[-1])
    ok = worst_sum < TOL and asym == 0 and worst_lo >= -TOL and worst_hi <= 1 + TOL
    detail = (
        f"72 smoothers, max |sum-1|={worst_sum:.2e}, asymmetric={asym}, "
        f"eigenvalues in [{worst_lo:.2e}, 1{worst_hi - 1:+.2e}]"
    )
    report(1, ok, detail, time.perf_counter() - t0, 120)


# ---------------------------------------------------------------- 2


def test_criterion_2_spectrum_contrast(report):
    t0 = time.perf_counter()
    data, _ = _design(20, seed=3)
    ep_min = np.inf
    others_lo, others_hi = np.inf, -np.inf
    for h in H_GRID:
        ep = nonsymmetric_spectrum(build_nw_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, h)))
        ep_min = min(ep_min, ep.real.min())
        ga = nonsymmetric_spectrum(build_nw_smoother(data, KernelSpec(KernelKind.GAUSSIAN, h)))
        parts = [ga.real]
        for p in (0, 1):
            parts.append(np.linalg.eigvalsh(build_projection_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, h), p).weights))
        vals = np.concatenate(parts)
        others_lo, others_hi = min(others_lo, vals.min()), max(others_hi, vals.max())
    ok = ep_min < 0 and others_lo >= -TOL and others_hi <= 1 + TOL
    detail = (
        f"NW/Ep min Re={ep_min:.4f} < 0; NW/Gauss and H* within [{others_lo:.2e}, 1{others_hi - 1:+.2e}]"
    )
    report(2, ok, detail, time.perf_counter() - t0, 10)


# ---------------------------------------------------------------- 3


def test_criterion_3_boosting_equivalence(report):
    t0 = time.perf_counter()
    data, _ = _design(50, seed=8)
    worst = 0.0
    for p in (0, 1):
        S = build_projection_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, 0.3), p)
        dec = eigendecompose(S)
        I = np.eye(data.n)
        for seed in range(20):
            y = np.random.default_rng(seed).normal(size=data.n)
            traj = l2_boost(S, y, 25)
            for b in (1, 5, 25):
                dense = (I - np.linalg.matrix_power(I - S.weights, b + 1)) @ y
                spectral = boosting_operator(dec, b).apply(y)
                worst = max(worst, np.max(np.abs(traj.fits[b] - dense)), np.max(np.abs(traj.fits[b] - spectral)))
    report(3, worst < 1e-9, f"max |iterative - closed form| = {worst:.2e} over 20 y, b in {{1,5,25}}", time.perf_counter() - t0, 30)


# ---------------------------------------------------------------- 4


def test_criterion_4_low_rank_properties(report):
    t0 = time.perf_counter()
    data, _ = _design(100, seed=4)
    I = np.eye(data.n)
    monotone, zero_at_n, oracle_gap = True, 0.0, 0.0
    for h in (0.1, 0.4):
        S = build_projection_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, h), 0)
        dec = eigendecompose(S)
        for b in (0, 5, 25):
            errs = np.array([approximation_error(dec, b, d) for d in range(data.n + 1)])
            monotone &= bool(np.all(np.diff(errs) <= 1e-12))
            zero_at_n = max(zero_at_n, abs(errs[-1]))
            full = I - np.linalg.matrix_power(I - S.weights, b + 1)
            for d in (1, 5, 20, 60):
                low = boosting_operator(dec, b, d).matrix()
                oracle = np.linalg.norm(full - low, "fro") ** 2
                oracle_gap = max(oracle_gap, abs(oracle - errs[d]))
    S = build_projection_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, 0.1), 0)
    lam = np.sort(np.linalg.eigvalsh(S.weights))[::-1]
    k = 3 * int(np.ceil(1 / 0.1))
    tail = lam[k:].max()
    ok = monotone and zero_at_n == 0.0 and oracle_gap < 1e-9 and tail < 0.05
    detail = (
        f"monotone={monotone}, error at d=n={zero_at_n:.1e}, Frobenius oracle gap={oracle_gap:.1e}, "
        f"max eigenvalue beyond k={k} is {tail:.4f} < 0.05"
    )
    report(4, ok, detail, time.perf_counter() - t0, 30)


# ---------------------------------------------------------------- 5


def test_criterion_5_table1(report):
    t0 = time.perf_counter()
    cfg = StudyConfig(replicates=100, repeats=3)
    rep = run_benchmark(SimulationModel("m1"), [parse_method("lc-ep")], [100, 200], 100, 3, seed=0, config=cfg)
    m100, m200 = rep.cell("lc-ep", 100).mean, rep.cell("lc-ep", 200).mean
    ok = _band(m100, 0.1117, 0.135) and _band(m200, 0.0691, 0.069)
    detail = f"M1 H*0/Ep n=100 mean={m100:.4f} (0.1117 +- 0.135), n=200 mean={m200:.4f} (0.0691 +- 0.069)"
    report(5, ok, detail, time.perf_counter() - t0, 15 * 60)


# ---------------------------------------------------------------- 6


def test_criterion_6_table2_low_rank(report):
    t0 = time.perf_counter()
    model = SimulationModel("m1")
    small = run_lowrank_study(model, [100], (10,), seed=0, config=StudyConfig(replicates=100, repeats=3))
    d10, dn100 = small.cell("lc-ep", 100, rank=10).mean, small.cell("lc-ep", 100, rank="n").mean
    large = run_lowrank_study(model, [500], (2,), seed=0, config=StudyConfig(replicates=50, repeats=3))
    d2, dn500 = large.cell("lc-ep", 500, rank=2).mean, large.cell("lc-ep", 500, rank="n").mean
    a = abs(d10 - dn100) < 0.01
    b = d2 < dn500
    detail = (
        f"n=100 |d10 - dn| = |{d10:.4f} - {dn100:.4f}| = {abs(d10 - dn100):.4f} < 0.01 [{'ok' if a else 'no'}]; "
        f"n=500 d2={d2:.4f} < dn={dn500:.4f} [{'ok' if b else 'no'}]"
    )
    report(6, a and b, detail, time.perf_counter() - t0, 20 * 60)


# ---------------------------------------------------------------- 7


def test_criterion_7_table5_robust(report):
    t0 = time.perf_counter()
    cfg = StudyConfig(replicates=100, repeats=3)
    rep = run_robust_study(SimulationModel("m1", "t3"), [parse_method("lc-ep")], [100, 200], (1.0,), seed=0, config=cfg)
    parts, ok = [], True
    for n, centre, half in ((100, 0.1028, 0.243), (200, 0.0428, 0.072)):
        rob = rep.cell("lc-ep", n, robust=True).mean
        plain = rep.cell("lc-ep", n, robust=False).mean
        ok &= rob < plain and _band(rob, centre, half)
        parts.append(f"n={n} robust={rob:.4f} < L2={plain:.4f}, band {centre} +- {half}")
    report(7, ok, "; ".join(parts), time.perf_counter() - t0, 20 * 60)


# ---------------------------------------------------------------- 8


def test_criterion_8_robust_degeneracy(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        data, _ = simulate(SimulationModel("m1", "t3"), 60, seed)
        S = build_projection_smoother(data, KernelSpec(KernelKind.EPANECHNIKOV, 0.3), 0)
        rob = robust_boost(S, data.y, RobustSpec(1e6), 25)
        l2 = l2_boost(S, data.y, 25)
        worst = max(worst, np.max(np.abs(rob.fits - l2.fits)))
    report(8, worst < 1e-8, f"c=1e6 max |robust - L2| = {worst:.2e} over 10 datasets, b <= 25", time.perf_counter() - t0, 10)


# ---------------------------------------------------------------- 9


def test_criterion_9_cps71(report, capsys):
    path = os.environ.get("KBOOST_CPS71")
    if not path or not Path(path).is_file():
        with capsys.disabled():
            print("\nSKIP criterion 9: set KBOOST_CPS71 to a CSV with columns age,logwage")
        pytest.skip("cps71 data not supplied (KBOOST_CPS71)")
    t0 = time.perf_counter()
    data = load_dataset(path, ("age", "logwage"))
    cfg = RealDataConfig()
    err = fixed_fit_mse(data, cfg.method("nw", 0.8638), 5.76, 19)
    sigma, _ = pilot_scale(data, cfg)
    ok = _band(err, 0.2662, 0.01) and _band(sigma, 0.64, 0.05)
    detail = f"NW robust (h=5.76, b=19, c=0.8638) MSE={err:.4f} (0.2662 +- 0.01); pilot sigma={sigma:.3f} (0.64 +- 0.05)"
    report(9, ok, detail, time.perf_counter() - t0, 60)


# ---------------------------------------------------------------- 10


def test_criterion_10_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    argv = [
        "bench", "--study", "robust", "--seed", "7", "--n-list", "40",
        "--methods", "lc-ep,nw-ep,spline", "--replicates", "5", "--repeats", "2",
        "--grid-count", "4", "--b-max", "40",
    ]
    outs = []
    for run, jobs in enumerate(("1", "2", "1")):
        out = tmp_path / f"run{run}"
        with capsys.disabled():
            code = main(argv + ["--out-dir", str(out), "--jobs", jobs])
        outs.append(out)
        assert code == 0
    names = sorted(p.name for p in outs[0].iterdir())
    same = all(
        sorted(p.name for p in o.iterdir()) == names
        and all((o / name).read_bytes() == (outs[0] / name).read_bytes() for name in names)
        for o in outs[1:]
    )
    detail = f"3 runs of bench --study robust --seed 7 (jobs 1, 2, 1): {', '.join(names)} byte-identical={same}"
    report(10, same, detail, time.perf_counter() - t0, 20 * 60)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
