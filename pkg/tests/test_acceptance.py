"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured quantity and runtime.
"""

import math
import time

import numpy as np
import pytest

from dmnls.diagnostics import virial_prefactor_audit, virial_quantities
from dmnls.dispersion_map import DispersionMap, cover_intervals, covering_bound, drift_deviation
from dmnls.experiments import ExperimentSpec, run
from dmnls.ground_state import solve_Q, solve_Q_petviashvili
from dmnls.spectral_engine import RadialGrid3D, SplitStepConfig, collect, norms

from helpers import REFERENCE, random_map

FOCUSING = DispersionMap.two_step(1.0, 1.0, 0.5)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail} "
                  f"({elapsed:.1f} s of {budget:.0f} s)")
        return ok

    return emit


def test_01_drift_bound(report):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    times = rng.uniform(-50.0, 50.0, size=1000)
    violations, worst = 0, 0.0
    for _ in range(10_000):
        m = random_map(rng)
        excess = drift_deviation(m, times) - (2 * m.sup_norm + 1e-9)
        violations += int(np.count_nonzero(excess > 0))
        worst = max(worst, float(excess.max()))
    elapsed = time.perf_counter() - start
    assert report(1, "drift bound", violations == 0,
                  f"{violations} violations, max excess {worst:.3g}", elapsed, 10)
    assert violations == 0 and elapsed < 10


def test_02_covering_bound(report):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(100):
        m = random_map(rng)
        bound = covering_bound(m)
        violations += sum(cover_intervals(m, n).K_n > bound for n in range(-20, 21))
    k0 = cover_intervals(REFERENCE, 0).K_n
    elapsed = time.perf_counter() - start
    ok = violations == 0 and k0 == 2
    assert report(2, "covering bound", ok, f"{violations} violations, reference K_0 = {k0}", elapsed, 10)
    assert ok and elapsed < 10


def test_03_pohozaev(report):
    start = time.perf_counter()
    q = solve_Q()
    other = solve_Q_petviashvili()
    elapsed = time.perf_counter() - start
    g_res = abs(q.grad_sq / q.mass - 3)
    p_res = abs(q.quartic / q.mass - 4)
    agree = abs(other.mass / q.mass - 1)
    ok = g_res <= 1e-6 and p_res <= 1e-6 and agree <= 1e-5
    assert report(3, "Pohozaev ratios", ok,
                  f"|G/M-3|={g_res:.2e} |P/M-4|={p_res:.2e} solver mass gap {agree:.2e}", elapsed, 30)
    assert ok and elapsed < 30


def test_04_soliton(report, profile_cache):
    rep = run(ExperimentSpec("soliton", FOCUSING, params={"profile_cache": str(profile_cache)}))
    ratio, drift = rep["error_ratio"], rep["mass_drift"]
    ok = 3.2 <= ratio <= 4.8 and drift <= 1e-10
    assert report(4, "soliton regression", ok, f"error ratio {ratio:.3f}, mass drift {drift:.2e}",
                  rep.runtime_seconds, 120)
    assert ok and rep.runtime_seconds < 120


def test_05_strichartz(report):
    main = run(ExperimentSpec("strichartz", REFERENCE, params={"q": 8.0, "r": 4.0}, seed=0))
    unit = run(ExperimentSpec("strichartz", REFERENCE, params={"q": math.inf, "r": 2.0}, seed=0))
    elapsed = main.runtime_seconds + unit.runtime_seconds
    c_gamma = main.artifacts["c_gamma"]
    ok = main["max_ratio"] <= c_gamma and unit["unitarity_deviation"] <= 1e-10
    assert report(5, "Strichartz audit", ok,
                  f"max ratio {main['max_ratio']:.4f} <= C(gamma) {c_gamma:.4f}, "
                  f"(inf,2) deviation {unit['unitarity_deviation']:.2e}", elapsed, 300)
    assert ok and elapsed < 300


def test_06_virial_prefactor(report, q_profile):
    start = time.perf_counter()
    grid = RadialGrid3D(20.0, 1024)
    kappas = {}
    for gamma in (1.0, 0.5, 2.0):
        cfg = SplitStepConfig(dt_max=0.001, snapshot_stride=5)
        _, snaps = collect(q_profile.sample(grid, 0.9), 0.0, 0.1, DispersionMap.constant(gamma), cfg)
        kappas[gamma] = virial_prefactor_audit(gamma, snaps)
    elapsed = time.perf_counter() - start
    ok = abs(kappas[1.0] - 1) <= 0.02 and all(k > 0 for k in kappas.values())
    detail = ", ".join(f"kappa(gamma={g})={k:.4f}" for g, k in kappas.items())
    assert report(6, "virial prefactor", ok, detail, elapsed, 120)
    assert ok and elapsed < 120


@pytest.fixture(scope="module")
def blowup_report(profile_cache):
    spec = ExperimentSpec("blowup", FOCUSING, params={"profile_cache": str(profile_cache), "resolution_check": True})
    return run(spec)


def test_07_trapping(report, blowup_report):
    track = blowup_report.artifacts["track"]
    ok = track.ratio_ok and track.integrand_ok and len(track.times) > 1
    detail = (f"{len(track.times)} snapshots, min y {track.ratio.min():.4f} >= {track.ratio_floor:.4f}, "
              f"max integrand {track.integrand.max():.4g} <= {track.integrand_ceiling:.4g}")
    assert report(7, "energy trapping", ok, detail, blowup_report.runtime_seconds, 180)
    assert ok and blowup_report.runtime_seconds < 180


def test_08_blowup(report, blowup_report):
    rep = blowup_report
    ok = (rep.verdict == "blowup_detected" and rep["t_star"] < 0.5 and rep["h1_growth"] >= 1e3
          and rep["t_star_resolution_drift"] <= 0.1 and rep["T_lambda"] < 0.25)
    detail = (f"lambda {rep['lambda']:g}, T_lambda {rep['T_lambda']:.4f}, t* {rep['t_star']:.5f}, "
              f"H1 growth {rep['h1_growth']:.3g}, resolution drift {rep['t_star_resolution_drift']:.2e}")
    assert report(8, "blowup", ok, detail, rep.runtime_seconds, 600)
    assert ok and rep.runtime_seconds < 600


def test_09_scattering(report):
    rep = run(ExperimentSpec("scattering", REFERENCE, seed=0))
    decay = rep["cauchy_decay_factor"]
    ok = rep.verdict == "pass" and decay >= 10
    assert report(9, "scattering", ok, f"Cauchy decay factor {decay:.2f}, last {rep['last_cauchy_difference']:.3e}",
                  rep.runtime_seconds, 300)
    assert ok and rep.runtime_seconds < 300


def test_10_scaling(report, q_profile):
    start = time.perf_counter()
    grid = RadialGrid3D(20.0, 8192)
    base = None
    worst = 0.0
    for lam in (1, 2, 4, 8):
        f = q_profile.sample(grid, scale=lam)
        n = norms(f)
        vals = np.array([n.mass, n.grad_sq, virial_quantities(f, 1.0).variance])
        if base is None:
            base = vals
        expected = base * np.array([lam**-1.0, lam, lam**-3.0])
        worst = max(worst, float(np.max(np.abs(vals / expected - 1))))
    elapsed = time.perf_counter() - start
    ok = worst <= 0.01
    assert report(10, "scaling laws", ok, f"max relative deviation {worst:.2e}", elapsed, 60)
    assert ok and elapsed < 60
