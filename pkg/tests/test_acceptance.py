"""Acceptance suite: one test (or group) per criterion, each printing a PASS/FAIL line in the summary."""
import itertools
import json
import math
import time

import numpy as np
import pytest

from oracles import brute_force_dp, delta_perturbed_mp, delta_unperturbed_mp
from robust_periodic import cli, formats
from robust_periodic.bounds import (BoundConstants, ball_samples, chained_radii, delta_perturbed,
                                    delta_unperturbed, estimate_constants)
from robust_periodic.certify import certify_limit_cycle
from robust_periodic.core import Ball, Grid, Pattern, TimingConfig, ball_contains
from robust_periodic.integrate import integrate_pattern, reference_solution
from robust_periodic.sim import PerturbationPlan, check_containment, period_gap, run_ensemble
from robust_periodic.synth import CostSpec, dp_synthesize, evaluate_pattern
from robust_periodic.systems import LINEAR2D, get_system
from robust_periodic.tube import period_radii, propagate_tube

C1 = "formula fidelity against arbitrary precision"
C2 = "bound soundness (linear and bioreactor)"
C3 = "DP exactness vs 81-pattern enumeration"
C4 = "ball-inclusion regression on the printed tube"
C5 = "end-to-end desk-scale bioreactor certification"
C6 = "negative rate sum and decreasing period gaps"
C7 = "grid refinement trend"
C8 = "determinism of criterion-5 outputs"


# -- 1 -----------------------------------------------------------------------

def _tuples(rng, n, branch):
    t = rng.uniform(0.0, 2.0, n)
    C = rng.uniform(0.0, 10.0, n)
    mu = rng.uniform(0.0, 2.0, n)
    om = rng.uniform(0.0, 0.1, n)
    g = rng.uniform(0.0, 2.0, n)
    mag = 10.0 ** rng.uniform(-3, math.log10(5.0), n)
    lam = {"neg": -mag, "pos": mag, "zero": np.zeros(n)}[branch]
    return zip(t, C, mu, om, g, lam)


@pytest.mark.criterion(1, C1)
@pytest.mark.parametrize("branch", ["neg", "zero", "pos"])
def test_c1_formula_fidelity(branch):
    start = time.perf_counter()
    rng = np.random.default_rng({"neg": 1, "zero": 2, "pos": 3}[branch])
    worst = 0.0
    for t, C, mu, om, g, lam in _tuples(rng, 1000, branch):
        c = BoundConstants(C=C, lam=lam, gamma=g)
        ref_u = float(delta_unperturbed_mp(mu, t, C, lam))
        ref_p = float(delta_perturbed_mp(mu, om, t, C, lam, g))
        got_u = delta_unperturbed(mu, t, c)
        got_p = delta_perturbed(mu, om, t, c)
        got_0 = delta_perturbed(mu, 0.0, t, c)
        for got, ref in ((got_u, ref_u), (got_p, ref_p), (got_0, got_u)):
            err = abs(got - ref) / abs(ref) if ref else abs(got)
            worst = max(worst, err)
    assert worst <= 1e-12, worst
    assert time.perf_counter() - start < 10


# -- 2 -----------------------------------------------------------------------

def _soundness(system, pattern, z0, eps, omega, timing, n_starts, seed):
    """Max over starts and samples of ||Y_ref - Euler|| / radius (<= 1 means sound)."""
    modes = sorted(set(pattern.modes))
    consts = [estimate_constants(system, m, system.enclosure, omega=omega) for m in modes]
    c = BoundConstants(C=max(k.C for k in consts), lam=max(k.lam for k in consts),
                       gamma=max(k.gamma for k in consts))
    radii = chained_radii(eps, omega, timing.dt, timing.K, c)
    nominal = integrate_pattern(system, pattern, z0, timing).states
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_starts)]
    starts = np.array([z0 + ball_samples(r, 1, system.n, eps)[0] for r in rngs])
    W = np.stack([ball_samples(r, timing.K, system.d, omega) for r in rngs])
    from robust_periodic.integrate import rollout
    ids = pattern.step_modes(timing.substeps, timing.K)
    ref = rollout(system, system.modes[ids], starts, timing.dt, "rk4", 10, W)
    enc = system.enclosure
    assert np.all((ref >= enc.lower) & (ref <= enc.upper)), "reference left the enclosure"
    dist = np.linalg.norm(ref - nominal[None], axis=2)
    violations = int(np.count_nonzero(dist > radii[None]))
    # the first tau interval, where the bound is still tight enough to be informative
    s = timing.substeps
    ratio_first = float((dist[:, 1:s + 1] / radii[None, 1:s + 1]).max())
    return violations, ratio_first


@pytest.mark.criterion(2, C2)
def test_c2_soundness_linear():
    start = time.perf_counter()
    s = get_system("linear2d")
    timing = TimingConfig(1.0, 1 / 400, 48)
    pattern = Pattern(tuple(i % 3 for i in range(48)), 1.0)
    eps = Grid(s.domain, 11).epsilon
    violations, ratio = _soundness(s, pattern, np.array([0.5, 0.5]), eps, 0.01, timing, 100, 2024)
    assert violations == 0
    assert ratio <= 1.0
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(2, C2)
def test_c2_soundness_bioreactor():
    start = time.perf_counter()
    s = get_system("bioreactor", n_modes=300)
    timing = TimingConfig(1.0, 1 / 400, 48)
    pattern = Pattern(tuple((37 * i) % 300 for i in range(48)), 1.0)
    eps = Grid(s.domain, 200).epsilon
    violations, ratio = _soundness(s, pattern, np.array([6.52, 12.5, 22.4]), eps, 0.005, timing, 100, 2025)
    assert violations == 0
    assert ratio <= 1.0
    assert time.perf_counter() - start < 60


# -- 3 -----------------------------------------------------------------------

SMALL_TIMING = TimingConfig(0.5, 0.1, 4)
SMALL_COST = CostSpec.terminal([0.5, 0.5])


@pytest.mark.criterion(3, C3)
def test_c3_dp_exactness():
    start = time.perf_counter()
    s = get_system("linear2d")
    grid = Grid(s.domain, 5)
    table = dp_synthesize(s, grid, SMALL_TIMING, SMALL_COST)
    best = brute_force_dp(grid, LINEAR2D["diag"], LINEAR2D["offsets"], SMALL_TIMING.substeps,
                          SMALL_TIMING.dt, SMALL_TIMING.k, SMALL_COST.y_end)
    assert len(best) == 25
    for z, (value, pat) in enumerate(best):
        assert table.values[z] == value, (z, table.values[z], value)
        if np.isfinite(value):
            assert table.table_pattern(z) == pat
    assert time.perf_counter() - start < 10


# -- 4 -----------------------------------------------------------------------

PRINTED = {
    0: ((6.52, 12.5, 22.4), 1.0),
    1: ((6.78068367, 12.61279314, 23.98459177), 0.35893),
    2: ((6.77663937, 12.62347387, 23.95516391), 0.2475),
    3: ((6.77670354, 12.62331389, 23.95558776), 0.24533),
}


@pytest.mark.criterion(4, C4)
def test_c4_ball_regression():
    B = {k: Ball(np.array(c), r) for k, (c, r) in PRINTED.items()}
    assert ball_contains(B[2], B[3])
    assert ball_contains(B[1], B[2])
    assert not ball_contains(B[0], B[1])


# -- 5 and 8 -----------------------------------------------------------------

def _desk_run(out_dir):
    start = time.perf_counter()
    code = cli.main(["pipeline", "bioreactor_desk", "--out-dir", str(out_dir)])
    return code, time.perf_counter() - start


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    a = tmp_path_factory.mktemp("desk_a")
    b = tmp_path_factory.mktemp("desk_b")
    return [(a, *_desk_run(a)), (b, *_desk_run(b))]


@pytest.mark.slow
@pytest.mark.criterion(5, C5)
def test_c5_desk_certification(desk_runs):
    out, code, seconds = desk_runs[0]
    assert seconds < 600
    timing = TimingConfig(1.0, 0.01, 12)
    tube = formats.read_tube_csv(out / "tube.csv")
    radii = period_radii(tube, timing.K)
    print(f"\ndesk run: exit {code}, {len(tube)} tube samples, boundary radii {radii.tolist()}")
    assert code == 0, f"pipeline exit code {code}"
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["status"] == "Certified" and cert["i"] + timing.K <= 3 * timing.K
    rep = json.loads((out / "traces" / "containment.json").read_text())
    assert rep["contained"]
    assert len(radii) == 5 and radii[0] == 1.0
    assert all(a > b for a, b in zip(radii, radii[1:]))
    assert abs(radii[-1] - radii[-2]) <= 0.1 * radii[-2]


@pytest.mark.slow
@pytest.mark.criterion(8, C8)
def test_c8_determinism(desk_runs):
    (a, code_a, _), (b, code_b, _) = desk_runs
    assert code_a == code_b
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files, "no CSV outputs produced"
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    assert sorted(p.relative_to(b) for p in b.rglob("*.csv")) == files


# -- 6 -----------------------------------------------------------------------

def _certified_runs():
    """Certified tube runs produced by this suite's configurations."""
    s = get_system("linear2d")
    runs = []
    for modes, z0 in (((0, 1, 2, 1), (0.5, 0.5)), ((2, 2, 0, 1), (0.3, 0.6))):
        t = TimingConfig(0.5, 0.01, 4)
        p = Pattern(modes, 0.5)
        tube = propagate_tube(s, p, z0, 0.1, 0.01, t, 4)
        cert = certify_limit_cycle(tube, t.K)
        runs.append((s, p, np.array(z0), t, tube, cert))
    return runs


@pytest.mark.criterion(6, C6)
def test_c6_lemma_consistency():
    runs = [r for r in _certified_runs() if r[5].certified]
    assert runs, "no certified run to check"
    for s, p, z0, t, tube, cert in runs:
        i = cert.witness_i
        assert math.fsum(tube.lambdas[i:i + t.K]) < 0
        trace = reference_solution(s, p, z0, t, n_periods=5)
        g = period_gap(trace, t.T)
        assert all(b < a for a, b in zip(g[1:], g[2:])), g


# -- 7 -----------------------------------------------------------------------

@pytest.mark.criterion(7, C7)
def test_c7_refinement_trend():
    s = get_system("linear2d")
    z0 = np.array([0.5, 0.5])
    achieved = []
    for kappa in (5, 10, 20):
        table = dp_synthesize(s, Grid(s.domain, kappa), SMALL_TIMING, SMALL_COST)
        achieved.append(evaluate_pattern(s, table.pattern_for(z0), z0, SMALL_TIMING, SMALL_COST))
    optimum = min(evaluate_pattern(s, Pattern(q, 0.5), z0, SMALL_TIMING, SMALL_COST)
                  for q in itertools.product(range(3), repeat=4))
    print(f"\nachieved costs for kappa 5/10/20: {achieved}, continuous optimum {optimum}")
    for a, b in zip(achieved, achieved[1:]):
        assert b <= a + 1e-9
    assert all(v >= optimum - 1e-12 for v in achieved)
