"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Seeds are fixed here once; no criterion is retried or loosened.
"""
import numpy as np
import pytest
from conftest import record_acceptance

from kinlab.convolution_lab import ZAccumulator, function_transform, z_direct, z_field_at, z_pairing
from kinlab.harness import ExperimentConfig, run_lln, run_mild_residual, run_zdecay
from kinlab.mildsolver import DensityField, SolverConfig, picard_iterate, solve, sup_distance
from kinlab.particles import GaussianMixture, SimConfig, kuramoto_kernel, simulate, zero_kernel
from kinlab.semigroup import (PhysicalGrid, apply_Pt_function, evaluate_Pt_at, free_gaussian_law, gaussian_density_2d,
                              kernel_time_regularity_check, semigroup_mc_oracle)
from kinlab.spectral_core import FrequencyGrid, KineticPoint, SobolevOrder, dual_norm, dual_norm_certified, delta_norm
from kinlab.spectral_core import measure_char

ORDER = SobolevOrder(6, 1)
SLOPE_BAND = (-0.65, -0.35)


def _test_functions():
    """Three smooth, rapidly decaying test functions as ``f(x, v)`` callables."""
    return [
        lambda x, v: np.exp(-((x - 0.3) ** 2 + (v + 0.2) ** 2) / 2),
        lambda x, v: np.exp(-(x**2) / 2 - (v - 0.5) ** 2) * np.cos(x),
        lambda x, v: np.exp(-((x + 0.5) ** 2 + v**2) / 4) * np.sin(v),
    ]


def test_criterion_01_semigroup_vs_monte_carlo():
    pg = PhysicalGrid(16.0, 16.0, 256, 256)
    X, V = pg.mesh()
    rng = np.random.default_rng(101)
    pts = rng.uniform(-2, 2, size=(20, 2))
    worst, misses, total = 0.0, 0, 0
    for j, f in enumerate(_test_functions()):
        fv = f(X, V)
        for k, t in enumerate((0.1, 0.5, 1.0)):
            spectral = np.ravel(evaluate_Pt_at(fv, pg, t, pts[:, 0], pts[:, 1]))
            for i, (x, v) in enumerate(pts):
                mc, se = semigroup_mc_oracle(f, KineticPoint((x,), (v,)), t, 100_000, [101, i, j, k])
                z = abs(spectral[i] - mc) / se
                worst = max(worst, z)
                misses += z > 3
                total += 1
    ok = misses == 0
    record_acceptance(1, ok, f"max |z| = {worst:.2f}; {misses} of {total} comparisons beyond 3 SE")
    assert ok


def test_criterion_02_semigroup_law():
    pg = PhysicalGrid(16.0, 16.0, 256, 256)
    X, V = pg.mesh()
    f = _test_functions()[0](X, V)
    rng = np.random.default_rng(102)
    worst = 0.0
    for t, s in rng.uniform(0.01, 0.5, size=(10, 2)):
        a = apply_Pt_function(f, pg, t + s)
        b = apply_Pt_function(apply_Pt_function(f, pg, s), pg, t)
        worst = max(worst, float(np.abs(a - b).max() / np.abs(f).max()))
    ok = worst <= 1e-8
    record_acceptance(2, ok, f"max relative deviation {worst:.2e} over 10 pairs (tol 1e-8)")
    assert ok


def test_criterion_03_gaussian_pushforward():
    cfg = SolverConfig(dt=0.05)
    X, V = cfg.grid.mesh()
    m0, C0 = np.array([0.5, -0.3]), np.diag([0.36, 0.25])
    run = solve(DensityField(cfg.grid, gaussian_density_2d(m0, C0, X, V)), 1.0, zero_kernel(), cfg)
    m1, C1 = free_gaussian_law(m0, C0, 1.0)
    err = float(np.abs(run.densities[-1].values - gaussian_density_2d(m1, C1, X, V)).max())
    ok = err <= 1e-4
    record_acceptance(3, ok, f"sup error {err:.2e} at T=1 (tol 1e-4)")
    assert ok


def test_criterion_04_quarter_eta_kernel_bound():
    rng = np.random.default_rng(104)
    n = 1_000_000
    r, u, t = np.sort(rng.uniform(0, 1, size=(n, 3)), axis=1).T
    xi = rng.uniform(-32, 32, n)
    eta = rng.choice([-1.0, 1.0], n) * rng.uniform(0.1, 32, n)
    holds = kernel_time_regularity_check(r, u, t, xi, eta)
    viol = int(np.sum(~holds))
    ok = viol == 0
    record_acceptance(4, ok, f"{viol} of {n} tuples violate |G(t-r)-G(u-r)| <= |eta|^2 (t-u)/4")
    assert ok


def test_criterion_05_uniform_dual_bound(fgrid):
    rng = np.random.default_rng(105)
    ref = delta_norm(fgrid, ORDER)
    worst_excess = -np.inf
    for _ in range(1000):
        k = int(rng.integers(1, 65))
        scale = float(rng.choice([0.1, 1.0, 5.0]))
        pts = rng.normal(scale=scale, size=(k, 2))
        w = rng.dirichlet(np.ones(k))
        val, tail = dual_norm_certified(measure_char(pts, w, fgrid), ORDER)
        worst_excess = max(worst_excess, val - (ref + tail))
    ok = worst_excess <= 0
    record_acceptance(5, ok, f"max (norm - delta norm - tail) = {worst_excess:.3e} over 1000 measures")
    assert ok


def test_criterion_06_mild_identity_residual():
    study = run_mild_residual(N=8, seed=0)
    ok = study.monotone and study.ratio <= 0.25
    res = ", ".join(f"{r:.3e}" for r in study.residuals)
    record_acceptance(6, ok, f"residuals [{res}] at dt {study.dts}; monotone={study.monotone}, "
                             f"ratio={study.ratio:.3f} (tol 0.25)")
    assert ok


def test_criterion_07_z_two_path_agreement():
    pg = PhysicalGrid(12.0, 12.0, 128, 128)
    fg = FrequencyGrid.uniform()
    X, V = pg.mesh()
    path = simulate(SimConfig(N=64, T=0.5, dt=2e-3, seed=107))
    snaps = [50, 100, 150, 200, 250]
    acc = ZAccumulator.from_path(path, fg, snaps)
    worst = 0.0
    for f in _test_functions():
        fv = f(X, V)
        fh = function_transform(fv, pg, fg)
        for m in snaps:
            zf = z_pairing(z_field_at(acc, m), fh)
            zd = z_direct(path, fv, pg, m)
            worst = max(worst, abs(zf - zd) / abs(zd))
    ok = worst <= 1e-4
    record_acceptance(7, ok, f"max relative difference {worst:.2e} over 3 functions x 5 snapshots (tol 1e-4)")
    assert ok


def _slope_line(rep) -> str:
    lo, hi = rep.fit()[2]
    return f"slope {rep.slope:.3f} (95% CI [{lo:.3f}, {hi:.3f}]), band {list(SLOPE_BAND)}"


@pytest.mark.slow
def test_criterion_08_stochastic_convolution_decay():
    rep = run_zdecay(ExperimentConfig.defaults("zdecay", seed=8))
    ok = SLOPE_BAND[0] <= rep.slope <= SLOPE_BAND[1]
    record_acceptance(8, ok, _slope_line(rep))
    assert ok


@pytest.mark.slow
def test_criterion_09_lln_rate_iid():
    rep = run_lln(ExperimentConfig.defaults("lln", seed=9))
    ok = SLOPE_BAND[0] <= rep.slope <= SLOPE_BAND[1] and rep.ratio() <= 0.25
    record_acceptance(9, ok, f"{_slope_line(rep)}; largest/smallest mean {rep.ratio():.3f} (tol 0.25)")
    assert ok


def test_criterion_10_picard_uniqueness_surrogate():
    nu0 = DensityField.from_mixture(GaussianMixture(), SolverConfig().grid)
    kernel = kuramoto_kernel(0.5)
    fg = FrequencyGrid.uniform()
    tol = 1e-7
    free = picard_iterate(nu0, 1.0, kernel, tol=tol, fgrid=fg, n_times=16, start="free")
    frozen = picard_iterate(nu0, 1.0, kernel, tol=tol, fgrid=fg, n_times=16, start="frozen")
    fine = picard_iterate(nu0, 1.0, kernel, tol=tol, fgrid=fg, n_times=32, start="free")
    starts = sup_distance(free.run, frozen.run, ORDER)
    # Picard quadrature error, Richardson estimate for a second-order rule
    quad = max(dual_norm(free.run.chars[k] - fine.run.chars[2 * k], ORDER) for k in range(len(free.run.times)))
    times = free.run.times
    coarse = solve(nu0, 1.0, kernel, SolverConfig(dt=1 / 64), times, fg)
    finer = solve(nu0, 1.0, kernel, SolverConfig(dt=1 / 128), times, fg)
    est = sup_distance(coarse, finer, ORDER)
    vs_solver = sup_distance(free.run, coarse, ORDER)
    combined = 2 * tol + 2 * (4 / 3) * quad + 2 * est
    ok = free.converged and frozen.converged and starts <= 2 * tol and vs_solver <= combined
    record_acceptance(10, ok, f"starts differ {starts:.2e} (tol {2 * tol:.0e}); fixed point vs solver "
                              f"{vs_solver:.2e} (combined tol {combined:.2e}); iterations "
                              f"{free.iterations}/{frozen.iterations}")
    assert ok


@pytest.mark.slow
def test_criterion_11_lln_rate_lattice_common_shift():
    rep = run_lln(ExperimentConfig.defaults("lln", seed=11, initial={"kind": "lattice", "shift": True}))
    ok = SLOPE_BAND[0] <= rep.slope <= SLOPE_BAND[1]
    record_acceptance(11, ok, _slope_line(rep))
    assert ok
