import numpy as np
import pytest

from kinlab.convolution_lab import (ZAccumulator, function_transform, mild_identity_residual, z_direct, z_field_at,
                                    z_norms_comoving, z_pairing, z_sup_dual_norm)
from kinlab.particles import SimConfig, kuramoto_kernel, simulate, zero_kernel
from kinlab.semigroup import PhysicalGrid
from kinlab.spectral_core import FrequencyGrid, SobolevOrder, dual_norm

PG = PhysicalGrid(12.0, 12.0, 128, 128)
FG = FrequencyGrid.uniform()
SMALL = FrequencyGrid.uniform(8, 8, 33)
ORDER = SobolevOrder(6, 1)


def _tests():
    X, V = PG.mesh()
    return [np.exp(-((X - 0.3) ** 2 + (V + 0.2) ** 2) / 2),
            np.exp(-(X**2) / 2 - (V - 0.5) ** 2) * np.cos(X),
            np.exp(-((X + 0.5) ** 2 + V**2) / 4) * np.sin(V)]


@pytest.fixture(scope="module")
def path():
    return simulate(SimConfig(N=32, T=0.2, dt=0.01, seed=5))


def test_zero_time_field(path):
    acc = ZAccumulator.from_path(path, SMALL, [0, 10])
    assert np.array_equal(z_field_at(acc, 0).values, np.zeros(SMALL.shape))


def test_origin_value_vanishes(path):
    acc = ZAccumulator.from_path(path, SMALL, [20])
    assert z_field_at(acc, 20).field.origin_value() == 0.0


def test_linear_in_increments(path):
    acc = ZAccumulator.from_path(path, SMALL, [20])
    a = z_field_at(acc, 20).values
    b = z_field_at(acc, 20, scale=2.0).values
    assert np.allclose(b, 2 * a, rtol=1e-14, atol=0)


def test_unrecorded_snapshot_rejected(path):
    acc = ZAccumulator.from_path(path, SMALL, [20])
    with pytest.raises(KeyError):
        z_field_at(acc, 7)
    stored = simulate(SimConfig(N=4, T=0.1, dt=0.01, store="snapshots", snapshot_steps=(0, 10)))
    with pytest.raises(ValueError):
        ZAccumulator.from_path(stored, SMALL)


def test_two_path_agreement(path):
    steps = [5, 10, 20]
    acc = ZAccumulator.from_path(path, FG, steps)
    for f in _tests():
        fh = function_transform(f, PG, FG)
        for m in steps:
            zf = z_pairing(z_field_at(acc, m), fh)
            zd = z_direct(path, f, PG, m)
            assert abs(zf - zd) <= 1e-4 * abs(zd)


def test_centered_in_expectation():
    nodes = [(20, 16), (16, 20), (24, 10)]
    vals = []
    for rep in range(200):
        p = simulate(SimConfig(N=8, T=0.2, dt=0.02, seed=[rep, 99]))
        z = z_field_at(ZAccumulator.from_path(p, SMALL, [10]), 10).values
        vals.append([z[i, j] for i, j in nodes])
    vals = np.array(vals)
    for k in range(len(nodes)):
        for part in (vals[:, k].real, vals[:, k].imag):
            se = part.std(ddof=1) / np.sqrt(part.size)
            assert abs(part.mean()) <= 3 * se


def test_zero_noise_has_zero_norm():
    p = simulate(SimConfig(N=16, T=0.2, dt=0.02, sigma_mode="zero", seed=1))
    acc = ZAccumulator.from_path(p, SMALL, [5, 10])
    assert z_sup_dual_norm(acc, ORDER) == 0.0
    assert z_sup_dual_norm(acc, ORDER, method="direct") == 0.0


def test_comoving_matches_direct(path):
    snaps = [4, 10, 20]
    acc = ZAccumulator.from_path(path, FG, snaps)
    co = z_norms_comoving(path, snaps, FG, ORDER)
    direct = [dual_norm(z_field_at(acc, m).field, ORDER) for m in snaps]
    assert np.allclose(co, direct, rtol=5e-3)


def test_norm_decays_with_N():
    grid = FrequencyGrid.uniform(16, 16, 129)
    wins = 0
    for trial in range(20):
        norms = []
        for N in (256, 1024):
            p = simulate(SimConfig(N=N, T=1.0, dt=1 / 32, seed=[trial, N]))
            norms.append(np.max(z_norms_comoving(p, range(0, 33, 4), grid, ORDER)))
        wins += norms[1] < norms[0]
    assert wins >= 16


# --- mild identity --------------------------------------------------------------


def test_mild_identity_free_transport():
    p = simulate(SimConfig(N=6, T=0.2, dt=0.02, sigma_mode="zero", kernel=zero_kernel(), seed=2))
    acc = ZAccumulator.from_path(p, FG, [10])
    f = _tests()[0]
    terms = mild_identity_residual(p, acc, f, PG, 10)
    assert terms.z == 0.0 and terms.drift == 0.0
    assert terms.residual < 1e-12


def test_mild_identity_relabel_invariant(path):
    f = _tests()[1]
    fh = function_transform(f, PG, FG)
    perm = np.random.default_rng(0).permutation(path.N)
    swapped = path.permuted(perm)
    a = mild_identity_residual(path, ZAccumulator.from_path(path, FG, [20]), f, PG, 20, f_hat=fh)
    b = mild_identity_residual(swapped, ZAccumulator.from_path(swapped, FG, [20]), f, PG, 20, f_hat=fh)
    assert b.residual == pytest.approx(a.residual, rel=1e-8, abs=1e-14)
    assert b.lhs == pytest.approx(a.lhs, rel=1e-12)


def test_mild_identity_rejects_foreign_accumulator(path):
    other = simulate(SimConfig(N=32, T=0.2, dt=0.01, seed=6))
    with pytest.raises(ValueError):
        mild_identity_residual(path, ZAccumulator.from_path(other, FG, [20]), _tests()[0], PG, 20)


def test_mild_identity_correction_improves_residual():
    p = simulate(SimConfig(N=8, T=0.5, dt=0.005, kernel=kuramoto_kernel(0.5), seed=3))
    M = p.steps
    acc = ZAccumulator.from_path(p, FG, [M])
    f = _tests()[0]
    corrected = mild_identity_residual(p, acc, f, PG, M)
    literal = mild_identity_residual(p, acc, f, PG, M, corrected=False)
    assert corrected.residual < 0.1 * literal.residual


def test_zfield_csv(path):
    acc = ZAccumulator.from_path(path, SMALL, [10])
    lines = z_field_at(acc, 10).to_csv().splitlines()
    assert lines[0] == "t,xi,eta,re,im" and len(lines) == 1 + 33 * 33
