import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlab.semigroup import (AliasingError, KineticGaussian, PhysicalGrid, apply_Pt_density, apply_Pt_function,
                              apply_Pt_measure, density_pt, evaluate_Pt_at, free_gaussian_law,
                              gradient_weight_integral, grad_v_Pt_function, grad_v_Pt_function_direct, kernel_G,
                              kernel_increment_envelope, kernel_time_regularity_check,
                              kernel_time_regularity_sides, semigroup_mc_oracle, trig_interpolate)
from kinlab.spectral_core import FrequencyGrid, KineticPoint, SpectralField, measure_char

GRID = PhysicalGrid(16.0, 16.0, 256, 256)


def _bump(X, V, x0=0.3, v0=-0.2, w=1.0):
    return np.exp(-((X - x0) ** 2 + (V - v0) ** 2) / (2 * w * w))


# --- kernel and Gaussian law ----------------------------------------------------


@pytest.mark.parametrize("t, xi, eta, expected", [
    (0.7, 0.0, 0.0, 1.0),
    (1.0, 0.0, 1.5, np.exp(-2.25)),
    (1.0, 1.0, -1.0, np.exp(-1 / 3)),
])
def test_kernel_examples(t, xi, eta, expected):
    assert kernel_G(t, xi, eta) == pytest.approx(expected, rel=1e-15)


@given(st.floats(0, 5), st.floats(-50, 50), st.floats(-50, 50))
def test_kernel_at_most_one(t, xi, eta):
    assert 0.0 <= kernel_G(t, xi, eta) <= 1.0


def test_kernel_is_characteristic_function_of_increment(rng):
    t = 0.6
    X, V = KineticGaussian(t).sample(400_000, rng)
    for xi, eta in [(1.0, 0.5), (-2.0, 1.0), (0.5, -1.5)]:
        emp = np.mean(np.exp(1j * (xi * X + eta * V)))
        assert abs(emp - kernel_G(t, xi, eta)) < 5 / np.sqrt(400_000)


def test_density_integral_and_moments():
    t = 0.8
    x = np.linspace(-8, 8, 801)
    v = np.linspace(-12, 12, 801)
    X, V = np.meshgrid(x, v, indexing="ij")
    p = density_pt(t, X, V)
    cell = (x[1] - x[0]) * (v[1] - v[0])
    assert p.sum() * cell == pytest.approx(1.0, abs=1e-6)
    m2 = [(p * X * X).sum() * cell, (p * X * V).sum() * cell, (p * V * V).sum() * cell]
    assert np.allclose(m2, [2 * t**3 / 3, t**2, 2 * t], rtol=1e-4)
    assert np.allclose(KineticGaussian(t).cov, [[2 * t**3 / 3, t**2], [t**2, 2 * t]])


def test_density_matches_gaussian_law(rng):
    from kinlab.semigroup import gaussian_density_2d
    t = 0.35
    x, v = rng.normal(size=(2, 50))
    assert np.allclose(density_pt(t, x, v), gaussian_density_2d([0, 0], KineticGaussian(t).cov, x, v), rtol=1e-12)
    assert np.allclose(density_pt(t, x, v), density_pt(t, -x, -v), rtol=1e-14)


def test_density_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        density_pt(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        KineticGaussian(-1.0)


def test_free_gaussian_law():
    m, C = free_gaussian_law([1.0, 2.0], np.eye(2), 0.5)
    assert np.allclose(m, [2.0, 2.0])
    A = np.array([[1, 0.5], [0, 1]])
    assert np.allclose(C, A @ A.T + KineticGaussian(0.5).cov)


# --- grid operators -------------------------------------------------------------


def test_apply_pt_identity_and_constants():
    X, V = GRID.mesh()
    f = _bump(X, V)
    assert np.array_equal(apply_Pt_function(f, GRID, 0.0), f)
    ones = np.ones_like(f)
    assert np.allclose(apply_Pt_function(ones, GRID, 0.7), 1.0, atol=1e-13)
    assert np.array_equal(apply_Pt_density(f, GRID, 0.0), f)


def test_apply_pt_matches_gaussian_closed_form():
    X, V = GRID.mesh()
    f = _bump(X, V, 0.0, 0.0)
    t = 0.5
    # P_t f(x, v) = E f(x + tv + X, v + V): Gaussian integral in closed form
    S = np.eye(2) + KineticGaussian(t).cov
    P = np.linalg.inv(S)
    mx, mv = X + t * V, V
    q = P[0, 0] * mx * mx + 2 * P[0, 1] * mx * mv + P[1, 1] * mv * mv
    exact = np.exp(-0.5 * q) / np.sqrt(np.linalg.det(S))
    assert np.abs(apply_Pt_function(f, GRID, t) - exact).max() < 1e-10


def test_aliasing_rejected():
    g = PhysicalGrid(8.0, 8.0, 64, 64)
    X, V = g.mesh()
    f = np.exp(-(X**2) / 0.05 - V**2)
    with pytest.raises(AliasingError):
        apply_Pt_function(f, g, 2.0, sigma_mode="zero")
    with pytest.raises(AliasingError):
        apply_Pt_density(f, g, 2.0, sigma_mode="zero")


def test_semigroup_law(rng):
    X, V = GRID.mesh()
    f = _bump(X, V)
    for t, s in rng.uniform(0.05, 0.6, size=(5, 2)):
        a = apply_Pt_function(f, GRID, t + s)
        b = apply_Pt_function(apply_Pt_function(f, GRID, s), GRID, t)
        assert np.abs(a - b).max() <= 1e-8 * np.abs(f).max()


def test_duality_forward_backward():
    X, V = GRID.mesh()
    f = _bump(X, V, 0.5, 0.2)
    g = _bump(X, V, -0.4, 0.1, 0.7)
    t = 0.4
    lhs = (apply_Pt_function(f, GRID, t) * g).sum()
    rhs = (f * apply_Pt_density(g, GRID, t)).sum()
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_forward_semigroup_is_gaussian_pushforward():
    X, V = GRID.mesh()
    m0, C0 = np.array([0.5, -0.3]), np.diag([0.36, 0.25])
    from kinlab.semigroup import gaussian_density_2d
    rho = gaussian_density_2d(m0, C0, X, V)
    m1, C1 = free_gaussian_law(m0, C0, 0.7)
    out = apply_Pt_density(rho, GRID, 0.7)
    assert np.abs(out - gaussian_density_2d(m1, C1, X, V)).max() < 1e-10


def test_apply_pt_measure_identity_and_single_particle():
    grid = FrequencyGrid.uniform(4, 16, 81, 161)
    x0, v0, t = 0.4, -0.6, 0.5
    mu = measure_char(np.array([[x0, v0]]), [1.0], grid)
    assert np.array_equal(apply_Pt_measure(mu, 0.0).values, mu.values)
    out = apply_Pt_measure(mu, t)
    XI, ETA = grid.mesh()
    exact = np.exp(1j * (XI * (x0 + t * v0) + ETA * v0)) * kernel_G(t, XI, ETA)
    assert np.abs(out.values - exact).max() < 1e-6


def test_single_particle_pushforward_vs_monte_carlo(rng):
    x0, v0, t, n = 0.4, -0.6, 0.5, 200_000
    X, V = KineticGaussian(t).sample(n, rng)
    xs, vs = x0 + t * v0 + X[:, 0], v0 + V[:, 0]
    for xi, eta in [(0.5, 0.5), (1.0, -1.0), (-1.5, 0.25), (0.0, 2.0)]:
        samples = np.exp(1j * (xi * xs + eta * vs))
        exact = np.exp(1j * (xi * (x0 + t * v0) + eta * v0)) * kernel_G(t, xi, eta)
        se = np.sqrt(np.var(samples.real) / n + np.var(samples.imag) / n)
        assert abs(samples.mean() - exact) <= 3 * se + 1e-12


def test_apply_pt_measure_rejects_out_of_band_shear():
    grid = FrequencyGrid.uniform(32, 4, 65, 33)
    mu = SpectralField(grid, np.ones(grid.shape))
    with pytest.raises(AliasingError):
        apply_Pt_measure(mu, 0.5, sigma_mode="zero")


def test_grad_v_examples():
    X, V = GRID.mesh()
    assert np.abs(grad_v_Pt_function(np.ones_like(X), GRID, 0.3)).max() < 1e-12
    window = np.exp(-((X / 10) ** 8) - (V / 10) ** 8)
    gv = grad_v_Pt_function(V * window, GRID, 0.01)
    inner = (np.abs(X) < 2) & (np.abs(V) < 2)
    assert np.abs(gv[inner] - 1.0).max() < 1e-3


def test_grad_v_two_paths_agree():
    X, V = GRID.mesh()
    f = _bump(X, V) * np.cos(X)
    for t in (0.05, 0.3, 0.9):
        a = grad_v_Pt_function(f, GRID, t)
        b = grad_v_Pt_function_direct(f, GRID, t)
        assert np.abs(a - b).max() < 1e-10


def test_grad_v_regularization_rate():
    """sqrt(t) sup |d_v P_t f| <= 2 / sqrt(pi) sup |f| (Gaussian integration by parts)."""
    X, V = GRID.mesh()
    f = np.exp(-(X**2) / 4 - (V**2) / 16) * np.sin(3 * V)
    for t in (0.02, 0.05, 0.1, 0.3, 1.0):
        g = grad_v_Pt_function(f, GRID, t)
        assert np.sqrt(t) * np.abs(g).max() <= 2 / np.sqrt(np.pi) * np.abs(f).max()


def test_evaluate_at_points_matches_grid():
    X, V = GRID.mesh()
    f = _bump(X, V)
    t = 0.4
    i, j = 130, 120
    val = evaluate_Pt_at(f, GRID, t, GRID.x[i], GRID.v[j])
    assert val[0] == pytest.approx(apply_Pt_function(f, GRID, t)[i, j], abs=1e-12)
    pts = trig_interpolate(f, GRID, GRID.x[[i]], GRID.v[[j]])
    assert pts[0] == pytest.approx(f[i, j], abs=1e-12)


# --- Monte Carlo oracle ---------------------------------------------------------


def test_mc_oracle_examples():
    p = KineticPoint((0.5,), (1.5,))
    est, se = semigroup_mc_oracle(lambda x, v: np.ones_like(x), p, 0.7, 1000, 1)
    assert (est, se) == (1.0, 0.0)
    est, se = semigroup_mc_oracle(lambda x, v: x, p, 0.7, 100_000, 2)
    assert abs(est - (0.5 + 0.7 * 1.5)) <= 4 * se
    est, se = semigroup_mc_oracle(lambda x, v: v * v, KineticPoint((0.0,), (0.0,)), 1.0, 100_000, 3)
    assert abs(est - 2.0) <= 3 * se


def test_mc_oracle_rejects_tiny_samples():
    with pytest.raises(ValueError):
        semigroup_mc_oracle(lambda x, v: x, KineticPoint((0.0,), (0.0,)), 1.0, 10, 0)


# --- time regularity of the kernel ------------------------------------------------


def test_time_regularity_trivial_case_and_ordering():
    lhs, rhs = kernel_time_regularity_sides(0.2, 0.7, 0.7, 3.0, -1.0)
    assert lhs == 0.0 and rhs == 0.0
    assert kernel_time_regularity_check(0.2, 0.7, 0.7, 3.0, -1.0)
    with pytest.raises(ValueError):
        kernel_time_regularity_check(0.5, 0.4, 0.9, 1.0, 1.0)
    with pytest.raises(ValueError):
        kernel_increment_envelope(0.1, 0.9, 0.5, 1.0, 1.0)


def test_time_regularity_zero_eta_is_recorded():
    # with eta = 0 the quarter-eta bound has a zero right side while G still moves with xi
    lhs, rhs = kernel_time_regularity_sides(0.0, 0.2, 0.8, 2.0, 0.0)
    assert rhs == 0.0 and lhs > 0.1


def test_quarter_eta_bound_counterexample():
    """A frozen tuple for which |G(t-r) - G(u-r)| exceeds |eta|^2 (t-u) / 4."""
    lhs, rhs = kernel_time_regularity_sides(0.65, 0.686, 0.981, -6.99, -1.19)
    assert lhs == pytest.approx(0.80, abs=0.01)
    assert rhs == pytest.approx(0.10, abs=0.01)
    assert not kernel_time_regularity_check(0.65, 0.686, 0.981, -6.99, -1.19)


def test_endpoint_envelope_holds(rng):
    n = 200_000
    r, u, t = np.sort(rng.uniform(0, 1, size=(n, 3)), axis=1).T
    xi = rng.uniform(-32, 32, n)
    eta = rng.choice([-1, 1], n) * rng.uniform(0.1, 32, n)
    lhs, _ = kernel_time_regularity_sides(r, u, t, xi, eta)
    env = kernel_increment_envelope(r, u, t, xi, eta)
    assert np.all(lhs <= env * (1 + 1e-12) + 1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.floats(-32, 32), st.floats(-32, 32))
def test_endpoint_envelope_property(times, xi, eta):
    r, u, t = sorted(times)
    lhs, _ = kernel_time_regularity_sides(r, u, t, xi, eta)
    assert lhs <= kernel_increment_envelope(r, u, t, xi, eta) * (1 + 1e-12) + 1e-15


# --- the gradient-weight integral -------------------------------------------------


def _changes(values):
    d = np.abs(np.diff(values))
    return d[:-1] / d[1:]


def test_gradient_weight_integral_joint_doubling():
    """Doubling both cutoffs should shrink successive changes at least tenfold beyond the first."""
    vals = [gradient_weight_integral(6.0, (c, c)) for c in (4, 8, 16, 32, 64)]
    ratios = _changes(vals)
    assert np.all(ratios[1:] >= 10.0), f"change ratios {ratios}"


def test_gradient_weight_integral_eta_doubling():
    vals = [gradient_weight_integral(6.0, (32, c)) for c in (2, 4, 8, 16)]
    assert np.all(_changes(vals)[1:] >= 10.0)


def test_gradient_weight_integral_converges():
    vals = [gradient_weight_integral(6.0, (c, c)) for c in (16, 32, 64)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] - vals[1] < 0.5 * (vals[1] - vals[0])
