"""The free kinetic semigroup and its Gaussian kernel.

``P_t f(x, v) = E f(x + t v + X_t, v + V_t)`` with ``(X_t, V_t) = (sqrt2 int_0^t B, sqrt2 B_t)``.
In Fourier variables the noise acts through

    G(t, xi, eta) = exp(-t^3 |xi|^2 / 3 - t^2 <xi, eta> - t |eta|^2)

and the transport ``x -> x + t v`` shears frequencies.  Grid operators below
realize the shear exactly with a phase multiplication in the mixed
``(xi, v)`` representation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral_core import FrequencyGrid, KineticPoint, SpectralField, effective_weights

__all__ = [
    "KineticGaussian",
    "PhysicalGrid",
    "AliasingError",
    "kernel_G",
    "density_pt",
    "apply_Pt_function",
    "apply_Pt_density",
    "apply_Pt_measure",
    "grad_v_Pt_function",
    "grad_v_Pt_function_direct",
    "evaluate_Pt_at",
    "trig_interpolate",
    "semigroup_mc_oracle",
    "kernel_time_regularity_check",
    "kernel_time_regularity_sides",
    "kernel_increment_envelope",
    "gradient_weight_integral",
    "free_gaussian_law",
    "gaussian_density_2d",
]


class AliasingError(ValueError):
    """The sheared spectrum leaves the band resolved by the grid."""


def kernel_G(t, xi, eta, sigma_mode: str = "sqrt2"):
    """Characteristic function of the kinetic Gaussian increment.

    Broadcasts over array arguments (``d = 1``).  ``sigma_mode="zero"``
    returns ones (pure transport).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if sigma_mode == "zero":
        out = np.ones(np.broadcast(t, xi, eta).shape)
    else:
        out = np.exp(-(t**3) / 3.0 * xi**2 - t**2 * xi * eta - t * eta**2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KineticGaussian:
    """Law of ``(X_t, V_t)`` per component (``sigma = sqrt 2``)."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")

    @property
    def cov(self) -> np.ndarray:
        t = self.t
        return np.array([[2 * t**3 / 3, t**2], [t**2, 2 * t]])

    @property
    def det(self) -> float:
        return self.t**4 / 3

    def sample(self, n: int, rng: np.random.Generator, d: int = 1) -> tuple:
        """Exact draws, returned as arrays of shape ``(n, d)``."""
        L = np.linalg.cholesky(self.cov)
        z = rng.standard_normal((2, n, d))
        X = L[0, 0] * z[0]
        V = L[1, 0] * z[0] + L[1, 1] * z[1]
        return X, V


def free_gaussian_law(mean, cov, t: float, sigma_mode: str = "sqrt2") -> tuple:
    """Mean and covariance at time ``t`` of the free kinetic flow started from ``N(mean, cov)`` (``d = 1``).

    ``(x, v) -> (x + t v, v)`` acts linearly, and the noise adds
    :attr:`KineticGaussian.cov` independently.
    """
    A = np.array([[1.0, t], [0.0, 1.0]])
    m = A @ np.asarray(mean, dtype=float)
    C = A @ np.asarray(cov, dtype=float) @ A.T
    if sigma_mode == "sqrt2" and t > 0:
        C = C + KineticGaussian(t).cov
    return m, C


def gaussian_density_2d(mean, cov, x, v) -> np.ndarray:
    """Bivariate normal density in ``(x, v)``."""
    C = np.asarray(cov, dtype=float)
    P = np.linalg.inv(C)
    dx = np.asarray(x, dtype=float) - mean[0]
    dv = np.asarray(v, dtype=float) - mean[1]
    q = P[0, 0] * dx * dx + 2 * P[0, 1] * dx * dv + P[1, 1] * dv * dv
    return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(C)))


def density_pt(t: float, x, v, d: int = 1):
    """Density of ``(X_t, V_t)``.

    ``p_t(x, v) = (4 pi^2 t^4 / 3)^{-d/2} exp(-(3|x|^2 + |3x - 2tv|^2) / (4 t^3))``;
    the prefactor is ``(2 pi)^{-d} det(Sigma_t)^{-1/2}`` with ``det Sigma_t = (t^4 / 3)^d``.
    For ``d = 1`` the arguments broadcast; for ``d > 1`` the last axis holds
    the components.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if d == 1:
        q = 3 * x**2 + (3 * x - 2 * t * v) ** 2
    else:
        q = 3 * np.sum(x**2, axis=-1) + np.sum((3 * x - 2 * t * v) ** 2, axis=-1)
    return (4 * np.pi**2 * t**4 / 3) ** (-d / 2) * np.exp(-q / (4 * t**3))


@dataclass(frozen=True)
class PhysicalGrid:
    """Periodic box ``[-L_x, L_x) x [-L_v, L_v)`` with ``n_x x n_v`` nodes."""

    L_x: float
    L_v: float
    n_x: int
    n_v: int
    periodic: bool = True

    def __post_init__(self):
        for n in (self.n_x, self.n_v):
            if n < 2 or n & (n - 1):
                raise ValueError("grid sizes must be powers of two")
        if not (self.L_x > 0 and self.L_v > 0):
            raise ValueError("box half-widths must be positive")
        if not self.periodic:
            raise ValueError("only periodic boxes are supported")

    @property
    def dx(self) -> float:
        return 2 * self.L_x / self.n_x

    @property
    def dv(self) -> float:
        return 2 * self.L_v / self.n_v

    @property
    def cell(self) -> float:
        return self.dx * self.dv

    @property
    def x(self) -> np.ndarray:
        return -self.L_x + self.dx * np.arange(self.n_x)

    @property
    def v(self) -> np.ndarray:
        return -self.L_v + self.dv * np.arange(self.n_v)

    def mesh(self):
        return np.meshgrid(self.x, self.v, indexing="ij")

    @property
    def xi(self) -> np.ndarray:
        """Angular frequencies in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n_x, self.dx)

    @property
    def eta(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n_v, self.dv)

    @property
    def nyquist(self) -> tuple:
        return (np.pi / self.dx, np.pi / self.dv)

    def band_mask(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """``True`` on frequencies the grid resolves; quadrature beyond the
        Nyquist box only returns aliases of in-band values."""
        nx, nv = self.nyquist
        return (np.abs(np.asarray(xi))[:, None] < nx) & (np.abs(np.asarray(eta))[None, :] < nv)

    def doubled(self) -> "PhysicalGrid":
        return PhysicalGrid(self.L_x, self.L_v, 2 * self.n_x, 2 * self.n_v)


# ---------------------------------------------------------------------------
# grid operators
# ---------------------------------------------------------------------------

_ALIAS_TOL = 1e-12


def _check_band(spec: np.ndarray, grid: PhysicalGrid, shift: np.ndarray, tol: float) -> None:
    amp = np.abs(spec)
    top = amp.max()
    if top == 0:
        return
    XI = grid.xi[:, None]
    ETA = grid.eta[None, :]
    live = amp > tol * top
    reach = np.abs(ETA + shift * XI)
    if np.any(reach[live] > grid.nyquist[1] * (1 + 1e-12)):
        raise AliasingError(
            f"sheared frequency {reach[live].max():.3g} exceeds the v-band {grid.nyquist[1]:.3g}")


def _backward(f_values: np.ndarray, grid: PhysicalGrid, t: float, sigma_mode: str,
              grad: bool, tol: float) -> np.ndarray:
    f = np.asarray(f_values, dtype=float)
    if f.shape != (grid.n_x, grid.n_v):
        raise ValueError("field does not match grid")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite field")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0 and not grad:
        return f.copy()
    XI = grid.xi[:, None]
    ETA = grid.eta[None, :]
    F = np.fft.fft2(f) * kernel_G(t, XI, ETA, sigma_mode)
    if grad:
        F = F * 1j * (ETA + t * XI)
    _check_band(F, grid, t, tol)
    F = np.fft.ifft(F, axis=1)
    F *= np.exp(1j * t * XI * grid.v[None, :])
    return np.fft.ifft(F, axis=0).real


def apply_Pt_function(f_values: np.ndarray, grid: PhysicalGrid, t: float,
                      sigma_mode: str = "sqrt2", alias_tol: float = _ALIAS_TOL) -> np.ndarray:
    """Backward semigroup ``P_t f`` on a periodic grid.

    Steps: 2-D FFT, multiply by ``G(t, xi, eta)``, inverse FFT in ``v``,
    multiply by ``exp(i t xi v)`` (the transport ``x -> x + t v``), inverse
    FFT in ``x``.  Raises :class:`AliasingError` if the sheared spectrum
    leaves the ``v``-band.
    """
    return _backward(f_values, grid, t, sigma_mode, False, alias_tol)


def grad_v_Pt_function(f_values: np.ndarray, grid: PhysicalGrid, t: float,
                       sigma_mode: str = "sqrt2", alias_tol: float = _ALIAS_TOL) -> np.ndarray:
    """``d/dv P_t f``: apply ``P_t`` then differentiate spectrally in ``v``."""
    g = apply_Pt_function(f_values, grid, t, sigma_mode, alias_tol)
    G = np.fft.fft(g, axis=1) * (1j * grid.eta[None, :])
    if grid.n_v % 2 == 0:
        G[:, grid.n_v // 2] = 0.0
    return np.fft.ifft(G, axis=1).real


def grad_v_Pt_function_direct(f_values: np.ndarray, grid: PhysicalGrid, t: float,
                              sigma_mode: str = "sqrt2", alias_tol: float = _ALIAS_TOL) -> np.ndarray:
    """``d/dv P_t f`` through the multiplier ``i(eta + t xi) G`` before the shear."""
    return _backward(f_values, grid, t, sigma_mode, True, alias_tol)


def apply_Pt_density(nu_values: np.ndarray, grid: PhysicalGrid, t: float,
                     sigma_mode: str = "sqrt2", alias_tol: float = _ALIAS_TOL) -> np.ndarray:
    """Forward (Fokker-Planck) semigroup acting on a density on the grid.

    Transport first (phase ``exp(-i t xi v)`` in the ``(xi, v)``
    representation), then the Gaussian convolution (multiplier ``G``).  This
    is the grid adjoint of :func:`apply_Pt_function`.
    """
    nu = np.asarray(nu_values, dtype=float)
    if nu.shape != (grid.n_x, grid.n_v):
        raise ValueError("field does not match grid")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return nu.copy()
    XI = grid.xi[:, None]
    ETA = grid.eta[None, :]
    F = np.fft.fft(nu, axis=0)
    _check_band(np.fft.fft(F, axis=1), grid, -t, alias_tol)
    F *= np.exp(-1j * t * XI * grid.v[None, :])
    F = np.fft.fft(F, axis=1)
    F *= kernel_G(t, XI, ETA, sigma_mode)
    return np.fft.ifft2(F).real


def apply_Pt_measure(nu_hat: SpectralField, t: float, sigma_mode: str = "sqrt2",
                     alias_tol: float = _ALIAS_TOL) -> SpectralField:
    """Forward action on characteristic functions: ``G(t, xi, eta) nu_hat(xi, eta + t xi)``.

    The shifted argument is off-grid in general, so ``nu_hat`` is interpolated
    along ``eta`` with a cubic spline; values whose sheared argument leaves the
    grid while carrying more than ``alias_tol`` of the peak are rejected.
    Prefer :func:`apply_Pt_density` or closed-form characteristic functions
    when exactness matters.
    """
    from scipy.interpolate import CubicSpline

    if t < 0:
        raise ValueError("t must be nonnegative")
    grid = nu_hat.grid
    if t == 0:
        return SpectralField(grid, nu_hat.values.copy())
    XI, ETA = grid.mesh()
    target = ETA + t * XI
    H = grid.cutoffs[1]
    out = np.zeros(grid.shape, dtype=complex)
    G = kernel_G(t, XI, ETA, sigma_mode)
    inside = np.abs(target) <= grid.eta[-1]
    for i in range(grid.xi.size):
        row = nu_hat.values[i]
        spl = CubicSpline(grid.eta, row)
        m = inside[i]
        out[i, m] = spl(target[i, m])
    if np.any(~inside & (G > alias_tol)):
        raise AliasingError(f"shear t*Xi = {t * grid.cutoffs[0]:.3g} leaves the eta band {H:.3g}")
    return SpectralField(grid, G * out)


def trig_interpolate(values: np.ndarray, grid: PhysicalGrid, x, v) -> np.ndarray:
    """Evaluate the trigonometric interpolant of a grid function at arbitrary points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    F = np.fft.fft2(values) / (grid.n_x * grid.n_v)
    return _eval_series(F, grid, x, v)


def _eval_series(F: np.ndarray, grid: PhysicalGrid, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Nyquist modes are split symmetrically so the interpolant is real
    xi = grid.xi.copy()
    eta = grid.eta.copy()
    F = F.copy()
    if grid.n_x % 2 == 0:
        k = grid.n_x // 2
        F = np.concatenate([F, 0.5 * F[k:k + 1]], axis=0)
        F[k] *= 0.5
        xi = np.append(xi, -xi[k])
    if grid.n_v % 2 == 0:
        k = grid.n_v // 2
        F = np.concatenate([F, 0.5 * F[:, k:k + 1]], axis=1)
        F[:, k] *= 0.5
        eta = np.append(eta, -eta[k])
    ex = np.exp(1j * np.outer(x + grid.L_x, xi))
    ev = np.exp(1j * np.outer(v + grid.L_v, eta))
    return np.einsum("pi,ij,pj->p", ex, F, ev).real


def evaluate_Pt_at(f_values: np.ndarray, grid: PhysicalGrid, t: float, x, v,
                   grad: bool = False, sigma_mode: str = "sqrt2") -> np.ndarray:
    """``P_t f`` (or ``d/dv P_t f``) at arbitrary points with the exact continuous shear.

    Uses the trigonometric interpolant of ``f`` and evaluates
    ``sum_k F_k G(t, xi, eta) [i(eta + t xi)] exp(i(xi (x + t v) + eta v))``
    directly, so no second grid round trip is involved.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    F = np.fft.fft2(f_values) / (grid.n_x * grid.n_v)
    XI = grid.xi[:, None]
    ETA = grid.eta[None, :]
    F = F * kernel_G(t, XI, ETA, sigma_mode)
    if grad:
        F = F * 1j * (ETA + t * XI)
    # the x-phase is taken at x + t v; the origin offset of the box enters both
    xs = x + t * v
    return _eval_series(F, grid, xs, v)


# ---------------------------------------------------------------------------
# Monte Carlo oracle and kernel checks
# ---------------------------------------------------------------------------


def semigroup_mc_oracle(f: Callable, p: KineticPoint, t: float, n: int, seed) -> tuple:
    """Monte Carlo estimate of ``P_t f(p)`` with its standard error.

    ``f`` takes arrays ``x, v`` of shape ``(n, d)`` (or ``(n,)`` for ``d = 1``)
    and returns ``n`` values.
    """
    if n < 100:
        raise ValueError("need at least 100 samples")
    if not isinstance(p, KineticPoint):
        p = KineticPoint(*p)
    if t < 0:
        raise ValueError("t must be nonnegative")
    rng = np.random.default_rng(seed)
    if t == 0:
        X = np.zeros((n, p.d))
        V = np.zeros((n, p.d))
    else:
        X, V = KineticGaussian(t).sample(n, rng, p.d)
    xs = p.x + t * p.v + X
    vs = p.v + V
    if p.d == 1:
        xs, vs = xs[:, 0], vs[:, 0]
    vals = np.asarray(f(xs, vs), dtype=float).reshape(n)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


def kernel_time_regularity_sides(r: float, u: float, t: float, xi, eta) -> tuple:
    """``(|G(t-r) - G(u-r)|, |eta|^2 (t-u) / 4)``; requires ``0 <= r <= u <= t``."""
    r, u, t = (np.asarray(a, dtype=float) for a in (r, u, t))
    if np.any(r < 0) or np.any(r > u) or np.any(u > t):
        raise ValueError("need 0 <= r <= u <= t")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    lhs = np.abs(kernel_G(t - r, xi, eta) - kernel_G(u - r, xi, eta))
    rhs = 0.25 * eta**2 * (t - u)
    return lhs, rhs


def kernel_time_regularity_check(r: float, u: float, t: float, xi, eta):
    """Whether ``|G(t-r) - G(u-r)| <= |eta|^2 (t-u) / 4`` holds (vectorized)."""
    lhs, rhs = kernel_time_regularity_sides(r, u, t, xi, eta)
    out = lhs <= rhs
    return bool(out) if np.ndim(out) == 0 else out


def kernel_increment_envelope(r: float, u: float, t: float, xi, eta):
    """``(t - u) max(|eta + (u-r) xi|^2, |eta + (t-r) xi|^2)``, a bound on ``|G(t-r) - G(u-r)|``.

    ``-log G(tau) = int_0^tau |eta + s xi|^2 ds`` and ``|e^-a - e^-b| <= |a - b|``;
    the integrand is convex in ``s``, so its maximum on ``[u-r, t-r]`` sits at an endpoint.
    """
    r, u, t = (np.asarray(a, dtype=float) for a in (r, u, t))
    if np.any(r < 0) or np.any(r > u) or np.any(u > t):
        raise ValueError("need 0 <= r <= u <= t")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return (t - u) * np.maximum((eta + (u - r) * xi) ** 2, (eta + (t - r) * xi) ** 2)


def gradient_weight_integral(s: float, cutoffs, spacing: float = 0.25) -> float:
    """``int_{box} w_{-s}(xi, eta) (|eta|^2 + |eta|^4)`` on ``[-Xi, Xi] x [-H, H]``.

    Trapezoid rule with the cusp-corrected weights of
    :func:`~kinlab.spectral_core.effective_weights` at the given node spacing.
    """
    Xi, H = float(cutoffs[0]), float(cutoffs[1])
    nx = 2 * int(round(Xi / spacing)) + 1
    ne = 2 * int(round(H / spacing)) + 1
    grid = FrequencyGrid.uniform(Xi, H, nx, ne)
    W = effective_weights(grid, s)
    e2 = grid.eta[None, :] ** 2
    return float(np.sum(W * (e2 + e2 * e2)))
