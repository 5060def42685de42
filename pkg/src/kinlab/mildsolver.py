"""Spectral solver for the kinetic McKean-Vlasov equation in mild form.

    d_t nu + v d_x nu + d_v (nu (Gamma * nu)) = d_v^2 nu.

The forward semigroup of :mod:`kinlab.semigroup` handles the linear part
exactly; the interaction is added by an exponential midpoint rule:

    nu_half = P_{h/2} [nu - (h/2) N(nu)],
    nu_next = P_h nu - h P_{h/2} N(nu_half),        N(nu) = d_v(nu (Gamma * nu)).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .particles import GaussianMixture, InteractionKernel
from .semigroup import PhysicalGrid, apply_Pt_density, apply_Pt_function, grad_v_Pt_function
from .spectral_core import FrequencyGrid, SobolevOrder, SpectralField, dual_norm, spectral_csv

log = logging.getLogger(__name__)

__all__ = [
    "density_csv",
    "char_csv",
    "BoundaryMassError",
    "DensityField",
    "MildRun",
    "SolverConfig",
    "meanfield_term",
    "meanfield_two_mode",
    "div_v",
    "step_mild",
    "solve",
    "density_char",
    "picard_iterate",
    "PicardResult",
    "sup_distance",
    "weak_mild_residual",
]


class BoundaryMassError(RuntimeError):
    """Too much mass reached the outer frame of the periodic box."""


@dataclass(eq=False)
class DensityField:
    """Density values on a :class:`PhysicalGrid` at time ``t``."""

    grid: PhysicalGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_x, self.grid.n_v):
            raise ValueError("density does not match grid")

    @property
    def cell(self) -> float:
        return self.grid.cell

    def mass(self) -> float:
        return float(self.values.sum() * self.cell)

    def boundary_mass(self, frame: float = 0.1) -> float:
        """Mass (of ``|nu|``) within ``frame * 2L`` of the box edge along either axis."""
        g = self.grid
        X, V = g.mesh()
        inner = (np.abs(X) <= g.L_x * (1 - 2 * frame)) & (np.abs(V) <= g.L_v * (1 - 2 * frame))
        return float(np.abs(self.values[~inner]).sum() * self.cell)

    def moments(self) -> tuple:
        X, V = self.grid.mesh()
        w = self.values * self.cell
        m = w.sum()
        mx, mv = (w * X).sum() / m, (w * V).sum() / m
        cxx = (w * (X - mx) ** 2).sum() / m
        cxv = (w * (X - mx) * (V - mv)).sum() / m
        cvv = (w * (V - mv) ** 2).sum() / m
        return np.array([mx, mv]), np.array([[cxx, cxv], [cxv, cvv]])

    @classmethod
    def from_mixture(cls, mixture: GaussianMixture, grid: PhysicalGrid, t: float = 0.0):
        X, V = grid.mesh()
        return cls(grid, mixture.density(X, V), t)


@dataclass(frozen=True)
class SolverConfig:
    """Discretization of the PDE solve.

    ``meanfield`` is ``"auto"`` (two-mode closed form for the sine kernel,
    padded FFT convolution otherwise), ``"fft"`` or ``"two_mode"``.
    ``boundary_tol`` is the largest admissible mass in the outer frame.
    """

    L_x: float = 16.0
    L_v: float = 16.0
    n_x: int = 256
    n_v: int = 256
    dt: float = 1e-2
    sigma_mode: str = "sqrt2"
    meanfield: str = "auto"
    boundary_tol: float = 1e-8
    frame: float = 0.1
    positivity_tol: float = 1e-8

    @property
    def grid(self) -> PhysicalGrid:
        return PhysicalGrid(self.L_x, self.L_v, self.n_x, self.n_v)

    def refined(self) -> "SolverConfig":
        from dataclasses import replace

        return replace(self, dt=self.dt / 2)

    def describe(self) -> dict:
        return {"L_x": self.L_x, "L_v": self.L_v, "n_x": self.n_x, "n_v": self.n_v, "dt": self.dt,
                "sigma_mode": self.sigma_mode, "meanfield": self.meanfield}


# ---------------------------------------------------------------------------
# mean field and nonlinearity
# ---------------------------------------------------------------------------


def meanfield_two_mode(nu: DensityField, K: float) -> np.ndarray:
    """``(Gamma * nu)(x) = -K [sin x int cos y nu - cos x int sin y nu]`` for the sine kernel."""
    X, _ = nu.grid.mesh()
    w = nu.values * nu.cell
    C = float((w * np.cos(X)).sum())
    S = float((w * np.sin(X)).sum())
    return -K * (np.sin(X) * C - np.cos(X) * S)


def _padded_kernel_fft(kernel: InteractionKernel, grid: PhysicalGrid) -> np.ndarray:
    nx, nv = grid.n_x, grid.n_v
    # differences x_i - y_j range over (-2L, 2L); sample them in FFT order
    jx = np.fft.fftfreq(2 * nx, 1.0 / (2 * nx))
    jv = np.fft.fftfreq(2 * nv, 1.0 / (2 * nv))
    DX, DV = np.meshgrid(jx * grid.dx, jv * grid.dv, indexing="ij")
    g = kernel.gamma(DX[..., None], DV[..., None])[..., 0]
    return np.fft.rfft2(g)


_KCACHE: dict = {}


def meanfield_term(nu: DensityField, kernel: InteractionKernel, method: str = "auto") -> np.ndarray:
    """``(Gamma * nu)(x, v) = int gamma(x - y, v - w) nu(y, w) dy dw`` on the grid.

    The ``"fft"`` path is a zero-padded (linear, non-periodic) discrete
    convolution, so kernels of unbounded support produce no wrap-around.
    """
    if kernel.is_zero:
        return np.zeros_like(nu.values)
    if method == "auto":
        method = "two_mode" if kernel.fourier_form == "two_mode_sine" else "fft"
    if method == "two_mode":
        if kernel.fourier_form != "two_mode_sine":
            raise ValueError("two-mode evaluation needs the sine kernel")
        return meanfield_two_mode(nu, kernel.params["K"])
    if method != "fft":
        raise ValueError(f"unknown mean-field method {method!r}")
    g = nu.grid
    key = (id(kernel), g)
    if key not in _KCACHE:
        if len(_KCACHE) > 8:
            _KCACHE.clear()
        _KCACHE[key] = (kernel, _padded_kernel_fft(kernel, g))
    kf = _KCACHE[key][1]
    shape = (2 * g.n_x, 2 * g.n_v)
    conv = np.fft.irfft2(np.fft.rfft2(nu.values, s=shape) * kf, s=shape)
    return conv[: g.n_x, : g.n_v] * nu.cell


def div_v(values: np.ndarray, grid: PhysicalGrid) -> np.ndarray:
    """Spectral ``d/dv`` (Nyquist mode dropped, so the integral is exactly zero)."""
    F = np.fft.rfft(values, axis=1)
    eta = 2 * np.pi * np.fft.rfftfreq(grid.n_v, grid.dv)
    F *= 1j * eta[None, :]
    if grid.n_v % 2 == 0:
        F[:, -1] = 0.0
    return np.fft.irfft(F, n=grid.n_v, axis=1)


def _nonlinearity(values: np.ndarray, grid: PhysicalGrid, kernel: InteractionKernel, method: str):
    b = meanfield_term(DensityField(grid, values), kernel, method)
    return div_v(values * b, grid)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def step_mild(nu: DensityField, dt: float, kernel: InteractionKernel, config: SolverConfig = SolverConfig(),
              diagnostics: Optional[dict] = None) -> DensityField:
    """One exponential-midpoint step (second order, mass conserved structurally)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = nu.grid
    sm = config.sigma_mode
    P = lambda f, t: apply_Pt_density(f, g, t, sm)  # noqa: E731
    if kernel.is_zero:
        new = P(nu.values, dt)
    else:
        n0 = _nonlinearity(nu.values, g, kernel, config.meanfield)
        half = P(nu.values - 0.5 * dt * n0, 0.5 * dt)
        nh = _nonlinearity(half, g, kernel, config.meanfield)
        new = P(nu.values, dt) - dt * P(nh, 0.5 * dt)
    out = DensityField(g, new, nu.t + dt)
    _monitor(out, config, diagnostics)
    return out


def _monitor(nu: DensityField, config: SolverConfig, diagnostics: Optional[dict]) -> None:
    peak = np.abs(nu.values).max()
    low = nu.values.min()
    if low < -config.positivity_tol * peak:
        log.warning("negative density %.3e at t=%.4f", low, nu.t)
        if diagnostics is not None:
            diagnostics.setdefault("positivity", []).append((nu.t, float(low)))
    bm = nu.boundary_mass(config.frame)
    if diagnostics is not None:
        diagnostics["max_boundary_mass"] = max(diagnostics.get("max_boundary_mass", 0.0), bm)
    if bm > config.boundary_tol:
        raise BoundaryMassError(f"boundary mass {bm:.3e} exceeds {config.boundary_tol:.1e} at t={nu.t:.4f}")


def density_char(nu: DensityField, fgrid: FrequencyGrid) -> SpectralField:
    """``int exp(i(xi x + eta v)) nu(x, v) dx dv`` by direct (non-periodic) quadrature.

    Frequencies outside the physical grid's Nyquist box are set to zero.
    """
    g = nu.grid
    if fgrid.symmetric:
        h = fgrid.xi.size // 2
        xi = fgrid.xi[h:]
    else:
        xi = fgrid.xi
    ex = np.exp(1j * np.outer(xi, g.x))
    ev = np.exp(1j * np.outer(g.v, fgrid.eta))
    part = ex @ (nu.values * nu.cell) @ ev
    part *= g.band_mask(xi, fgrid.eta)
    if fgrid.symmetric:
        full = np.empty(fgrid.shape, dtype=complex)
        full[h:] = part
        full[:h] = np.conj(part[1:][::-1, ::-1])
        part = full
    return SpectralField(fgrid, part)


@dataclass(eq=False)
class MildRun:
    """Snapshots ``(t, density, nu_hat)`` of one solve."""

    times: np.ndarray
    densities: list
    chars: list
    config: SolverConfig
    kernel: InteractionKernel
    fgrid: Optional[FrequencyGrid] = None
    diagnostics: dict = field(default_factory=dict)

    def char_at(self, k: int) -> SpectralField:
        return self.chars[k]

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12:
            raise KeyError(f"time {t} was not recorded")
        return k


def solve(nu0: DensityField, T: float, kernel: InteractionKernel, config: SolverConfig = SolverConfig(),
          snapshot_times: Optional[Sequence[float]] = None, fgrid: Optional[FrequencyGrid] = None) -> MildRun:
    """March :func:`step_mild` from ``nu0`` to ``T``.

    Substeps are shortened where needed so that every snapshot time is hit
    exactly.  ``nu_hat`` is recorded on ``fgrid`` (if given) by direct
    quadrature.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    if snapshot_times is None:
        snapshot_times = [0.0, T]
    ts = np.unique(np.clip(np.asarray(snapshot_times, dtype=float), 0.0, T))
    diag: dict = {}
    nu = DensityField(nu0.grid, nu0.values.copy(), 0.0)
    _monitor(nu, config, diag)
    dens, chars = [], []
    t = 0.0
    for target in ts:
        while target - t > 1e-13:
            h = min(config.dt, target - t)
            # avoid a sliver step right before the target
            if target - t - h < 1e-3 * config.dt:
                h = target - t
            nu = step_mild(nu, h, kernel, config, diag)
            t = nu.t
        nu.t = float(target)
        t = float(target)
        dens.append(nu)
        chars.append(density_char(nu, fgrid) if fgrid is not None else None)
    return MildRun(ts, dens, chars, config, kernel, fgrid, diag)


def sup_distance(a: MildRun, b: MildRun, order: SobolevOrder) -> float:
    """``max_t || nu^a_t - nu^b_t ||_{-s}`` over common snapshot times."""
    out = 0.0
    for k, t in enumerate(a.times):
        j = b.index_of(t)
        out = max(out, dual_norm(a.chars[k] - b.chars[j], order))
    return out


# ---------------------------------------------------------------------------
# Picard iteration on the global mild form
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class PicardResult:
    run: MildRun
    converged: bool
    iterations: int
    history: list
    start: str


def picard_iterate(nu0: DensityField, T: float, kernel: InteractionKernel, tol: float = 1e-7,
                   max_iter: int = 30, n_times: int = 16, config: SolverConfig = SolverConfig(),
                   fgrid: Optional[FrequencyGrid] = None, order: SobolevOrder = SobolevOrder(6, 1),
                   start: str = "free") -> PicardResult:
    """Fixed-point iteration of the mild equation on ``n_times + 1`` equispaced times.

    ``nu^{k+1}_t = P_t nu_0 - int_0^t P_{t-r} N(nu^k_r) dr`` with the
    trapezoid rule in ``r``.  Iteration stops when successive iterates differ
    by less than ``tol`` in ``sup_t`` dual norm.  ``start`` is ``"free"``
    (``P_t nu_0``) or ``"frozen"`` (``nu_0`` at every time).
    """
    if fgrid is None:
        fgrid = FrequencyGrid.uniform()
    g = nu0.grid
    sm = config.sigma_mode
    ts = np.linspace(0.0, T, n_times + 1)
    free = [apply_Pt_density(nu0.values, g, t, sm) for t in ts]
    if start == "free":
        cur = [f.copy() for f in free]
    elif start == "frozen":
        cur = [nu0.values.copy() for _ in ts]
    else:
        raise ValueError("start is 'free' or 'frozen'")
    cur_hat = [density_char(DensityField(g, c), fgrid) for c in cur]
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if kernel.is_zero:
            nxt = [f.copy() for f in free]
        else:
            Ns = [_nonlinearity(c, g, kernel, config.meanfield) for c in cur]
            nxt = []
            for i, t in enumerate(ts):
                acc = free[i].copy()
                if i > 0:
                    h = ts[1] - ts[0]
                    for j in range(i + 1):
                        wj = 0.5 * h if j in (0, i) else h
                        acc -= wj * apply_Pt_density(Ns[j], g, t - ts[j], sm)
                nxt.append(acc)
        nxt_hat = [density_char(DensityField(g, c), fgrid) for c in nxt]
        diff = max(dual_norm(a - b, order) for a, b in zip(nxt_hat, cur_hat))
        history.append(diff)
        cur, cur_hat = nxt, nxt_hat
        if diff < tol:
            converged = True
            break
    dens = [DensityField(g, c, t) for c, t in zip(cur, ts)]
    run = MildRun(ts, dens, cur_hat, config, kernel, fgrid)
    if not converged:
        log.warning("Picard iteration stopped after %d iterations; residuals %s", it, history)
    return PicardResult(run, converged, it, history, start)


# ---------------------------------------------------------------------------
# weak-mild identity
# ---------------------------------------------------------------------------


def weak_mild_residual(run: MildRun, f_values: np.ndarray, t_index: int) -> tuple:
    """Both sides of the weak-mild identity for a grid test function.

    Returns ``(lhs, rhs)`` with ``lhs = <nu_t, f>`` and
    ``rhs = <nu_0, P_t f> + int_0^t <nu_r, d_v P_{t-r} f (Gamma * nu_r)> dr``,
    the time integral taken with Simpson's rule over the recorded snapshots
    (composite trapezoid when the count is even).
    """
    g = run.densities[0].grid
    sm = run.config.sigma_mode
    t = run.times[t_index]
    cell = g.cell
    lhs = float((run.densities[t_index].values * f_values).sum() * cell)
    rhs0 = float((run.densities[0].values * apply_Pt_function(f_values, g, t, sm)).sum() * cell)
    rs = run.times[: t_index + 1]
    vals = []
    for k, r in enumerate(rs):
        nu = run.densities[k]
        b = meanfield_term(nu, run.kernel, run.config.meanfield)
        gv = grad_v_Pt_function(f_values, g, t - r, sm)
        vals.append(float((nu.values * gv * b).sum() * cell))
    vals = np.asarray(vals)
    if rs.size < 2:
        integral = 0.0
    else:
        from scipy.integrate import simpson

        integral = float(simpson(vals, x=rs))
    return lhs, rhs0 + integral


def density_csv(run: MildRun) -> str:
    """CSV text with columns ``t, x, v, density`` for every snapshot of ``run``."""
    rows = ["t,x,v,density"]
    for nu in run.densities:
        X, V = nu.grid.mesh()
        for a, b, c in zip(X.ravel(), V.ravel(), nu.values.ravel()):
            rows.append(f"{float(nu.t)!r},{float(a)!r},{float(b)!r},{float(c)!r}")
    return "\n".join(rows) + "\n"


def char_csv(run: MildRun) -> str:
    """CSV text ``t, xi, eta, re, im`` of the recorded ``nu_hat`` snapshots."""
    if run.fgrid is None:
        raise ValueError("the run recorded no characteristic functions")
    return spectral_csv(zip(run.times, run.chars))
