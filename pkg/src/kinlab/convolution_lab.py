"""The stochastic convolution z^N and the mild identity for the empirical measure.

For a test function ``f`` and ``psi_r = P_{t-r} f`` the particle system satisfies

    <nu^N_t, f> = <nu^N_0, P_t f> + int_0^t <nu^N_r, d_v psi_r (Gamma * nu^N_r)> dr + z^N_t(f),
    z^N_t(f) = (sqrt2 / N) sum_i int_0^t d_v psi_r(x^i_r, v^i_r) dB^i_r.

On stored paths the Ito integral is the left-point sum over steps.  Its
Fourier representation, with ``tau = t - t_m``, is

    Z_t(xi, eta) = (i sqrt2 / N) sum_{i, m} exp(i[xi (x + tau v) + eta v]) (eta + tau xi) G(tau, xi, eta) dB,

so that ``z^N_t(f) = (2 pi)^{-2} int f_hat Z_t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .particles import EnsemblePath, drift_pairwise
from .semigroup import PhysicalGrid, _eval_series, apply_Pt_function, grad_v_Pt_function, kernel_G, trig_interpolate
from .spectral_core import (FrequencyGrid, SobolevOrder, SpectralField, _cusp_row_correction, dual_norm,
                            sobolev_weight, spectral_csv)

SQRT2 = np.sqrt(2.0)

__all__ = [
    "ZAccumulator",
    "ZField",
    "z_field_at",
    "z_pairing",
    "z_direct",
    "z_sup_dual_norm",
    "z_norms_comoving",
    "function_transform",
    "mild_identity_residual",
    "MildIdentityTerms",
]


@dataclass(eq=False)
class ZAccumulator:
    """Per-step integrand data of the stochastic convolution.

    Holds the full-resolution states and increments of one path (requires
    ``store="all"``), the snapshot step indices and the frequency grid.
    """

    path: EnsemblePath
    snapshots: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self):
        p = self.path
        if p.stored.size != p.steps + 1:
            raise ValueError("the accumulator needs states at every step (store='all')")
        if p.d != 1:
            raise ValueError("frequency grids are implemented for d = 1")
        self.snapshots = np.unique(np.asarray(self.snapshots, dtype=int))
        if self.snapshots.size and (self.snapshots[0] < 0 or self.snapshots[-1] > p.steps):
            raise ValueError("snapshot outside the path")

    @classmethod
    def from_path(cls, path: EnsemblePath, grid: FrequencyGrid, snapshots=None) -> "ZAccumulator":
        snaps = np.arange(path.steps + 1) if snapshots is None else snapshots
        return cls(path, snaps, grid)

    def check(self, step_index: int) -> None:
        if step_index not in set(self.snapshots.tolist()):
            raise KeyError(f"step {step_index} is not a recorded snapshot")


@dataclass(eq=False)
class ZField:
    """``Z_t`` on a frequency grid."""

    t: float
    field: SpectralField

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def to_csv(self) -> str:
        """Columns ``t, xi, eta, re, im``."""
        return spectral_csv([(self.t, self.field)])


def _half_rows(grid: FrequencyGrid):
    if grid.symmetric:
        h = grid.xi.size // 2
        return grid.xi[h:], h
    return grid.xi, None


def _unfold(part: np.ndarray, grid: FrequencyGrid, h: Optional[int]) -> np.ndarray:
    if h is None:
        return part
    full = np.empty(grid.shape, dtype=complex)
    full[h:] = part
    full[:h] = np.conj(part[1:][::-1, ::-1])
    return full


def z_field_at(acc: ZAccumulator, step_index: int, scale: float = 1.0) -> ZField:
    """``Z_t`` at a recorded snapshot (``t = t_{step_index}``) by direct summation.

    Cost is ``O(nodes * N * steps)``; each step is one separable product
    ``E_x^T diag(dB) E_v``.  Only ``xi >= 0`` rows are formed on symmetric
    grids (``Z`` is the transform of a real distribution).
    """
    acc.check(step_index)
    p = acc.path
    g = acc.grid
    t = p.times[step_index]
    xi, h = _half_rows(g)
    XI = xi[:, None]
    ETA = g.eta[None, :]
    out = np.zeros((xi.size, g.eta.size), dtype=complex)
    for m in range(step_index):
        tau = t - p.times[m]
        x = p.x[m, :, 0]
        v = p.v[m, :, 0]
        dB = p.dB[m, :, 0] * scale
        if not np.any(dB):
            continue
        ex = np.exp(1j * np.outer(xi, x + tau * v)) * dB
        ev = np.exp(1j * np.outer(v, g.eta))
        S = ex @ ev
        out += S * (ETA + tau * XI) * kernel_G(tau, XI, ETA)
    out *= 1j * SQRT2 / p.N
    return ZField(float(t), SpectralField(g, _unfold(out, g, h)))


def function_transform(f_values: np.ndarray, pgrid: PhysicalGrid, fgrid: FrequencyGrid) -> SpectralField:
    """``f_hat(xi, eta) = int exp(-i(xi x + eta v)) f`` by direct quadrature on ``fgrid``.

    Zero outside the Nyquist box of ``pgrid``.
    """
    ex = np.exp(-1j * np.outer(fgrid.xi, pgrid.x))
    ev = np.exp(-1j * np.outer(pgrid.v, fgrid.eta))
    vals = ex @ (np.asarray(f_values, float) * pgrid.cell) @ ev
    return SpectralField(fgrid, vals * pgrid.band_mask(fgrid.xi, fgrid.eta))


def z_pairing(zf: ZField, f_hat: SpectralField) -> float:
    """``z_t(f) = (2 pi)^{-2} int f_hat Z_t`` (plain quadrature weights)."""
    g = zf.field.grid
    if f_hat.grid is not g:
        raise ValueError("fields live on different grids")
    val = (2 * np.pi) ** (-2) * np.sum(g.weights * f_hat.values * zf.values)
    return float(val.real)


def z_direct(path: EnsemblePath, f_values: np.ndarray, pgrid: PhysicalGrid, step_index: int) -> float:
    """Direct Ito sum ``(sqrt2/N) sum_{i,m} d_v P_{t-t_m} f (x_m, v_m) dB_m``.

    The gradient comes from :func:`grad_v_Pt_function` on the physical grid
    and is evaluated at the particles by trigonometric interpolation.
    """
    t = path.times[step_index]
    total = 0.0
    for m in range(step_index):
        dB = path.dB[m, :, 0]
        if not np.any(dB):
            continue
        gv = grad_v_Pt_function(f_values, pgrid, t - path.times[m])
        vals = trig_interpolate(gv, pgrid, path.x[m, :, 0], path.v[m, :, 0])
        total += float(np.dot(vals, dB))
    return SQRT2 * total / path.N


# ---------------------------------------------------------------------------
# dual norms of Z along a whole path
# ---------------------------------------------------------------------------


class _ComovingWeights:
    """Cusp-corrected weights ``w_{-s}(xi, zeta - t xi)`` on the co-moving grid."""

    def __init__(self, xi: np.ndarray, zeta: np.ndarray, s: float, hx: float, hz: float, xi_max: float):
        self.xi = xi
        self.zeta = zeta
        self.s = s
        # full symmetric xi axis, to reuse the row correction of the static grid
        xs = np.concatenate([-xi[:0:-1], xi])
        wx = np.full(xs.size, hx)
        wx[[0, -1]] *= 0.5
        j0 = xi.size - 1
        width = min(16.0 * hx, xi_max / 6.0)
        self.corr = np.array([_cusp_row_correction(1.0 + z * z, xs, wx, s, j0, width) for z in zeta])
        wz = np.full(zeta.size, hz)
        wz[[0, -1]] *= 0.5
        self.wz = wz
        # half-plane weights: xi = 0 column once, xi > 0 columns twice
        self.wx_half = np.full(xi.size, 2 * hx)
        self.wx_half[0] = hx
        self.wx_half[-1] = hx

    def at(self, t: float) -> np.ndarray:
        XI = self.xi[:, None]
        Z = self.zeta[None, :]
        W = self.wx_half[:, None] * self.wz[None, :] * sobolev_weight(XI, Z - t * XI, -self.s)
        W = W.copy()
        # corrections live on xi in {-h, 0, h}; -h folds onto +h by symmetry
        W[0, :] += self.corr[:, 1] * self.wz
        W[1, :] += (self.corr[:, 0] + self.corr[:, 2]) * self.wz
        return W


def _phase_powers(a: np.ndarray, n: int, start: Optional[np.ndarray] = None) -> np.ndarray:
    """``start * a**k`` for ``k < n`` by cumulative products, shape ``(len(a), n)``."""
    out = np.empty((a.size, n), dtype=complex)
    out[:, 0] = 1.0 if start is None else start
    out[:, 1:] = a[:, None]
    return np.cumprod(out, axis=1, out=out)


def z_norms_comoving(path: EnsemblePath, snapshots: Sequence[int], grid: FrequencyGrid,
                     order: SobolevOrder, dtype=np.complex128) -> np.ndarray:
    """Dual norms of ``Z_t`` at all snapshots in one pass over the path.

    Works in the co-moving frequency ``zeta = eta + t xi`` where
    ``Y_t(xi, zeta) = Z_t(xi, zeta - t xi)`` obeys the recursion
    ``Y_{m+1} = D_m (Y_m + S_m)`` with
    ``D_m = exp(-int_{t_m}^{t_{m+1}} |zeta - u xi|^2 du)`` and the source
    ``S_m = (i sqrt2 / N)(zeta - t_m xi) sum_i dB exp(i xi (x - t_m v) + i zeta v)``.
    The shear has unit Jacobian, so the norm integral is evaluated on the
    ``(xi, zeta)`` grid directly; the zeta range covers the sheared box for
    every ``t <= T``.
    """
    order.require_dual()
    if not grid.symmetric:
        raise ValueError("the co-moving evaluation needs a symmetric trapezoid grid")
    p = path
    if p.stored.size != p.steps + 1:
        raise ValueError("needs states at every step")
    snaps = np.unique(np.asarray(snapshots, dtype=int))
    T = p.times[snaps[-1]] if snaps.size else 0.0
    hx, hz = grid.spacing
    Xi, H = grid.cutoffs
    xi = grid.xi[grid.xi.size // 2:]
    nz_lo = int(round(H / hz))
    nz_hi = int(np.ceil((H + T * Xi) / hz))
    zeta = hz * np.arange(-nz_lo, nz_hi + 1)
    key = ("comoving", float(order.s), zeta.size, float(T))
    if key not in grid._cache:
        grid._cache[key] = _ComovingWeights(xi, zeta, order.s, hx, hz, Xi)
    weights = grid._cache[key]
    XI = xi[:, None]
    Z = zeta[None, :]
    Y = np.zeros((xi.size, zeta.size), dtype=dtype)
    out = np.zeros(snaps.size)
    k = 0
    pref = (2 * np.pi) ** (-2)
    while k < snaps.size and snaps[k] == 0:
        k += 1
    for m in range(snaps[-1] if snaps.size else 0):
        t1, t2 = p.times[m], p.times[m + 1]
        x = p.x[m, :, 0]
        v = p.v[m, :, 0]
        dB = p.dB[m, :, 0]
        if np.any(dB):
            # phases by recurrence (powers of a unit step) instead of full exponentials
            ex = _phase_powers(np.exp(1j * hx * (x - t1 * v)), xi.size)
            ez = _phase_powers(np.exp(1j * hz * v), zeta.size, np.exp(1j * zeta[0] * v))
            S = (ex * dB[:, None]).T.astype(dtype) @ ez.astype(dtype)
            Y += S * ((1j * SQRT2 / p.N) * (Z - t1 * XI))
        expo = Z**2 * (t2 - t1) - Z * XI * (t2**2 - t1**2) + XI**2 * (t2**3 - t1**3) / 3.0
        Y *= np.exp(-expo)
        while k < snaps.size and snaps[k] == m + 1:
            W = weights.at(t2)
            out[k] = pref * np.sqrt(np.sum(W * (Y.real**2 + Y.imag**2)))
            k += 1
    return out


def z_sup_dual_norm(acc: ZAccumulator, order: SobolevOrder, snapshots: Optional[Sequence[int]] = None,
                    method: str = "comoving") -> float:
    """``max`` over snapshots of ``||Z_t||_{-s}`` (surrogate for the sup over ``[0, T]``)."""
    snaps = acc.snapshots if snapshots is None else np.asarray(snapshots, dtype=int)
    if method == "direct":
        return max(dual_norm(z_field_at(acc, int(m)).field, order) for m in snaps)
    if method != "comoving":
        raise ValueError("method is 'comoving' or 'direct'")
    return float(np.max(z_norms_comoving(acc.path, snaps, acc.grid, order)))


# ---------------------------------------------------------------------------
# mild identity
# ---------------------------------------------------------------------------


@dataclass
class MildIdentityTerms:
    lhs: float
    free: float
    drift: float
    z: float
    correction: float

    @property
    def rhs(self) -> float:
        return self.free + self.drift + self.z + self.correction

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _derivs_at(F: np.ndarray, pgrid: PhysicalGrid, tau: float, x: np.ndarray, v: np.ndarray,
               powers: Sequence[tuple], sigma_mode: str = "sqrt2") -> list:
    """Values of ``d_x^a d_v^b P_tau f`` at points, from the scaled DFT ``F`` of ``f``."""
    XI = pgrid.xi[:, None]
    ETA = pgrid.eta[None, :]
    base = F * kernel_G(tau, XI, ETA, sigma_mode)
    mv = 1j * (ETA + tau * XI)
    mx = 1j * XI
    xs = x + tau * v
    return [_eval_series(base * mx**a * mv**b, pgrid, xs, v) for a, b in powers]


def mild_identity_residual(path: EnsemblePath, acc: ZAccumulator, f_values: np.ndarray,
                           pgrid: PhysicalGrid, step_index: int, corrected: bool = True,
                           f_hat: Optional[SpectralField] = None) -> MildIdentityTerms:
    """Evaluate every term of the mild identity on one stored path.

    Parameters
    ----------
    f_values : ndarray
        Test function on ``pgrid``; ``f_hat`` (its transform on ``acc.grid``)
        is computed by quadrature when not supplied.
    corrected : bool
        Add the Ito-Taylor terms that make the step quadratures of the drift
        and stochastic integrals accurate beyond the left-point rule, given
        the stored ``(dI, dB)``; without them the residual decays like
        ``sqrt(dt)``.

    Notes
    -----
    ``<nu_0, P_t f>`` uses :func:`apply_Pt_function`, ``z`` uses
    :func:`z_field_at`, the drift is the left-point sum of
    ``<nu_r, d_v psi_r (Gamma * nu_r)>``.  The correction, per particle and
    step, with ``Delta v = b h + sqrt2 dB``, reads

        (Delta v^2 / 2 - h) d_v^2 psi - (b h^2 / 2 + sqrt2 (h dB - dI)) d_x psi
        + (sqrt2 / 3)(dB^3 - 3 h dB) d_v^3 psi.
    """
    if acc.path is not path:
        raise ValueError("accumulator was built from a different path")
    acc.check(step_index)
    cfg = path.config
    if cfg.store != "all":
        raise ValueError("needs states at every step")
    t = path.times[step_index]
    N = path.N
    x_t, v_t = path.x[step_index, :, 0], path.v[step_index, :, 0]
    lhs = float(np.mean(trig_interpolate(f_values, pgrid, x_t, v_t)))
    ptf = apply_Pt_function(f_values, pgrid, t, cfg.sigma_mode)
    free = float(np.mean(trig_interpolate(ptf, pgrid, path.x[0, :, 0], path.v[0, :, 0])))
    F = np.fft.fft2(f_values) / (pgrid.n_x * pgrid.n_v)
    h = cfg.dt
    drift = 0.0
    corr = 0.0
    powers = [(0, 1), (0, 2), (1, 0), (0, 3)] if corrected else [(0, 1)]
    for m in range(step_index):
        tau = t - path.times[m]
        x, v = path.x[m, :, 0], path.v[m, :, 0]
        b = drift_pairwise(path.x[m], path.v[m], cfg.kernel)[:, 0]
        vals = _derivs_at(F, pgrid, tau, x, v, powers, cfg.sigma_mode)
        drift += h * float(np.dot(b, vals[0])) / N
        if corrected:
            dB = path.dB[m, :, 0]
            dI = path.dI[m, :, 0]
            if cfg.sigma_mode == "zero":
                dB = np.zeros_like(dB)
                dI = np.zeros_like(dI)
            dv = b * h + SQRT2 * dB
            c2 = 0.5 * dv * dv - (h if cfg.sigma_mode == "sqrt2" else 0.0)
            cx = -(0.5 * b * h * h + SQRT2 * (h * dB - dI))
            c3 = (SQRT2 / 3.0) * (dB**3 - 3 * h * dB)
            corr += float(np.dot(c2, vals[1]) + np.dot(cx, vals[2]) + np.dot(c3, vals[3])) / N
            if cfg.scheme == "euler":
                # the position update omits b h^2 / 2; account for it at leading order
                corr -= float(np.dot(0.5 * b * h * h, vals[2])) / N
    if f_hat is None:
        f_hat = function_transform(f_values, pgrid, acc.grid)
    z = z_pairing(z_field_at(acc, step_index), f_hat)
    return MildIdentityTerms(lhs, free, drift, z, corr)
