"""Interacting kinetic particles with exact Gaussian kinetic noise.

    dx_i = v_i dt,
    dv_i = (1/N) sum_{j != i} gamma(x_i - x_j, v_i - v_j) dt + sqrt2 dB_i.

States are stored as arrays of shape ``(N, d)``.  Over one step of length
``h`` the pair ``(dI, dB) = (int_0^h B, B_h)`` is drawn exactly; its
covariance per component is ``[[h^3/3, h^2/2], [h^2/2, h]]``.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import struct
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .spectral_core import FrequencyGrid, SpectralField, char_from_arrays

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)

__all__ = [
    "InteractionKernel",
    "kuramoto_kernel",
    "alignment_kernel",
    "zero_kernel",
    "GaussianMixture",
    "InitialSampler",
    "SimConfig",
    "EnsemblePath",
    "drift_pairwise",
    "drift_reference",
    "noise_pair",
    "step",
    "simulate",
    "replay",
    "coarsen_increments",
    "empirical_char",
    "write_increments",
    "read_increments",
    "write_paths_csv",
    "sample_lipschitz_ratio",
]


# ---------------------------------------------------------------------------
# interaction kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InteractionKernel:
    """Translation-invariant pair interaction ``gamma(dx, dv) -> R^d``.

    Attributes
    ----------
    gamma : callable
        Maps arrays ``dx, dv`` of shape ``(..., d)`` to ``(..., d)``.
    bound, lipschitz : float
        Sup norm and Lipschitz constant (Euclidean on ``(dx, dv)``).
    name : str
    fourier_form : str or None
        Tag of a closed form usable by fast paths (``"two_mode_sine"``).
    params : dict
    antisymmetric : bool
        ``gamma(-dx, -dv) = -gamma(dx, dv)``.
    """

    gamma: Callable
    bound: float
    lipschitz: float
    name: str
    fourier_form: Optional[str] = None
    params: dict = field(default_factory=dict)
    antisymmetric: bool = False

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def kuramoto_kernel(K: float = 0.5) -> InteractionKernel:
    """``gamma = -K sin(dx)`` componentwise; bound and Lipschitz constant ``K``."""
    return InteractionKernel(lambda dx, dv: -K * np.sin(dx), abs(K), abs(K), "kuramoto",
                             "two_mode_sine", {"K": float(K)}, True)


# max of |grad gamma| for the alignment profile exp(-x^2) v / (1 + v^2); attained at the origin
_ALIGN_LIP = 1.0


def alignment_kernel(beta: float = 0.5) -> InteractionKernel:
    """``gamma = beta exp(-|dx|^2) dv / (1 + |dv|^2)``; bound ``beta/2``."""
    def gamma(dx, dv):
        r2 = np.sum(dx * dx, axis=-1, keepdims=True)
        s2 = np.sum(dv * dv, axis=-1, keepdims=True)
        return beta * np.exp(-r2) * dv / (1.0 + s2)

    return InteractionKernel(gamma, 0.5 * abs(beta), _ALIGN_LIP * abs(beta), "alignment", None,
                             {"beta": float(beta)}, True)


def zero_kernel() -> InteractionKernel:
    return InteractionKernel(lambda dx, dv: np.zeros_like(dx), 0.0, 0.0, "zero", "zero", {}, True)


def kernel_from_spec(spec: dict) -> InteractionKernel:
    name = spec.get("name", "kuramoto")
    if name == "kuramoto":
        return kuramoto_kernel(float(spec.get("K", 0.5)))
    if name == "alignment":
        return alignment_kernel(float(spec.get("beta", 0.5)))
    if name == "zero":
        return zero_kernel()
    raise ValueError(f"unknown kernel {name!r}")


def sample_lipschitz_ratio(kernel: InteractionKernel, n: int = 20000, d: int = 1, seed=0,
                           scale: float = 3.0) -> tuple:
    """Largest sampled ``|gamma|`` and largest difference quotient on random probe pairs."""
    rng = np.random.default_rng(seed)
    a = rng.normal(scale=scale, size=(n, 2 * d))
    b = a + rng.normal(scale=0.05, size=(n, 2 * d)) * rng.choice([1.0, 20.0], size=(n, 1))
    ga = kernel.gamma(a[:, :d], a[:, d:])
    gb = kernel.gamma(b[:, :d], b[:, d:])
    num = np.linalg.norm(ga - gb, axis=1)
    den = np.linalg.norm(a - b, axis=1)
    return float(np.abs(ga).max()), float(np.max(num / den))


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------


def _as_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def drift_reference(x, v, kernel: InteractionKernel, chunk: int = 512) -> np.ndarray:
    """O(N^2) evaluation of ``(1/N) sum_{j != i} gamma(x_i - x_j, v_i - v_j)``."""
    x, v = _as_state(x), _as_state(v)
    N, d = x.shape
    out = np.zeros((N, d))
    if N == 1 or kernel.is_zero:
        return out
    for a in range(0, N, chunk):
        dx = x[a:a + chunk, None, :] - x[None, :, :]
        dv = v[a:a + chunk, None, :] - v[None, :, :]
        g = kernel.gamma(dx, dv)
        out[a:a + chunk] = g.sum(axis=1)
    out -= kernel.gamma(np.zeros((1, d)), np.zeros((1, d)))
    return out / N


def drift_pairwise(x, v, kernel: InteractionKernel, fast: bool = True) -> np.ndarray:
    """Mean-field drift on every particle, shape ``(N, d)``.

    Kernels tagged ``"two_mode_sine"`` use the identity
    ``sum_j sin(x_i - x_j) = sin x_i sum cos x_j - cos x_i sum sin x_j``.
    """
    x, v = _as_state(x), _as_state(v)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise ValueError("non-finite state")
    N, d = x.shape
    if kernel.is_zero or N == 1:
        return np.zeros((N, d))
    if fast and kernel.fourier_form == "two_mode_sine":
        K = kernel.params["K"]
        s, c = np.sin(x), np.cos(x)
        return -K * (s * c.sum(axis=0) - c * s.sum(axis=0)) / N
    return drift_reference(x, v, kernel)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of product Gaussians on phase space (``d = 1``: rows are ``(x, v)``)."""

    weights: tuple = (0.5, 0.5)
    means: tuple = ((-1.0, 0.5), (1.0, -0.5))
    stds: tuple = ((0.6, 0.5), (0.6, 0.5))

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("mixture weights must be a probability vector")
        if np.asarray(self.means).shape != (w.size, 2) or np.asarray(self.stds).shape != (w.size, 2):
            raise ValueError("means/stds must have shape (K, 2)")
        if np.any(np.asarray(self.stds) <= 0):
            raise ValueError("standard deviations must be positive")

    def _arr(self):
        return (np.asarray(self.weights, float), np.asarray(self.means, float),
                np.asarray(self.stds, float))

    def density(self, x, v):
        w, m, s = self._arr()
        x = np.asarray(x, float)[..., None]
        v = np.asarray(v, float)[..., None]
        px = np.exp(-0.5 * ((x - m[:, 0]) / s[:, 0]) ** 2) / (np.sqrt(2 * np.pi) * s[:, 0])
        pv = np.exp(-0.5 * ((v - m[:, 1]) / s[:, 1]) ** 2) / (np.sqrt(2 * np.pi) * s[:, 1])
        return np.sum(w * px * pv, axis=-1)

    def char(self, xi, eta):
        """``int exp(i(xi x + eta v)) d nu_0`` in closed form."""
        w, m, s = self._arr()
        xi = np.asarray(xi, float)[..., None]
        eta = np.asarray(eta, float)[..., None]
        return np.sum(w * np.exp(1j * (xi * m[:, 0] + eta * m[:, 1])
                                 - 0.5 * (xi * s[:, 0]) ** 2 - 0.5 * (eta * s[:, 1]) ** 2), axis=-1)

    def mean_cov(self) -> tuple:
        w, m, s = self._arr()
        mu = w @ m
        second = sum(wk * (np.diag(sk**2) + np.outer(mk, mk)) for wk, mk, sk in zip(w, m, s))
        return mu, second - np.outer(mu, mu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        w, m, s = self._arr()
        k = rng.choice(w.size, size=n, p=w)
        return m[k] + s[k] * rng.standard_normal((n, 2))

    def rosenblatt_inverse(self, u: np.ndarray, iters: int = 80) -> np.ndarray:
        """Map points of ``[0,1)^2`` to the mixture: ``x = F_x^{-1}(u1)``, ``v = F_{v|x}^{-1}(u2)``."""
        w, m, s = self._arr()
        u = np.clip(np.asarray(u, float), 1e-15, 1 - 1e-15)

        def bisect(cdf, target, lo, hi):
            lo = np.full_like(target, lo)
            hi = np.full_like(target, hi)
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                below = cdf(mid) < target
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            return 0.5 * (lo + hi)

        span = np.abs(m).max() + 12 * s.max()
        x = bisect(lambda z: np.sum(w * ndtr((z[:, None] - m[:, 0]) / s[:, 0]), axis=1),
                   u[:, 0], -span, span)
        px = w * np.exp(-0.5 * ((x[:, None] - m[:, 0]) / s[:, 0]) ** 2) / s[:, 0]
        cw = px / px.sum(axis=1, keepdims=True)
        v = bisect(lambda z: np.sum(cw * ndtr((z[:, None] - m[:, 1]) / s[:, 1]), axis=1),
                   u[:, 1], -span, span)
        return np.column_stack([x, v])

    def describe(self) -> dict:
        return {"weights": list(self.weights), "means": [list(r) for r in self.means],
                "stds": [list(r) for r in self.stds]}


def rank1_lattice(n: int) -> np.ndarray:
    """Rank-1 lattice ``frac(k (1, a) / n)`` with a golden-ratio generator."""
    a = int(round(n / ((1 + np.sqrt(5)) / 2)))
    while np.gcd(a, n) != 1:
        a += 1
    k = np.arange(n)
    return np.column_stack([k / n, (k * a % n) / n])


@dataclass(frozen=True)
class InitialSampler:
    """Initial-condition generator.

    kind ``"iid"`` draws exact samples of ``mixture``; ``"lattice"`` maps a
    rank-1 lattice, shifted by one common uniform vector when ``shift`` is
    true, through the inverse Rosenblatt transform of ``mixture``;
    ``"file"`` reads ``(x, v)`` rows from ``path`` (``.npy`` or CSV).
    """

    kind: str = "iid"
    mixture: GaussianMixture = GaussianMixture()
    shift: bool = True
    path: Optional[str] = None
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("iid", "lattice", "file", "points"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ValueError("file sampler needs a path")
        if self.kind == "points" and self.points is None:
            raise ValueError("points sampler needs explicit points")

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Return an ``(n, 2)`` array of ``(x, v)`` rows (``d = 1``)."""
        if self.kind == "iid":
            pts = self.mixture.sample(n, rng)
        elif self.kind == "lattice":
            u = rank1_lattice(n)
            if self.shift:
                u = (u + rng.random(2)) % 1.0
            pts = self.mixture.rosenblatt_inverse(u)
        elif self.kind == "file":
            pts = load_points(self.path)
        else:
            pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if pts.shape[0] != n:
            raise ValueError(f"sampler produced {pts.shape[0]} points, expected {n}")
        return pts

    def describe(self) -> dict:
        out = {"kind": self.kind, "mixture": self.mixture.describe()}
        if self.kind == "lattice":
            out["shift"] = self.shift
        if self.kind == "file":
            out["path"] = self.path
        return out


def load_points(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        arr = np.load(path)
    else:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise ValueError("point file must hold finite (x, v) rows")
    return arr


@dataclass(frozen=True)
class SimConfig:
    """Inputs of one particle simulation.

    ``scheme`` selects the position update: ``"frozen"`` integrates the
    frozen drift exactly over the step (adds ``b dt^2 / 2``), ``"euler"``
    uses ``x + v dt`` only.  ``store`` is ``"all"`` or ``"snapshots"``.
    """

    N: int
    T: float = 1.0
    dt: float = 2e-3
    sigma_mode: str = "sqrt2"
    kernel: InteractionKernel = field(default_factory=kuramoto_kernel)
    initial: InitialSampler = InitialSampler()
    seed: object = 0
    snapshot_steps: Optional[tuple] = None
    store: str = "all"
    scheme: str = "frozen"
    check_drift: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        M = self.T / self.dt
        if abs(M - round(M)) > 1e-9 * max(1.0, M):
            raise ValueError("T/dt must be an integer")
        if self.sigma_mode not in ("sqrt2", "zero"):
            raise ValueError("sigma_mode is 'sqrt2' or 'zero'")
        if self.store not in ("all", "snapshots"):
            raise ValueError("store is 'all' or 'snapshots'")
        if self.scheme not in ("frozen", "euler"):
            raise ValueError("scheme is 'frozen' or 'euler'")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def snapshot_indices(self) -> np.ndarray:
        if self.snapshot_steps is None:
            return np.arange(self.steps + 1)
        idx = np.unique(np.asarray(self.snapshot_steps, dtype=int))
        if idx.size and (idx[0] < 0 or idx[-1] > self.steps):
            raise ValueError("snapshot step out of range")
        return idx


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class EnsemblePath:
    """Trajectories plus the Brownian data that drove them.

    Attributes
    ----------
    times : ndarray (M+1,)
    x, v : ndarray (S, N, d)
        States at the stored step indices ``stored``.
    stored : ndarray (S,)
    dB, dI : ndarray (M, N, d)
        Per-step increments ``B(t_{m+1}) - B(t_m)`` and ``int_{t_m}^{t_{m+1}} (B - B(t_m))``.
    config : SimConfig
    wall_time : float
    """

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    stored: np.ndarray
    dB: np.ndarray
    dI: np.ndarray
    config: SimConfig
    wall_time: float = 0.0

    @property
    def N(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[2]

    @property
    def steps(self) -> int:
        return self.dB.shape[0]

    @property
    def seed(self):
        return self.config.seed

    def slot(self, step_index: int) -> int:
        k = int(np.searchsorted(self.stored, step_index))
        if k >= self.stored.size or self.stored[k] != step_index:
            raise KeyError(f"step {step_index} was not stored")
        return k

    def state(self, step_index: int) -> tuple:
        k = self.slot(step_index)
        return self.x[k], self.v[k]

    def permuted(self, perm: np.ndarray) -> "EnsemblePath":
        """The same path with particles relabelled."""
        return replace(self, x=self.x[:, perm], v=self.v[:, perm], dB=self.dB[:, perm],
                       dI=self.dI[:, perm])


def noise_pair(rng: np.random.Generator, shape: tuple, h: float) -> tuple:
    """Exact draws of ``(dI, dB)`` with covariance ``[[h^3/3, h^2/2], [h^2/2, h]]``."""
    z = rng.standard_normal((2,) + tuple(shape))
    dB = np.sqrt(h) * z[0]
    dI = h**1.5 * (0.5 * z[0] + z[1] / (2 * np.sqrt(3.0)))
    return dI, dB


def step(x, v, dt: float, dI, dB, kernel: InteractionKernel, sigma_mode: str = "sqrt2",
         scheme: str = "frozen", drift: Optional[np.ndarray] = None) -> tuple:
    """One step of the kinetic scheme with exact noise.

    ``v' = v + b dt + sqrt2 dB`` and ``x' = x + v dt [+ b dt^2/2] + sqrt2 dI``
    where ``b`` is the drift frozen at the start of the step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x, v = _as_state(x), _as_state(v)
    b = drift_pairwise(x, v, kernel) if drift is None else drift
    xn = x + v * dt
    if scheme == "frozen":
        xn = xn + 0.5 * dt * dt * b
    vn = v + b * dt
    if sigma_mode == "sqrt2":
        xn = xn + SQRT2 * _as_state(dI)
        vn = vn + SQRT2 * _as_state(dB)
    return xn, vn


def coarsen_increments(dI: np.ndarray, dB: np.ndarray, h: float, factor: int = 2) -> tuple:
    """Exact increments over ``factor`` consecutive steps of length ``h``.

    ``dB`` adds up; ``dI`` over ``[0, k h]`` is the sum of the sub-step
    ``dI`` plus ``h`` times the Brownian displacement accumulated before each
    sub-step.
    """
    M = dB.shape[0]
    if M % factor:
        raise ValueError("step count is not divisible by the factor")
    shp = (M // factor, factor) + dB.shape[1:]
    b = dB.reshape(shp)
    i = dI.reshape(shp)
    before = np.cumsum(b, axis=1) - b
    return i.sum(axis=1) + h * before.sum(axis=1), b.sum(axis=1)


def _streams(seed) -> tuple:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def initial_state(config: SimConfig) -> tuple:
    rng_init, _ = _streams(config.seed)
    pts = config.initial.draw(config.N, rng_init)
    return pts[:, :1].copy(), pts[:, 1:].copy()


def simulate(config: SimConfig, increments: Optional[tuple] = None) -> EnsemblePath:
    """Run the particle system.

    Parameters
    ----------
    config : SimConfig
    increments : (dI, dB), optional
        Externally supplied noise of shape ``(M, N, 1)`` (used for coupled
        refinement studies); otherwise drawn from the config seed.
    """
    t0 = time.perf_counter()
    M, N, h = config.steps, config.N, config.dt
    x, v = initial_state(config)
    d = x.shape[1]
    if increments is None:
        _, rng = _streams(config.seed)
        dI = np.empty((M, N, d))
        dB = np.empty((M, N, d))
        if config.sigma_mode == "sqrt2":
            for m in range(M):
                dI[m], dB[m] = noise_pair(rng, (N, d), h)
        else:
            dI[:] = 0.0
            dB[:] = 0.0
    else:
        dI, dB = (np.asarray(a, dtype=float).reshape(M, N, d) for a in increments)
        if config.sigma_mode == "zero":
            dI = np.zeros_like(dI)
            dB = np.zeros_like(dB)
    stored = np.arange(M + 1) if config.store == "all" else config.snapshot_indices()
    xs = np.empty((stored.size, N, d))
    vs = np.empty((stored.size, N, d))
    k = 0
    if stored.size and stored[0] == 0:
        xs[0], vs[0] = x, v
        k = 1
    kernel = config.kernel
    for m in range(M):
        b = drift_pairwise(x, v, kernel)
        if config.check_drift and kernel.bound and np.abs(b).max() > kernel.bound * (1 + 1e-12):
            raise FloatingPointError(f"drift exceeds its bound at step {m}")
        x, v = step(x, v, h, dI[m], dB[m], kernel, config.sigma_mode, config.scheme, drift=b)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise FloatingPointError(f"non-finite state after step {m}")
        if k < stored.size and stored[k] == m + 1:
            xs[k], vs[k] = x, v
            k += 1
    times = h * np.arange(M + 1)
    wall = time.perf_counter() - t0
    log.debug("simulated N=%d M=%d in %.3fs", N, M, wall)
    return EnsemblePath(times, xs, vs, stored, dB, dI, config, wall)


def replay(path: EnsemblePath) -> EnsemblePath:
    """Recompute the trajectory from the stored initial state and increments."""
    cfg = path.config
    if path.stored[0] != 0:
        raise ValueError("replay needs the initial state")
    x, v = path.x[0].copy(), path.v[0].copy()
    xs = [x]
    vs = [v]
    for m in range(path.steps):
        x, v = step(x, v, cfg.dt, path.dI[m], path.dB[m], cfg.kernel, cfg.sigma_mode, cfg.scheme)
        if m + 1 in path.stored:
            xs.append(x)
            vs.append(v)
    return replace(path, x=np.stack(xs), v=np.stack(vs))


def empirical_char(path: EnsemblePath, t_index: int, grid: FrequencyGrid) -> SpectralField:
    """Characteristic function of ``(1/N) sum_i delta_{(x_i, v_i)}`` at a stored step."""
    x, v = path.state(t_index)
    if path.d != 1:
        raise ValueError("frequency grids are implemented for d = 1")
    return SpectralField(grid, char_from_arrays(x[:, 0], v[:, 0], 1.0 / path.N, grid))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

_MAGIC = b"KLNI"
_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


def atomic_write_bytes(path: str, data: bytes) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_increments(path: str, dB: np.ndarray, dI: Optional[np.ndarray] = None) -> None:
    """Binary dump: 16-byte header (magic, version, d, N, M), then ``dB`` and ``dI``.

    Both arrays are little-endian float64 in row-major ``(M, N, d)`` order.
    """
    dB = np.asarray(dB, dtype="<f8")
    M, N, d = dB.shape
    dI = np.zeros_like(dB) if dI is None else np.asarray(dI, dtype="<f8")
    if dI.shape != dB.shape:
        raise ValueError("dB and dI differ in shape")
    head = _HEADER.pack(_MAGIC, _VERSION, d, N, M)
    atomic_write_bytes(path, head + np.ascontiguousarray(dB).tobytes() + np.ascontiguousarray(dI).tobytes())


def read_increments(path: str) -> tuple:
    """Inverse of :func:`write_increments`; returns ``(dB, dI)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated increment file")
    magic, version, d, N, M = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not an increment file")
    count = M * N * d
    if len(raw) != _HEADER.size + 16 * count:
        raise ValueError("increment file has the wrong length")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return body[:count].reshape(M, N, d).copy(), body[count:].reshape(M, N, d).copy()


def write_paths_csv(path: str, ens: EnsemblePath) -> None:
    """Columns ``t, particle_id, x..., v...`` for every stored step."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = ens.d
    xs = ["x"] if d == 1 else [f"x{k+1}" for k in range(d)]
    vs = ["v"] if d == 1 else [f"v{k+1}" for k in range(d)]
    w.writerow(["t", "particle_id", *xs, *vs])
    for k, m in enumerate(ens.stored):
        t = ens.times[m]
        for i in range(ens.N):
            w.writerow([repr(float(t)), i, *map(lambda z: repr(float(z)), ens.x[k, i]),
                        *map(lambda z: repr(float(z)), ens.v[k, i])])
    atomic_write_text(path, buf.getvalue())
