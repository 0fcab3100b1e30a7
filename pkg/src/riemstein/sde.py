"""Geodesic Euler-Maruyama integration of the Langevin SDE ``dX = dB - grad(phi)/2 dt``.

One step maps ``x`` to ``exp_x(sqrt(h) xi - h/2 grad phi(x))`` with ``xi`` a
standard Gaussian drawn in the deterministic orthonormal frame at ``x``.
All simulators are vectorised over independent trajectories; the generator
is consumed in a fixed order, so a seed determines every output bit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import InvalidArgumentError, Manifold, Point, TangentVector
from .potentials import Potential, a1_certificate

__all__ = [
    "SdeConfig",
    "PathSample",
    "ErgodicMean",
    "FlowDerivative",
    "em_step",
    "em_step_batch",
    "coupled_em_step_batch",
    "aligned_frame",
    "simulate",
    "simulate_batch",
    "run_chains",
    "ergodic_mean",
    "batch_means",
    "flow_derivative_fd",
    "default_burn_in",
    "as_rng",
]

DEFAULT_STEP = 0.005
N_BATCHES = 16


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class SdeConfig:
    step_h: float = DEFAULT_STEP
    horizon_T: float = 1.0
    seed: int = 0
    burn_in: float = 0.0
    max_step: Optional[float] = 0.05  # guard; None disables it

    def __post_init__(self):
        if not self.step_h > 0 or not self.horizon_T > 0:
            raise InvalidArgumentError("step_h and horizon_T must be positive")
        if self.step_h > self.horizon_T * (1 + 1e-12):
            raise InvalidArgumentError("step_h exceeds horizon_T")
        if self.max_step is not None and self.step_h > self.max_step:
            raise InvalidArgumentError(f"step_h={self.step_h} exceeds the guard {self.max_step}")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn_in must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.step_h))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True, eq=False)
class PathSample:
    """Trajectory on a uniform time grid; ``coords[k]`` is the state at ``times[k]``."""

    kind: Manifold
    times: np.ndarray
    coords: np.ndarray

    @property
    def points(self) -> list[Point]:
        return [Point(self.kind, c) for c in self.coords]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class ErgodicMean:
    mean: float
    stderr: float
    n: int


def default_burn_in(p: Potential, horizon: float) -> float:
    """``20 / kappa`` when a certificate exists, else 10% of the horizon."""
    cert = a1_certificate(p)
    return 20.0 / cert.kappa if cert.holds else 0.1 * horizon


# ---------------------------------------------------------------------------
# steps


def em_step_batch(M: Manifold, p: Potential, x: np.ndarray, h: float, xi: np.ndarray) -> np.ndarray:
    """Batch step; ``xi`` holds frame coefficients of shape ``(..., dim)``."""
    v = np.sqrt(h) * M.frame_combination(x, xi) - 0.5 * h * p.grad(x)
    return M.exp(x, v)


def aligned_frame(M: Manifold, x, y) -> np.ndarray:
    """Orthonormal frame at ``x`` whose first vector points along the geodesic to ``y``.

    The deterministic frame is rotated by a Householder reflection in frame
    coordinates; where ``x == y`` the deterministic frame is returned.
    """
    F = np.asarray(M.frame(x), dtype=float)
    u = M.log(x, y)
    a = M.inner(x[..., None, :], F, u[..., None, :])  # frame coordinates of u
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    ok = na[..., 0] > 1e-300
    a = np.where(ok[..., None], a / np.where(ok[..., None], na, 1.0), 0.0)
    w = a.copy()
    w[..., 0] += np.where(a[..., 0] >= 0, 1.0, -1.0)
    nw2 = np.einsum("...i,...i->...", w, w)
    Hm = np.eye(M.dim) - 2.0 * w[..., :, None] * w[..., None, :] / np.where(nw2 > 0, nw2, 1.0)[..., None, None]
    Hm = np.where(ok[..., None, None], Hm, np.eye(M.dim))
    # rows of Hm^T F; first row is -sign(a_0) u / |u|
    return np.einsum("...ji,...jk->...ik", Hm, F)


def coupled_em_step_batch(M: Manifold, p: Potential, x, y, h: float, xi, frame=None):
    """Step ``x`` with frame noise ``xi`` and ``y`` with that noise transported to ``y``.

    ``frame`` overrides the deterministic frame at ``x`` (see :func:`aligned_frame`).
    """
    if frame is None:
        dB = M.frame_combination(x, xi)
    else:
        dB = np.einsum("...i,...ij->...j", xi, frame)
    dBy = M.transport(x, y, dB)
    x_new = M.exp(x, np.sqrt(h) * dB - 0.5 * h * p.grad(x))
    y_new = M.exp(y, np.sqrt(h) * dBy - 0.5 * h * p.grad(y))
    return x_new, y_new


def em_step(x: Point, p: Potential, h: float, xi: TangentVector) -> Point:
    """``exp_x(sqrt(h) xi - h/2 grad phi(x))`` for a standard normal tangent draw ``xi``."""
    p.check_point(x)
    if xi.kind != x.kind or not np.allclose(xi.base.coords, x.coords, rtol=0, atol=1e-12):
        raise InvalidArgumentError("noise must be tangent at x")
    v = np.sqrt(h) * xi.comps - 0.5 * h * p.grad(x.coords)
    return Point(x.kind, x.kind.exp(x.coords, v))


# ---------------------------------------------------------------------------
# paths


def simulate_batch(
    p: Potential,
    x0: np.ndarray,
    h: float,
    n_steps: int,
    rng,
    record_every: int = 1,
    observe: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """Simulate ``x0.shape[0]`` trajectories and return recorded states.

    The result has shape ``(n_records, n_paths, ambient)`` with records at steps
    ``0, record_every, ...``. When ``observe`` is given it is applied to each
    recorded batch and its outputs are stacked instead.
    """
    rng = as_rng(rng)
    M = p.manifold
    x = np.array(np.atleast_2d(x0), dtype=float)
    out = [x.copy() if observe is None else observe(x)]
    for k in range(1, n_steps + 1):
        xi = rng.standard_normal((x.shape[0], M.dim))
        x = em_step_batch(M, p, x, h, xi)
        if k % record_every == 0:
            out.append(x.copy() if observe is None else observe(x))
    return np.stack(out)


def simulate(x0: Point, p: Potential, cfg: SdeConfig, rng=None) -> PathSample:
    """Single trajectory of ``cfg.n_steps`` steps from ``x0``; seeded by ``cfg`` when ``rng`` is None."""
    p.check_point(x0)
    rng = cfg.rng() if rng is None else as_rng(rng)
    n = cfg.n_steps
    coords = simulate_batch(p, x0.coords[None, :], cfg.step_h, n, rng)[:, 0, :]
    return PathSample(x0.kind, cfg.step_h * np.arange(n + 1), coords)


def run_chains(
    p: Potential,
    duration: float,
    burn_in: float,
    h: float = DEFAULT_STEP,
    n_chains: int = 16,
    rng=None,
    thin: int = 1,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Post-burn-in states of ``n_chains`` parallel chains, shape ``(n_records, n_chains, amb)``.

    Each chain runs ``burn_in + duration / n_chains`` time units, so the total
    post-burn-in simulated time is ``duration``.
    """
    rng = as_rng(rng)
    M = p.manifold
    if x0 is None:
        x0 = np.broadcast_to(M.origin(), (n_chains, M.ambient_dim))
    nb = int(round(burn_in / h))
    x = simulate_batch(p, x0, h, nb, rng, record_every=max(nb, 1))[-1]
    ns = max(int(round(duration / n_chains / h)), 1)
    return simulate_batch(p, x, h, ns, rng, record_every=thin)[1:]


def batch_means(values: np.ndarray, n_batches: int = N_BATCHES) -> ErgodicMean:
    """Mean with a batch-means standard error.

    ``values`` is a time series of shape ``(n,)`` or ``(n, chains)``; batches
    are contiguous time blocks (pooled over chains).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    n = v.shape[0]
    if n < n_batches:
        raise InvalidArgumentError("not enough samples for batch means")
    usable = (n // n_batches) * n_batches
    blocks = v[:usable].reshape(n_batches, -1, v.shape[1])
    bm = blocks.mean(axis=1).ravel()  # one mean per (block, chain)
    mean = float(v.mean())
    if np.all(bm == bm[0]):
        return ErgodicMean(mean, 0.0, v.size)
    return ErgodicMean(mean, float(bm.std(ddof=1) / np.sqrt(bm.size)), v.size)


def ergodic_mean(h: Callable, path: PathSample, burn_in: float) -> ErgodicMean:
    """Time average of ``h`` over nodes with ``t >= burn_in``; 16 batch means."""
    mask = path.times >= burn_in - 1e-12
    if not np.any(mask):
        raise InvalidArgumentError("no nodes after burn-in")
    vals = np.asarray(h(path.coords[mask]), dtype=float)
    if vals.size < N_BATCHES:
        raise InvalidArgumentError("post-burn-in window too short for batch means")
    return batch_means(vals)


# ---------------------------------------------------------------------------
# flow derivative


@dataclass(frozen=True)
class FlowDerivative:
    times: np.ndarray
    norms: np.ndarray  # (n_paths, n_nodes), NaN where flagged
    flagged: np.ndarray  # bool, same shape

    @property
    def mean(self) -> np.ndarray:
        return np.nanmean(self.norms, axis=0)

    def decay_rate(self, t_min: float = 0.0) -> float:
        """Least-squares slope of ``log mean |v_t|`` against ``t``."""
        m = self.mean
        sel = (self.times >= t_min) & np.isfinite(m) & (m > 0)
        return float(np.polyfit(self.times[sel], np.log(m[sel]), 1)[0])


def flow_derivative_fd(
    x: Point,
    v: TangentVector,
    p: Potential,
    cfg: SdeConfig,
    eps: float = 1e-4,
    rng=None,
    n_paths: int = 1,
    record_every: int = 1,
) -> FlowDerivative:
    """Finite-difference estimate of ``|d F_t(x) v|`` along coupled trajectories.

    Both trajectories consume the same frame draws, the second receiving them
    parallel-transported from the first along the connecting geodesic, and
    ``|v_t| = dist(F_t(x), F_t(exp_x(eps v))) / eps``.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise InvalidArgumentError("eps must lie in [1e-6, 1e-3]")
    p.check_point(x)
    M = x.kind
    rng = cfg.rng() if rng is None else as_rng(rng)
    vn = v.norm()
    if vn == 0:
        raise InvalidArgumentError("direction must be nonzero")
    X = np.broadcast_to(x.coords, (n_paths, M.ambient_dim)).copy()
    Y = np.broadcast_to(M.exp(x.coords, eps * v.comps / vn), X.shape).copy()
    h = cfg.step_h
    cut = M.injectivity_radius
    recs, flags = [M.dist(X, Y) / eps], [np.zeros(n_paths, bool)]
    for k in range(1, cfg.n_steps + 1):
        xi = rng.standard_normal((n_paths, M.dim))
        X, Y = coupled_em_step_batch(M, p, X, Y, h, xi)
        if k % record_every == 0:
            d = M.dist(X, Y)
            recs.append(d / eps)
            flags.append(d > 0.5 * cut)
    norms = np.stack(recs, axis=1) * vn
    flagged = np.stack(flags, axis=1)
    if np.any(flagged):
        warnings.warn("flow-derivative nodes near the cut locus were excluded", RuntimeWarning)
    norms = np.where(flagged, np.nan, norms)
    times = h * record_every * np.arange(norms.shape[1])
    return FlowDerivative(times, norms, flagged)
