"""Solutions of the Stein equation ``h - E h(X) = L f`` with ``L f = (Laplacian f - <grad phi, grad f>) / 2``.

Two solvers are provided.

* :class:`MonteCarloSteinSolver` evaluates the semigroup representation
  ``f_h(x) = int_0^T [E h(X) - E h(X_{x,t})] dt`` by simulation. Points
  evaluated together share noise: the first point is driven by frame draws
  and every other point by those draws parallel-transported to it, so
  finite differences of ``f_h`` see strongly correlated paths.
* :func:`circle_solve` integrates the first-order circle equation
  ``g' - phi' g = h - E h`` spectrally. Because ``L f = (f'' - phi' f') / 2``,
  the solution of the second-order equation satisfies ``f_h' = 2 g``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import Circle, InvalidArgumentError, Manifold, Point, wrap_angle
from .potentials import Potential, VonMisesCircle, a1_certificate
from .sde import (
    DEFAULT_STEP,
    ErgodicMean,
    as_rng,
    batch_means,
    coupled_em_step_batch,
    em_step_batch,
    run_chains,
)
from .testfunctions import TestFunction

__all__ = [
    "SteinEstimate",
    "ClusterEstimate",
    "MonteCarloSteinSolver",
    "CircleSolution",
    "ResidualReport",
    "LipschitzReport",
    "solve_fh",
    "circle_solve",
    "circle_expectation",
    "stein_residual",
    "generator_fd",
    "lipschitz_probe",
    "stein_identity_check",
    "circle_generator_mean",
    "stationary_mean",
]

CIRCLE_GRID = 4096


def horizon_for(kappa: float) -> float:
    return max(10.0 / kappa, 5.0)


@dataclass(frozen=True)
class SteinEstimate:
    """Monte Carlo value of ``f_h(x)``.

    ``stderr`` covers path noise only. Error in the stationary mean ``E h``
    shifts every estimate by the same ``horizon_T * dE``; that common-mode
    part cancels in differences and in the generator and is reported as
    ``eh_shift``.
    """

    value: float
    stderr: float
    truncation_bound: float
    horizon_T: float
    n_paths: int
    eh_shift: float = 0.0
    flags: tuple = ()


@dataclass(frozen=True)
class ClusterEstimate:
    values: np.ndarray  # (k,)
    per_path: np.ndarray  # (n_paths, k) per-path integrals; values = per_path.mean(0)
    stderr: np.ndarray


def stationary_mean(h: Callable, p: Potential, kappa: Optional[float] = None, rng=0,
                    step: float = DEFAULT_STEP, n_chains: int = 1) -> ErgodicMean:
    """``E h(X)`` under ``exp(-phi)``: quadrature on the circle, else a chain of length ``200 / kappa``."""
    if isinstance(p, VonMisesCircle):
        return ErgodicMean(circle_expectation(h, p), 0.0, CIRCLE_GRID)
    if kappa is None:
        kappa = a1_certificate(p).kappa
    if kappa is None:
        raise InvalidArgumentError("kappa is required for the stationary mean")
    chain = run_chains(p, 200.0 / kappa, 20.0 / kappa, h=step, n_chains=n_chains, rng=rng)
    return batch_means(h(chain))


class MonteCarloSteinSolver:
    """Evaluate ``f_h`` at clusters of points with shared, transported noise.

    Parameters
    ----------
    h, p, kappa
        Test function, potential and the contraction constant; the horizon is
        ``max(10 / kappa, 5)`` unless ``horizon_T`` is given.
    Eh
        Stationary mean of ``h`` (value, stderr). Estimated when omitted.
    mean_rho
        Function ``x -> E rho(X, x)`` used for the truncation certificate.
    """

    def __init__(
        self,
        h: TestFunction,
        p: Potential,
        kappa: float,
        n_paths: int = 2000,
        step: float = DEFAULT_STEP,
        seed: int = 0,
        Eh: Optional[ErgodicMean] = None,
        horizon_T: Optional[float] = None,
        stationary_sample: Optional[np.ndarray] = None,
    ):
        if kappa is None or not kappa > 0:
            raise InvalidArgumentError("solve_fh needs a positive kappa")
        self.h, self.p, self.kappa = h, p, float(kappa)
        self.n_paths, self.step, self.seed = int(n_paths), float(step), int(seed)
        self.T = horizon_for(kappa) if horizon_T is None else float(horizon_T)
        self.Eh = Eh if Eh is not None else stationary_mean(h, p, kappa, rng=seed + 1)
        self._sample = stationary_sample
        self.flags = ("short-horizon",) if self.T < 3.0 / kappa else ()

    def _stationary_sample(self) -> np.ndarray:
        if self._sample is None:
            p = self.p
            if isinstance(p, VonMisesCircle):
                t = np.linspace(-np.pi, np.pi, CIRCLE_GRID, endpoint=False)
                w = np.exp(-p.value(t[:, None]))
                self._sample = (t[:, None], w / w.sum())
            else:
                ch = run_chains(p, 200.0 / self.kappa, 20.0 / self.kappa, h=self.step,
                                n_chains=16, rng=self.seed + 2, thin=max(int(1.0 / self.step), 1))
                pts = ch.reshape(-1, p.manifold.ambient_dim)
                self._sample = (pts, np.full(len(pts), 1.0 / len(pts)))
        return self._sample

    def mean_rho(self, x: np.ndarray) -> float:
        pts, w = self._stationary_sample()
        return float(w @ self.p.manifold.dist(pts, np.broadcast_to(x, pts.shape)))

    def truncation_bound(self, x: np.ndarray) -> float:
        C0 = self.h.C0
        if C0 is None:
            return float("inf")
        return float(C0 * self.mean_rho(x) * np.exp(-self.kappa * self.T) / self.kappa)

    def evaluate(self, points, seed: Optional[int] = None) -> ClusterEstimate:
        """Per-path trapezoidal integrals of ``E h - h(X_t)`` for a cluster of starting points."""
        M = self.p.manifold
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = pts.shape[0]
        n = self.n_paths
        rng = as_rng(self.seed if seed is None else seed)
        h = self.step
        n_steps = int(round(self.T / h))
        X = np.broadcast_to(pts[0], (n, M.ambient_dim)).copy()
        Y = np.broadcast_to(pts[1:], (n, k - 1, M.ambient_dim)).copy()
        Eh = self.Eh.mean

        def integrand(X, Y):
            vals = np.concatenate([self.h(X)[:, None], self.h(Y)], axis=1)
            return Eh - vals

        acc = 0.5 * integrand(X, Y)
        for step in range(1, n_steps + 1):
            xi = rng.standard_normal((n, M.dim))
            if k > 1:
                Xb = np.broadcast_to(X[:, None, :], Y.shape)
                xib = np.broadcast_to(xi[:, None, :], Y.shape[:-1] + (M.dim,))
                _, Y = coupled_em_step_batch(M, self.p, Xb, Y, h, xib)
            X = em_step_batch(M, self.p, X, h, xi)
            w = 0.5 if step == n_steps else 1.0
            acc += w * integrand(X, Y)
        per_path = h * acc
        stderr = per_path.std(axis=0, ddof=1) / np.sqrt(n)
        return ClusterEstimate(per_path.mean(axis=0), per_path, stderr)

    def estimate(self, x: Point, n_boot: int = 200) -> SteinEstimate:
        """Single-point estimate with a path-bootstrap standard error."""
        c = self.evaluate(x.coords[None, :])
        pp = c.per_path[:, 0]
        rng = np.random.default_rng(self.seed + 3)
        idx = rng.integers(0, pp.size, (n_boot, pp.size))
        se = float(pp[idx].mean(axis=1).std(ddof=1)) if np.ptp(pp) > 0 else 0.0
        return SteinEstimate(
            float(c.values[0]), se, self.truncation_bound(x.coords), self.T, self.n_paths,
            eh_shift=self.T * self.Eh.stderr, flags=self.flags,
        )

    def __call__(self, x):
        return self.evaluate(np.atleast_2d(x)).values


def solve_fh(x: Point, h: TestFunction, p: Potential, kappa: float, n_paths: int = 2000,
             step: float = DEFAULT_STEP, seed: int = 0, Eh: Optional[ErgodicMean] = None,
             horizon_T: Optional[float] = None) -> SteinEstimate:
    """Monte Carlo ``f_h(x)`` over horizon ``max(10 / kappa, 5)``."""
    if kappa is None:
        raise InvalidArgumentError("kappa is required")
    p.check_point(x)
    solver = MonteCarloSteinSolver(h, p, kappa, n_paths, step, seed, Eh, horizon_T)
    if "short-horizon" in solver.flags:
        warnings.warn("horizon below 3/kappa", RuntimeWarning)
    return solver.estimate(x)


# ---------------------------------------------------------------------------
# circle


def _circle_grid(n: int = CIRCLE_GRID) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


def _spectral_antiderivative(q: np.ndarray) -> np.ndarray:
    """Zero-mean periodic antiderivative of ``q - mean(q)`` on the uniform grid starting at -pi."""
    n = q.size
    qh = np.fft.rfft(q)
    k = np.fft.rfftfreq(n, d=1.0 / n)
    Qh = np.zeros_like(qh)
    Qh[1:] = qh[1:] / (1j * k[1:])
    if n % 2 == 0:
        Qh[-1] = 0.0  # Nyquist mode has no odd antiderivative on the grid
    return np.fft.irfft(Qh, n)


def circle_expectation(h: Callable, p: VonMisesCircle, n: int = CIRCLE_GRID) -> float:
    """``E h(X)`` by the periodic trapezoidal rule."""
    t = _circle_grid(n)
    w = np.exp(-p.value(t[:, None]))
    return float(np.asarray(h(t[:, None])) @ w / w.sum())


def _periodic_spline(t, v):
    return CubicSpline(np.r_[t, np.pi], np.r_[v, v[0]], bc_type="periodic")


@dataclass(frozen=True)
class CircleSolution:
    """Tabulated first-order solution on the circle.

    ``g`` uses the constant ``a`` requested in :func:`circle_solve`. ``f`` is
    the Stein solution ``f_h``: ``f' = 2 g_*`` where ``g_*`` uses the constant
    making ``g_*`` integrate to zero, and ``f`` is centred so that
    ``E f(X) = 0``.
    """

    grid: np.ndarray
    g_values: np.ndarray
    f_values: np.ndarray
    g_star_values: np.ndarray
    Eh: float
    c_phi: float
    a: float
    a_star: float
    _g: CubicSpline = field(repr=False)
    _f: CubicSpline = field(repr=False)
    _gs: CubicSpline = field(repr=False)

    def g(self, x):
        return self._g(wrap_angle(np.asarray(x, dtype=float)))

    def f(self, x):
        return self._f(wrap_angle(np.asarray(x, dtype=float)))

    def f_prime(self, x):
        return 2.0 * self._gs(wrap_angle(np.asarray(x, dtype=float)))

    def __call__(self, x):
        """Evaluate ``f`` on ambient coordinates ``(..., 1)``."""
        return self.f(np.asarray(x, dtype=float)[..., 0])

    def residual(self, h: Callable, p: VonMisesCircle) -> float:
        """Sup over the grid of ``|g' - phi' g - (h - E h)|`` with fourth-order differences."""
        t, g = self.grid, self.g_values
        d = t[1] - t[0]
        gp = (-np.roll(g, -2) + 8 * np.roll(g, -1) - 8 * np.roll(g, 1) + np.roll(g, 2)) / (12 * d)
        r = gp - p.grad(t[:, None])[:, 0] * g - (np.asarray(h(t[:, None])) - self.Eh)
        return float(np.abs(r).max())


def circle_solve(h: Callable, p: VonMisesCircle, n: int = CIRCLE_GRID, a: float = 0.0) -> CircleSolution:
    """``g(x) = c e^{phi(x)} {a + int_{-pi}^x (h - E h) e^{-phi} / c}`` on an ``n``-point grid."""
    if not isinstance(p, VonMisesCircle):
        raise InvalidArgumentError("circle_solve needs a circle potential")
    if n < CIRCLE_GRID:
        raise InvalidArgumentError(f"grid must have at least {CIRCLE_GRID} nodes")
    t = _circle_grid(n)
    phi = p.value(t[:, None])
    w = np.exp(-phi)
    c = 2.0 * np.pi * w.mean()
    hv = np.asarray(h(t[:, None]), dtype=float)
    Eh = float(hv @ w / w.sum())
    q = (hv - Eh) * w / c
    Q = _spectral_antiderivative(q)
    Q -= Q[0]  # integral from -pi
    ephi = c * np.exp(phi)
    g = ephi * (a + Q)
    a_star = -float((ephi * Q).mean() / ephi.mean())
    gs = ephi * (a_star + Q)
    F = _spectral_antiderivative(2.0 * gs)
    F -= float(F @ w / w.sum())
    return CircleSolution(t, g, F, gs, Eh, float(c), float(a), a_star,
                          _periodic_spline(t, g), _periodic_spline(t, F), _periodic_spline(t, gs))


def circle_generator_mean(f: Callable, fpp: Callable, p: VonMisesCircle, fp: Callable,
                          n: int = CIRCLE_GRID) -> float:
    """``E[(f'' - phi' f') / 2]`` by quadrature, with exact derivatives supplied."""
    t = _circle_grid(n)
    w = np.exp(-p.value(t[:, None]))
    L = 0.5 * (fpp(t) - p.grad(t[:, None])[:, 0] * fp(t))
    return float(L @ w / w.sum())


# ---------------------------------------------------------------------------
# generator by finite differences


def _stencil(M: Manifold, x: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Points ``x, exp(x, +eps e_i), exp(x, -eps e_i)`` and the frame at ``x``."""
    F = np.asarray(M.frame(x))
    plus = M.exp(np.broadcast_to(x, F.shape), eps * F)
    minus = M.exp(np.broadcast_to(x, F.shape), -eps * F)
    return np.concatenate([x[None, :], plus, minus]), F


def _generator_from_values(M: Manifold, p: Potential, x, F, vals, eps):
    """``L f`` from stencil values; ``vals`` has trailing axis ``2m + 1``."""
    m = M.dim
    f0, fp, fm = vals[..., :1], vals[..., 1:m + 1], vals[..., m + 1:]
    lap = ((fp - 2.0 * f0 + fm) / eps**2).sum(axis=-1)
    dirs = (fp - fm) / (2.0 * eps)
    gphi = M.inner(np.broadcast_to(x, F.shape), F, np.broadcast_to(p.grad(x), F.shape))
    return 0.5 * (lap - dirs @ gphi)


def generator_fd(f: Callable, p: Potential, x, eps: float = 0.05) -> np.ndarray:
    """Finite-difference ``L f`` at a batch of points ``x``."""
    M = p.manifold
    x = np.atleast_2d(np.asarray(x, dtype=float))
    F = np.asarray(M.frame(x))  # (n, m, amb)
    xb = np.broadcast_to(x[:, None, :], F.shape)
    plus, minus = M.exp(xb, eps * F), M.exp(xb, -eps * F)
    f0 = np.asarray(f(x))
    fp, fm = np.asarray(f(plus)), np.asarray(f(minus))
    lap = ((fp - 2.0 * f0[:, None] + fm) / eps**2).sum(axis=-1)
    dirs = (fp - fm) / (2.0 * eps)
    gphi = M.inner(xb, F, np.broadcast_to(p.grad(x)[:, None, :], F.shape))
    return 0.5 * (lap - (dirs * gphi).sum(axis=-1))


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    noise: float
    inconclusive: bool
    residual_half_eps: float
    generator: float


def stein_residual(x: Point, h: TestFunction, f, p: Potential, eps: float = 0.05,
                   Eh: Optional[float] = None) -> ResidualReport:
    """``|h(x) - E h - L f(x)|`` with ``L f`` from a geodesic finite-difference stencil.

    ``f`` is a deterministic callable on ambient coordinates or a
    :class:`MonteCarloSteinSolver`; for the latter the stencil shares noise
    and the propagated Monte Carlo error is reported in ``noise``.
    """
    p.check_point(x)
    M = p.manifold
    if Eh is None:
        Eh = f.Eh.mean if isinstance(f, MonteCarloSteinSolver) else stationary_mean(h, p).mean
    target = h(x) - Eh

    def once(e):
        pts, F = _stencil(M, x.coords, e)
        if isinstance(f, MonteCarloSteinSolver):
            c = f.evaluate(pts)
            per = _generator_from_values(M, p, x.coords, F, c.per_path, e)
            Lf = float(per.mean())
            noise = float(per.std(ddof=1) / np.sqrt(per.size))
        else:
            Lf = float(_generator_from_values(M, p, x.coords, F, np.asarray(f(pts)), e))
            noise = 0.0
        return Lf, noise

    Lf, noise = once(eps)
    Lf2, _ = once(eps / 2)
    res = abs(target - Lf)
    return ResidualReport(res, noise, bool(noise > 0 and res < 3 * noise), abs(target - Lf2), Lf)


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    violations: list
    limit: float


def lipschitz_probe(f: Callable, pairs: tuple[np.ndarray, np.ndarray], kappa: float, c0h: float,
                    M: Manifold, noise: float = 0.0) -> LipschitzReport:
    """Largest ``|f(x) - f(y)| / rho(x, y)`` over the pairs against ``c0h / kappa``."""
    xs, ys = (np.atleast_2d(np.asarray(a, dtype=float)) for a in pairs)
    d = M.dist(xs, ys)
    ratios = np.abs(np.asarray(f(xs)) - np.asarray(f(ys))) / d
    limit = c0h / kappa
    bad = np.nonzero(ratios > limit * (1 + 1e-6) + 3.0 * noise / np.maximum(d, 1e-300))[0]
    return LipschitzReport(float(ratios.max()), bad.tolist(), limit)


def stein_identity_check(f: Callable, p: Potential, kappa: Optional[float] = None, eps: float = 0.05,
                         step: float = DEFAULT_STEP, seed: int = 0, n_chains: int = 1,
                         bias_budget: float = 0.01) -> dict:
    """Ergodic average of finite-difference ``L f`` along a chain of length ``200 / kappa``."""
    if kappa is None:
        kappa = a1_certificate(p).kappa
    if kappa is None:
        raise InvalidArgumentError("kappa is required")
    chain = run_chains(p, 200.0 / kappa, 20.0 / kappa, h=step, n_chains=n_chains, rng=seed)
    flat = chain.reshape(-1, chain.shape[-1])
    vals = generator_fd(f, p, flat, eps).reshape(chain.shape[:2])
    em = batch_means(vals)
    return {"mean": em.mean, "stderr": em.stderr, "budget": bias_budget,
            "pass": abs(em.mean) <= 3 * em.stderr + bias_budget}
