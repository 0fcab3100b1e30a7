"""Parallel-transport coupling of two Langevin diffusions with a decoupling guard.

While the pair is *coupled*, ``y`` is driven by the noise of ``x`` transported
along the minimal geodesic between them. Once the distance reaches
``guard_on`` the legs evolve with independent noise until the distance falls
back below ``guard_off``. A pair closer than ``merge_tol`` is *merged*:
``y`` is snapped onto ``x`` and both follow the same path from then on.

Two noise laws are available for the coupled phase. ``"gaussian"`` draws
standard normal coefficients in the deterministic frame at ``x``.
``"aligned"`` draws Rademacher (+1/-1) coefficients in a frame whose first
vector points along the geodesic to ``y``. Both give a first-order weak
scheme for each leg. With Gaussian noise the squared transverse increment
``xi_perp^2 h`` fluctuates around its mean ``h``, so the discrete distance
picks up a random walk of size ``sqrt(h T)`` that the continuous coupling
does not have. Rademacher coefficients make ``xi_perp^2 = 1`` exactly, which
keeps the pathwise contraction of the continuous construction visible at
step size ``h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .geometry import InvalidArgumentError, Point
from .potentials import Potential
from .sde import SdeConfig, aligned_frame, as_rng, coupled_em_step_batch, em_step_batch

__all__ = [
    "Mode",
    "CouplingConfig",
    "CoupledPairState",
    "CoupledRun",
    "DecayFit",
    "coupled_step",
    "independent_step",
    "pair_step_batch",
    "run_coupled",
    "fit_decay_rate",
]


class Mode(IntEnum):
    COUPLED = 0
    INDEPENDENT = 1
    MERGED = 2


@dataclass(frozen=True)
class CouplingConfig:
    """Guard band ``(guard_off, guard_on)``; ``None`` picks 0.8 and 0.9 of the injectivity radius."""

    guard_on: Optional[float] = None
    guard_off: Optional[float] = None
    merge_tol: float = 1e-6
    sde: SdeConfig = field(default_factory=SdeConfig)
    noise: str = "gaussian"

    def __post_init__(self):
        if self.noise not in ("gaussian", "aligned"):
            raise InvalidArgumentError(f"unknown noise law {self.noise!r}")

    def band(self, inj: float) -> tuple[float, float]:
        lo = 0.8 * inj if self.guard_off is None else float(self.guard_off)
        hi = 0.9 * inj if self.guard_on is None else float(self.guard_on)
        if np.isinf(inj) and np.isinf(lo) and np.isinf(hi):
            return lo, hi
        if not (0 < self.merge_tol < lo < hi < inj):
            raise InvalidArgumentError(
                f"need 0 < merge_tol < guard_off < guard_on < {inj}, got "
                f"{self.merge_tol}, {lo}, {hi}"
            )
        return lo, hi


@dataclass(frozen=True, eq=False)
class CoupledPairState:
    x: Point
    y: Point
    mode: Mode
    dist: float

    @classmethod
    def start(cls, x: Point, y: Point, cfg: CouplingConfig) -> "CoupledPairState":
        M = x.kind
        if y.kind != M:
            raise InvalidArgumentError("both legs must live on one manifold")
        d = float(M.dist(x.coords, y.coords))
        _, hi = cfg.band(M.injectivity_radius)
        mode = Mode.MERGED if d <= cfg.merge_tol else (Mode.INDEPENDENT if d >= hi else Mode.COUPLED)
        return cls(x, y, mode, d)


def _transition(modes, d, lo, hi, merge_tol):
    modes = modes.copy()
    active = modes != Mode.MERGED
    modes[active & (modes == Mode.COUPLED) & (d >= hi)] = Mode.INDEPENDENT
    modes[active & (modes == Mode.INDEPENDENT) & (d <= lo)] = Mode.COUPLED
    modes[active & (d <= merge_tol)] = Mode.MERGED
    return modes


def pair_step_batch(p: Potential, X, Y, modes, h, rng, band, merge_tol, noise="gaussian"):
    """Advance a batch of pairs by one step. Two noise arrays are drawn every step."""
    M = p.manifold
    lo, hi = band
    n = X.shape[0]
    if noise == "aligned":
        xi = rng.choice([-1.0, 1.0], size=(n, M.dim))
        frame = aligned_frame(M, X, Y)
    else:
        xi = rng.standard_normal((n, M.dim))
        frame = None
    xi2 = rng.standard_normal((n, M.dim))
    Xn, Yc = coupled_em_step_batch(M, p, X, Y, h, xi, frame)
    Yi = em_step_batch(M, p, Y, h, xi2)
    c = (modes == Mode.COUPLED)[:, None]
    m = (modes == Mode.MERGED)[:, None]
    Yn = np.where(m, Xn, np.where(c, Yc, Yi))
    d = M.dist(Xn, Yn)
    new_modes = _transition(modes, d, lo, hi, merge_tol)
    snap = (new_modes == Mode.MERGED)
    Yn[snap] = Xn[snap]
    d = np.where(snap, 0.0, d)
    return Xn, Yn, new_modes, d


def _single_step(s: CoupledPairState, p: Potential, h: float, rng, cfg: CouplingConfig):
    M = s.x.kind
    band = cfg.band(M.injectivity_radius)
    X, Y, modes, d = pair_step_batch(
        p, s.x.coords[None], s.y.coords[None], np.array([s.mode]), h, as_rng(rng), band, cfg.merge_tol,
        cfg.noise,
    )
    return CoupledPairState(Point(M, X[0]), Point(M, Y[0]), Mode(int(modes[0])), float(d[0]))


def coupled_step(s: CoupledPairState, p: Potential, h: float, rng, cfg: Optional[CouplingConfig] = None):
    """One step of a coupled (or merged) pair; a pair at the guard becomes independent."""
    cfg = cfg or CouplingConfig()
    if s.mode == Mode.INDEPENDENT:
        raise InvalidArgumentError("pair is in independent mode")
    if s.mode == Mode.COUPLED:
        _, hi = cfg.band(s.x.kind.injectivity_radius)
        if s.dist >= hi:
            # transport would be ill-defined or unreliable here
            s = CoupledPairState(s.x, s.y, Mode.INDEPENDENT, s.dist)
    return _single_step(s, p, h, rng, cfg)


def independent_step(s: CoupledPairState, p: Potential, h: float, rng, cfg: Optional[CouplingConfig] = None):
    """One step with independent noise on the two legs."""
    cfg = cfg or CouplingConfig()
    if s.mode != Mode.INDEPENDENT:
        raise InvalidArgumentError("pair is not in independent mode")
    return _single_step(s, p, h, rng, cfg)


@dataclass(frozen=True)
class CoupledRun:
    times: np.ndarray
    dists: np.ndarray  # (n_paths, n_nodes)
    modes: np.ndarray  # (n_paths, n_nodes) of Mode values

    def mode_fraction(self, mode: Mode = Mode.INDEPENDENT) -> np.ndarray:
        return (self.modes == mode).mean(axis=0)


def run_coupled(
    x0: Point,
    y0: Point,
    p: Potential,
    cfg: CouplingConfig,
    rng=None,
    n_paths: int = 1,
    record_every: int = 1,
) -> CoupledRun:
    """Simulate ``n_paths`` coupled pairs from ``(x0, y0)`` over ``cfg.sde.horizon_T``.

    The loop ends early once every pair has merged; remaining nodes are
    filled with zero distance and the merged mode.
    """
    p.check_point(x0)
    p.check_point(y0)
    M = x0.kind
    band = cfg.band(M.injectivity_radius)
    rng = cfg.sde.rng() if rng is None else as_rng(rng)
    h = cfg.sde.step_h
    n_steps = cfg.sde.n_steps
    s0 = CoupledPairState.start(x0, y0, cfg)
    X = np.tile(x0.coords, (n_paths, 1))
    Y = np.tile(y0.coords, (n_paths, 1)) if s0.mode != Mode.MERGED else X.copy()
    modes = np.full(n_paths, s0.mode, dtype=np.int8)
    d = np.full(n_paths, 0.0 if s0.mode == Mode.MERGED else s0.dist)
    n_nodes = n_steps // record_every + 1
    dists = np.zeros((n_paths, n_nodes))
    mrec = np.full((n_paths, n_nodes), Mode.MERGED, dtype=np.int8)
    dists[:, 0], mrec[:, 0] = d, modes
    for k in range(1, n_steps + 1):
        if np.all(modes == Mode.MERGED):
            break
        X, Y, modes, d = pair_step_batch(p, X, Y, modes, h, rng, band, cfg.merge_tol, cfg.noise)
        if k % record_every == 0:
            j = k // record_every
            dists[:, j], mrec[:, j] = d, modes
    times = h * record_every * np.arange(n_nodes)
    return CoupledRun(times, dists, mrec)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    ci: tuple[float, float]
    window: tuple[float, float]


def _slope(t, y):
    tc = t - t.mean()
    return float(tc @ (y - y.mean()) / (tc @ tc))


def fit_decay_rate(
    trajectories,
    times,
    ell: float = 1.0,
    n_boot: int = 200,
    rng=0,
    merge_tol: float = 1e-6,
    max_merged: float = 0.1,
) -> DecayFit:
    """Slope of ``log E[dist^ell]`` against ``t`` with a trajectory-bootstrap 95% CI.

    The fit window ends once more than ``max_merged`` of the trajectories
    have merged (distance at or below ``merge_tol``).
    """
    D = np.asarray(trajectories, dtype=float)
    t = np.asarray(times, dtype=float)
    if D.ndim != 2 or D.shape[1] != t.size:
        raise InvalidArgumentError("trajectories must be (n_paths, len(times))")
    if D.shape[0] < 30:
        raise InvalidArgumentError("need at least 30 trajectories")
    if ell < 1:
        raise InvalidArgumentError("ell must be >= 1")
    merged = (D <= merge_tol).mean(axis=0)
    over = np.nonzero(merged > max_merged)[0]
    end = over[0] if over.size else t.size
    P = D[:, :end] ** ell
    mean = P.mean(axis=0)
    ok = mean > 0
    if ok.sum() < 3:
        raise InvalidArgumentError("degenerate fit window")
    tw = t[:end][ok]
    rate = _slope(tw, np.log(mean[ok]))
    g = as_rng(rng)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = g.integers(0, D.shape[0], D.shape[0])
        mb = P[idx][:, ok].mean(axis=0)
        with np.errstate(divide="ignore"):
            boots[b] = _slope(tw, np.log(mb))
    boots = boots[np.isfinite(boots)]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return DecayFit(rate, (float(lo), float(hi)), (float(tw[0]), float(tw[-1])))
