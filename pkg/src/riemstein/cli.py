"""Config-driven experiment runner.

Usage::

    riemstein run CONFIG.ini
    riemstein report OUTPUT_DIR
    riemstein selftest [--output DIR]

A config is an INI file: flat ``key = value`` lines under ``[section]``
headers. ``[run]`` holds ``experiment`` (simulate, couple, stein, bound,
compare, selftest), ``seed`` and ``output``; ``[manifold]`` and
``[potential]`` describe the model; ``[sde]``, ``[coupling]``, ``[stein]``,
``[bound]`` and ``[compare]`` carry numeric knobs. The ``SEED`` environment
variable overrides ``[run] seed``. Vectors are comma separated, matrix rows
are separated by ``;``.

Every run writes ``checks.json`` (one row per enabled check) plus the
experiment's artifacts. Exit status: 0 when all checks pass, 1 when some
check fails (listed on stderr), 2 on configuration errors or missing
artifacts.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import svg
from .bounds import (
    BoundConstants,
    BoundReport,
    dH_bound_check,
    eta_star,
    fh_constant_bounds,
    fisher_watson_bound,
    haar_sqrt_mean,
    vmf_vmf_bound,
    vmf_vmf_geometric,
    wasserstein_bound_general,
)
from .coupling import CouplingConfig, Mode, run_coupled
from .geometry import (
    Circle,
    Euclidean,
    GeometryError,
    Hyperbolic,
    Manifold,
    Point,
    Rotations,
    Sphere,
)
from .potentials import (
    FisherWatsonSphere,
    GaussianEuclidean,
    Potential,
    SqDistHyperbolic,
    VmfRotations,
    VmfSphere,
    VonMisesCircle,
    a1_certificate,
)
from .sde import SdeConfig, batch_means, simulate
from .stein import MonteCarloSteinSolver, circle_solve, lipschitz_probe, stein_residual
from .testfunctions import lookup, registry
from .transport import SampleSet, sample_diffusion, sample_exact, sample_uniform_rotations, w1_empirical

EXPERIMENTS = ("simulate", "couple", "stein", "bound", "compare", "selftest")
CHECK_FIELDS = ("name", "anchor", "value", "bound", "pass")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    experiment: str
    seed: int
    output: Path
    sections: dict = field(default_factory=dict)
    checks: Optional[list] = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def num(self, section: str, key: str, default=None) -> Optional[float]:
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not a number: {v!r}") from None

    def int(self, section: str, key: str, default=None) -> Optional[int]:
        v = self.num(section, key, default)
        if v is None:
            return None
        if v != int(v):
            raise ConfigError(f"[{section}] {key}: expected an integer")
        return int(v)

    def vec(self, section: str, key: str, default=None) -> Optional[np.ndarray]:
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return np.array([float(s) for s in v.split(",")])
        except ValueError:
            raise ConfigError(f"[{section}] {key}: bad vector {v!r}") from None

    def matrix(self, section: str, key: str) -> Optional[np.ndarray]:
        v = self.get(section, key)
        if v is None:
            return None
        try:
            rows = [[float(s) for s in r.split(",")] for r in v.split(";")]
            return np.array(rows)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: bad matrix {v!r}") from None


def load_config(path, env=None) -> RunConfig:
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as A and C0_phi are case sensitive
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    sections = {s: dict(cp[s]) for s in cp.sections()}
    run = sections.get("run")
    if run is None:
        raise ConfigError("missing [run] section")
    exp = run.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"[run] experiment must be one of {', '.join(EXPERIMENTS)}")
    seed_s = env.get("SEED", run.get("seed"))
    if seed_s is None:
        raise ConfigError("[run] seed is mandatory")
    try:
        seed = int(seed_s)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {seed_s!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    out = Path(run.get("output", "out"))
    if not out.is_absolute():
        out = Path(path).resolve().parent / out
    checks = run.get("checks")
    checks = [c.strip() for c in checks.split(",") if c.strip()] if checks else None
    return RunConfig(exp, seed, out, sections, checks)


def build_manifold(cfg: RunConfig) -> Manifold:
    kind = (cfg.get("manifold", "kind") or "").lower()
    dim = cfg.int("manifold", "dim", None)
    if kind == "circle":
        return Circle()
    if kind == "rotations":
        return Rotations(3 if dim is None else dim)
    cls = {"euclidean": Euclidean, "sphere": Sphere, "hyperbolic": Hyperbolic}.get(kind)
    if cls is None:
        raise ConfigError(f"[manifold] unknown kind {kind!r}")
    return cls(2 if dim is None else dim)


def build_potential(cfg: RunConfig, M: Manifold) -> Potential:
    p = _potential(cfg, M)
    if p.manifold != M:
        raise ConfigError(f"potential lives on {p.manifold}, config says {M}")
    return p


def _potential(cfg: RunConfig, M: Manifold) -> Potential:
    fam = (cfg.get("potential", "family") or "").lower()
    c = cfg.num("potential", "c", 1.0)
    center = cfg.vec("potential", "center")
    if fam == "vmf_sphere":
        return VmfSphere(M.origin() if center is None else center, c)
    if fam == "sqdist_hyperbolic":
        return SqDistHyperbolic(M.origin() if center is None else center, c)
    if fam == "vmf_rotations":
        return VmfRotations(M.origin() if center is None else center, c)
    if fam == "von_mises_circle":
        return VonMisesCircle(0.0 if center is None else float(center[0]), c)
    if fam == "gaussian":
        A = cfg.matrix("potential", "A")
        if A is None:
            A = cfg.num("potential", "a", 1.0) * np.eye(M.dim)
        mean = np.zeros(M.dim) if center is None else center
        return GaussianEuclidean(mean, A)
    if fam == "fisher_watson":
        return FisherWatsonSphere(cfg.vec("potential", "x1"), cfg.num("potential", "c1"),
                                  cfg.vec("potential", "x2"), cfg.num("potential", "c2"))
    raise ConfigError(f"[potential] unknown family {fam!r}")


def kappa_of(cfg: RunConfig, p: Potential) -> Optional[float]:
    k = cfg.num("potential", "kappa")
    return k if k is not None else a1_certificate(p).kappa


# ---------------------------------------------------------------------------
# results


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    def add(self, name: str, anchor: str, value: float, bound: float, ok: bool):
        self.checks.append({"name": name, "anchor": anchor, "value": float(value),
                            "bound": float(bound), "pass": bool(ok)})


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else _fmt(x) for x in r])


def _dump_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _point(M: Manifold, v) -> Point:
    """Config coordinates are accepted within 1e-6 of the manifold, then projected."""
    v = np.asarray(v, dtype=float)
    if v.shape != (M.ambient_dim,):
        raise ConfigError(f"point {v.tolist()} needs {M.ambient_dim} coordinates on {M}")
    if float(M.point_residual(v)) > 1e-6:
        raise ConfigError(f"point {v.tolist()} is not on {M}")
    return Point(M, M.project_point(v))


# ---------------------------------------------------------------------------
# experiments


def _default_pair(M: Manifold, sep: float):
    o = M.origin()
    v = np.asarray(M.frame(o))[0]
    return o, M.exp(o, sep * v / M.norm(o, v))


def exp_couple(cfg: RunConfig, out: Path) -> Outcome:
    M = build_manifold(cfg)
    p = build_potential(cfg, M)
    kappa = kappa_of(cfg, p)
    if kappa is None:
        raise ConfigError("couple needs a curvature certificate or [potential] kappa")
    sde = SdeConfig(step_h=cfg.num("sde", "step", 0.005), horizon_T=cfg.num("sde", "horizon", 6.0),
                    seed=cfg.seed)
    ccfg = CouplingConfig(guard_on=cfg.num("coupling", "guard_on"), guard_off=cfg.num("coupling", "guard_off"),
                          merge_tol=cfg.num("coupling", "merge_tol", 1e-6), sde=sde,
                          noise=cfg.get("coupling", "noise", "gaussian"))
    a, b = _default_pair(M, cfg.num("coupling", "separation", 1.0))
    x0 = _point(M, cfg.vec("coupling", "x0", a))
    y0 = _point(M, cfg.vec("coupling", "y0", b))
    n = cfg.int("coupling", "paths", 200)
    every = cfg.int("coupling", "record_every", 10)
    run = run_coupled(x0, y0, p, ccfg, rng=cfg.seed, n_paths=n, record_every=every)
    mean = run.dists.mean(axis=0)
    se = run.dists.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    frac = run.mode_fraction(Mode.INDEPENDENT)
    _write_csv(out / "decay.csv", ["t", "mean_dist", "stderr", "mode_fraction"],
               zip(run.times, mean, se, frac))
    d0 = float(mean[0])
    ref = d0 * np.exp(-kappa * run.times)
    svg.line_plot(out / "plots" / "decay.svg",
                  [("mean dist", run.times, mean), ("d0 exp(-kappa t)", run.times, ref)],
                  title=f"coupled distance on {M}", ylabel="distance", logy=True)
    res = Outcome()
    excess = mean - (ref + 3 * se)
    res.add("mean-decay", "coupled-decay", float(excess.max()), 0.0, bool(np.all(excess <= 1e-12)))
    if isinstance(M, (Euclidean, Hyperbolic)):
        h = sde.step_h
        with np.errstate(divide="ignore"):
            lhs = np.log(run.dists) - np.log(run.dists[:, :1])
        rhs = -kappa * run.times + 5 * h * run.times
        live = run.dists > ccfg.merge_tol
        bad = ((lhs > rhs + 1e-12) & live).any(axis=1)
        res.add("pathwise-decay", "coupled-decay", float(bad.mean()), 0.0, not bad.any())
    if math.isfinite(M.injectivity_radius):
        res.add("guard-exercised", "decoupling-guard", float(frac[:3].max()), 0.0, bool(frac[:3].max() > 0))
    return res


def exp_simulate(cfg: RunConfig, out: Path) -> Outcome:
    M = build_manifold(cfg)
    p = build_potential(cfg, M)
    kappa = kappa_of(cfg, p)
    T = cfg.num("sde", "horizon", 200.0 / kappa if kappa else 100.0)
    sde = SdeConfig(step_h=cfg.num("sde", "step", 0.005), horizon_T=T, seed=cfg.seed)
    x0 = _point(M, cfg.vec("sde", "x0", M.origin()))
    path = simulate(x0, p, sde)
    every = max(path.coords.shape[0] // 2000, 1)
    _write_csv(out / "path.csv", ["t"] + [f"x{i}" for i in range(M.ambient_dim)],
               ([t, *c] for t, c in zip(path.times[::every], path.coords[::every])))
    res = Outcome()
    resid = float(np.max(M.point_residual(path.coords)))
    res.add("on-manifold", "state-space", resid, 1e-9, resid <= 1e-9)
    funcs = registry(M)
    if funcs and kappa:
        burn = min(20.0 / kappa, 0.5 * T)
        mask = path.times >= burn
        h = funcs[0]
        vals = h(path.coords[mask])
        em = batch_means(vals)
        ex = sample_exact(p, 20000, cfg.seed + 1)
        ev = h(ex.coords)
        ese = float(ev.std(ddof=1) / math.sqrt(ev.size))
        gap = abs(em.mean - float(ev.mean()))
        tol = 3 * (em.stderr + ese) + 0.02
        res.add(f"ergodic-mean-{h.name}", "invariant-law", gap, tol, gap <= tol)
        run_mean = np.cumsum(vals) / np.arange(1, vals.size + 1)
        tt = path.times[mask]
        step = max(tt.size // 1000, 1)
        svg.line_plot(out / "plots" / "ergodic.svg",
                      [("running mean", tt[::step], run_mean[::step]),
                       ("exact mean", tt[::step], np.full(tt[::step].size, ev.mean()))],
                      title=f"ergodic average of {h.name}", ylabel=h.name)
    return res


def exp_stein(cfg: RunConfig, out: Path) -> Outcome:
    M = build_manifold(cfg)
    p = build_potential(cfg, M)
    kappa = cfg.num("stein", "kappa_eff", kappa_of(cfg, p))
    if kappa is None:
        raise ConfigError("stein needs [stein] kappa_eff when no certificate exists")
    try:
        h = lookup(M, cfg.get("stein", "test_function", registry(M)[0].name if registry(M) else ""))
    except KeyError as e:
        raise ConfigError(str(e)) from None
    k = cfg.int("stein", "points", 8)
    n_paths = cfg.int("stein", "paths", 2000)
    solver = MonteCarloSteinSolver(h, p, kappa, n_paths=n_paths, step=cfg.num("sde", "step", 0.005),
                                   seed=cfg.seed, horizon_T=cfg.num("stein", "horizon"))
    res = Outcome()
    rows = []
    if isinstance(M, Circle):
        sol = circle_solve(h, p)
        pts = np.linspace(-np.pi, np.pi, k, endpoint=False) + 0.1
        zs = []
        for q in pts:
            c = solver.evaluate(np.array([[q]]))
            rep = stein_residual(Point(M, [q]), h, sol, p, eps=1e-3, Eh=sol.Eh)
            rows.append([q, c.values[0], c.stderr[0], rep.residual])
            zs.append(abs(c.values[0] - float(sol.f(q))) / max(c.stderr[0], 1e-300))
        r = sol.residual(h, p)
        res.add("quadrature-residual", "circle-first-order", r, 1e-8, r < 1e-8)
        res.add("mc-vs-quadrature", "semigroup-solution", max(zs), 3.0, max(zs) <= 3.0)
        rng = np.random.default_rng(cfg.seed + 7)
        xs = rng.uniform(-np.pi, np.pi, (500, 1))
        ys = rng.uniform(-np.pi, np.pi, (500, 1))
        lip = lipschitz_probe(sol, (xs, ys), kappa, h.C0, M)
        res.add("lipschitz", "first-derivative-bound", lip.max_ratio, lip.limit * (1 + 1e-6), not lip.violations)
        grid = np.linspace(-np.pi, np.pi, 400)
        svg.line_plot(out / "plots" / "stein.svg",
                      [("quadrature f_h", grid, sol.f(grid)),
                       ("Monte Carlo", [r[0] for r in rows], [r[1] for r in rows])],
                      title=f"Stein solution for {h.name}", xlabel="angle", ylabel="f_h")
    else:
        eps = cfg.num("stein", "eps", 0.2)
        budget = cfg.num("stein", "budget", 0.05)
        pts = sample_exact(p, k, cfg.seed + 11).coords if _has_exact(p) else M.random_point(
            np.random.default_rng(cfg.seed + 11), k)
        worst = 0.0
        for x in pts:
            c = solver.evaluate(x[None, :])
            rep = stein_residual(Point(M, x), h, solver, p, eps=eps)
            rows.append([" ".join(_fmt(v) for v in x), c.values[0], c.stderr[0], rep.residual])
            worst = max(worst, rep.residual - 3 * rep.noise)
        res.add("stein-residual", "stein-equation", worst, budget, worst <= budget)
    _write_csv(out / "stein.csv", ["x", "f_h", "stderr", "residual"], rows)
    return res


def _has_exact(p: Potential) -> bool:
    return isinstance(p, (VmfSphere, GaussianEuclidean, VonMisesCircle, VmfRotations, FisherWatsonSphere))


def _w1_reps(draw_a: Callable, draw_b: Callable, reps: int) -> tuple[float, float]:
    vals = [w1_empirical(draw_a(r), draw_b(r)).value for r in range(reps)]
    se = float(np.std(vals, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return float(np.mean(vals)), se


def _bound_vmf_vmf(cfg: RunConfig, res: Outcome):
    S = Sphere(2)
    x1 = cfg.vec("bound", "x1", np.array([0.0, 0.0, 1.0]))
    x2 = cfg.vec("bound", "x2", np.array([0.0, 1.0, 0.0]))
    c1, c2 = cfg.num("bound", "c1", 0.3), cfg.num("bound", "c2", 0.3)
    kappa = cfg.num("bound", "kappa", 0.25)
    n, reps = cfg.int("bound", "n", 256), cfg.int("bound", "reps", 4)
    p1, p2 = VmfSphere(x1, c1), VmfSphere(x2, c2)
    s = cfg.seed
    big1, big2 = sample_exact(p1, 20000, s + 1), sample_exact(p2, 20000, s + 2)
    mr1 = float(S.dist(big1.coords, np.broadcast_to(x1, big1.coords.shape)).mean())
    mr2 = float(S.dist(big2.coords, np.broadcast_to(x2, big2.coords.shape)).mean())
    bound = vmf_vmf_bound(x1, c1, x2, c2, kappa, mr1, mr2)
    cs, _, r1, r2 = vmf_vmf_geometric(x1, c1, x2, c2)
    w, se = _w1_reps(lambda r: sample_exact(p1, n, s + 100 + r), lambda r: sample_exact(p2, n, s + 200 + r), reps)
    general = wasserstein_bound_general(p1, p2, big2, kappa)
    ok = bound >= w - 3 * se
    res.reports.append(BoundReport(bound, w, se, {"x1": x1.tolist(), "x2": x2.tolist(), "c1": c1, "c2": c2,
                                                  "kappa": kappa, "n": n, "reps": reps}, ok,
                                   {"name": "vmf-vmf", "c_star": cs, "rho1": r1, "rho2": r2, "mean_rho1": mr1,
                                    "mean_rho2": mr2, "general_bound": general}))
    res.add("vmf-vmf-bound", "vmf-pair", w, bound, ok)


def _bound_so_uniform(cfg: RunConfig, res: Outcome):
    c, kappa = cfg.num("bound", "c", 0.25), cfg.num("bound", "kappa", 0.125)
    n, reps = cfg.int("bound", "n", 256), cfg.int("bound", "reps", 4)
    n_haar = cfg.int("bound", "haar_draws", 100000)
    s = cfg.seed
    mean, hse = haar_sqrt_mean(n_haar, s + 1)
    dev = abs(mean - 4.0 / math.pi)
    res.add("haar-constant", "haar-mean", dev, max(3 * hse, 0.01), dev <= max(3 * hse, 0.01))
    bound = c / (2 * kappa) * mean
    R = Rotations()
    pv = VmfRotations(cfg.vec("bound", "center", R.origin()), c)
    w, se = _w1_reps(lambda r: sample_uniform_rotations(n, s + 100 + r), lambda r: sample_exact(pv, n, s + 200 + r),
                     reps)
    ok = bound >= w - 3 * se
    res.reports.append(BoundReport(bound, w, se, {"c": c, "kappa": kappa, "n": n, "reps": reps,
                                                  "haar_draws": n_haar}, ok,
                                   {"name": "so-uniform", "haar_mean": mean, "haar_stderr": hse,
                                    "four_over_pi": 4.0 / math.pi}))
    res.add("so-uniform-bound", "uniform-vs-vmf-rotations", w, bound, ok)


def _bound_fisher_watson(cfg: RunConfig, res: Outcome):
    S = Sphere(2)
    x1 = cfg.vec("bound", "x1", np.array([0.0, 0.0, 1.0]))
    x2 = cfg.vec("bound", "x2", np.array([0.0, 1.0, 0.0]))
    c1, c2 = cfg.num("bound", "c1", 0.3), cfg.num("bound", "c2", 0.2)
    kappa = cfg.num("bound", "kappa", 0.25)
    n, reps = cfg.int("bound", "n", 256), cfg.int("bound", "reps", 4)
    fw = FisherWatsonSphere(x1, c1, x2, c2)
    pv = VmfSphere(x1, c1)
    s = cfg.seed
    bound = fisher_watson_bound(x2, c2, kappa, sample_exact(fw, 20000, s + 1))
    w, se = _w1_reps(lambda r: sample_exact(fw, n, s + 100 + r), lambda r: sample_exact(pv, n, s + 200 + r), reps)
    ok = bound >= w - 3 * se
    res.reports.append(BoundReport(bound, w, se, {"x1": x1.tolist(), "x2": x2.tolist(), "c1": c1, "c2": c2,
                                                  "kappa": kappa, "n": n, "reps": reps}, ok,
                                   {"name": "fisher-watson"}))
    res.add("fisher-watson-bound", "fisher-watson-vs-vmf", w, bound, ok)


def _constants(cfg: RunConfig) -> BoundConstants:
    return BoundConstants(cfg.int("bound", "m", 2), cfg.num("bound", "kappa", 1.0), cfg.num("bound", "c2", 0.1),
                          cfg.num("bound", "C0_phi", 0.5), cfg.num("bound", "C1_phi", 0.5),
                          cfg.num("bound", "C2_phi", 0.5))


def _bound_constants(cfg: RunConfig, res: Outcome):
    bc = _constants(cfg)
    C = [cfg.num("bound", k, 1.0) for k in ("C0h", "C1h", "C2h")]
    fc = fh_constant_bounds(*C, bc)
    ok = bc.second_order_ok
    es = eta_star(bc) if ok else float("nan")
    res.reports.append(BoundReport(es, None, 0.0, {"m": bc.m, "kappa": bc.kappa, "c2": bc.c2, "C0_phi": bc.C0_phi,
                                                   "C1_phi": bc.C1_phi, "C2_phi": bc.C2_phi, "C_h": C}, ok,
                                   {"name": "constants", "lambda": bc.lam, "C0f": fc.C0f, "C1f": fc.C1f,
                                    "C2f": fc.C2f, "eta_star": es, "reason": fc.reason}))
    res.add("second-order-condition", "regularity-constants", 6 * bc.kappa, bc.lam, ok)


def _bound_dH(cfg: RunConfig, res: Outcome):
    S = Sphere(2)
    x1 = cfg.vec("bound", "x1", np.array([0.0, 0.0, 1.0]))
    c1, c2 = cfg.num("bound", "c1", 0.3), cfg.num("bound", "c2_target", 0.4)
    kappa = cfg.num("bound", "kappa", 0.25)
    n = cfg.int("bound", "n", 256)
    bc = BoundConstants(2, kappa, cfg.num("bound", "c2", 0.0), c2, c2, c2)
    if not bc.second_order_ok:
        raise ConfigError(f"dH check needs 6 kappa > lambda (lambda = {bc.lam:g})")
    es = eta_star(bc)
    rep = dH_bound_check(sample_exact(VmfSphere(x1, c1), n, cfg.seed + 1),
                         sample_exact(VmfSphere(x1, c2), n, cfg.seed + 2), es)
    rep.details["name"] = "smooth-class"
    res.reports.append(rep)
    res.add("smooth-class-bound", "smooth-distance", rep.empirical, rep.bound + 3 * rep.stderr, rep.passed)


BOUND_EXAMPLES = {
    "vmf_vmf": _bound_vmf_vmf,
    "so_uniform": _bound_so_uniform,
    "fisher_watson": _bound_fisher_watson,
    "constants": _bound_constants,
    "dH": _bound_dH,
}


def exp_bound(cfg: RunConfig, out: Path) -> Outcome:
    names = [s.strip() for s in (cfg.get("bound", "examples") or "so_uniform").split(",") if s.strip()]
    res = Outcome()
    for name in names:
        fn = BOUND_EXAMPLES.get(name)
        if fn is None:
            raise ConfigError(f"[bound] unknown example {name!r}; known: {', '.join(BOUND_EXAMPLES)}")
        fn(cfg, res)
    return res


def exp_compare(cfg: RunConfig, out: Path) -> Outcome:
    M = build_manifold(cfg)
    p = build_potential(cfg, M)
    kappa = kappa_of(cfg, p)
    if not _has_exact(p):
        raise ConfigError("compare needs a potential with an exact sampler")
    n = cfg.int("compare", "n", 256)
    tol = cfg.num("compare", "tol", 0.05)
    step = cfg.num("sde", "step", 0.005)
    diff = sample_diffusion(p, n, kappa, rng=cfg.seed, step=step, n_chains=cfg.int("compare", "chains", 8))
    ex = sample_exact(p, n, cfg.seed + 1)
    ex2 = sample_exact(p, n, cfg.seed + 2)
    w = w1_empirical(diff, ex).value
    base = w1_empirical(ex2, ex).value
    ok = w <= base + tol
    res = Outcome()
    res.reports.append(BoundReport(base + tol, w, 0.0, {"n": n, "tol": tol, "kappa": kappa, "step": step}, ok,
                                   {"name": "diffusion-vs-exact", "exact_baseline": base}))
    res.add("diffusion-vs-exact", "invariant-law", w, base + tol, ok)
    diff.to_csv(out / "diffusion_samples.csv")
    return res


# ---------------------------------------------------------------------------
# selftest


def selftest_checks() -> Outcome:
    """Fast checks of exactly known quantities."""
    from .coupling import CoupledPairState, coupled_step
    from .sde import em_step
    from .geometry import TangentVector, distance, exp_map, log_map

    res = Outcome()
    rng = np.random.default_rng(0)
    for M in (Euclidean(3), Sphere(2), Hyperbolic(2), Rotations(), Circle()):
        x = Point(M, M.random_point(rng))
        v = TangentVector(x, 0.7 * M.random_tangent(x.coords, rng) / 2)
        y = exp_map(x, v)
        err = float(M.norm(x.coords, log_map(x, y).comps - v.comps))
        res.add(f"exp-log-roundtrip-{M.name}", "geometry", err, 1e-9, err <= 1e-9)
        F = np.asarray(M.frame(x.coords))
        G = M.inner(np.broadcast_to(x.coords, (M.dim, M.dim, M.ambient_dim)), F[:, None], F[None, :])
        e = float(np.abs(G - np.eye(M.dim)).max())
        res.add(f"frame-orthonormal-{M.name}", "geometry", e, 1e-12, e <= 1e-12)
    E = Euclidean(2)
    g = GaussianEuclidean(np.zeros(2), np.eye(2))
    z = em_step(Point(E, [1.0, 0.0]), g, 0.01, TangentVector(Point(E, [1.0, 0.0]), [0.0, 0.0]))
    e = float(np.abs(z.coords - [0.995, 0.0]).max())
    res.add("em-step-drift", "sde", e, 1e-15, e <= 1e-15)
    a = SampleSet(Euclidean(1), np.arange(4.0)[:, None])
    b = SampleSet(Euclidean(1), np.arange(1.0, 5.0)[:, None])
    w = w1_empirical(a, b).value
    res.add("w1-line-shift", "transport", abs(w - 1.0), 1e-12, abs(w - 1.0) <= 1e-12)
    bc = BoundConstants(2, 1.0, 0.1, 0.5, 0.5, 0.5)
    d = abs(eta_star(bc) - 5.558426262594641)
    res.add("eta-star-golden", "regularity-constants", d, 1e-12, d <= 1e-12)
    d = abs(fh_constant_bounds(1, 1, 1, bc).C2f - 3.116852525189283)
    res.add("C2f-golden", "regularity-constants", d, 1e-12, d <= 1e-12)
    # Euclidean coupling: the difference decays deterministically
    cc = CouplingConfig(sde=SdeConfig(step_h=0.01, horizon_T=1.0))
    s = CoupledPairState.start(Point(E, [0.0, 0.0]), Point(E, [1.0, 0.0]), cc)
    for _ in range(100):
        s = coupled_step(s, g, 0.01, rng, cc)
    e = abs(s.dist - 0.995**100)
    res.add("euclidean-coupling", "coupled-decay", e, 1e-12, e <= 1e-12)
    u = circle_solve(lambda t: np.cos(t[..., 0]), VonMisesCircle(0.0, 0.0))
    tt = np.linspace(-3, 3, 7)
    e = float(np.abs(u.g(tt) - np.sin(tt)).max())
    res.add("circle-uniform-solution", "circle-first-order", e, 1e-10, e <= 1e-10)
    d = distance(Point(Sphere(2), [1.0, 0, 0]), Point(Sphere(2), [0, 1.0, 0]))
    res.add("sphere-quarter-distance", "geometry", abs(d - math.pi / 2), 1e-15, abs(d - math.pi / 2) <= 1e-15)
    return res


# ---------------------------------------------------------------------------
# driver

RUNNERS = {
    "simulate": exp_simulate,
    "couple": exp_couple,
    "stein": exp_stein,
    "bound": exp_bound,
    "compare": exp_compare,
    "selftest": lambda cfg, out: selftest_checks(),
}


def _finish(res: Outcome, out: Path, meta: dict, requested: Optional[list]) -> int:
    if requested is not None:
        known = {c["name"] for c in res.checks}
        missing = [r for r in requested if r not in known]
        if missing:
            print(f"unknown checks requested: {', '.join(missing)}", file=sys.stderr)
            return 2
        res.checks = [c for c in res.checks if c["name"] in requested]
    _dump_json(out / "checks.json", {**meta, "checks": res.checks})
    if res.reports:
        _dump_json(out / "bounds.json", [r.to_json() for r in res.reports])
    failed = [c for c in res.checks if not c["pass"]]
    for c in failed:
        print(f"FAIL {c['name']}: value {c['value']:.6g} vs bound {c['bound']:.6g}", file=sys.stderr)
    return 1 if failed else 0


def run(config_path) -> int:
    try:
        cfg = load_config(config_path)
        out = cfg.output
        (out / "plots").mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        res = RUNNERS[cfg.experiment](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (GeometryError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    meta = {"experiment": cfg.experiment, "seed": cfg.seed}
    code = _finish(res, out, meta, cfg.checks)
    print(f"{cfg.experiment}: {len(res.checks)} checks, wrote {out} in {time.perf_counter() - t0:.1f}s")
    return code


def selftest(output=None) -> int:
    res = selftest_checks()
    if output is not None:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        return _finish(res, out, {"experiment": "selftest", "seed": 0}, None)
    bad = [c for c in res.checks if not c["pass"]]
    for c in bad:
        print(f"FAIL {c['name']}", file=sys.stderr)
    print(f"selftest: {len(res.checks) - len(bad)}/{len(res.checks)} passed")
    return 1 if bad else 0


def report(output_dir) -> int:
    path = Path(output_dir) / "checks.json"
    try:
        data = json.loads(path.read_text())
        rows = data["checks"]
        for r in rows:
            if set(CHECK_FIELDS) - set(r):
                raise KeyError("missing fields")
    except (OSError, ValueError, KeyError, TypeError) as e:
        print(f"no usable checks.json in {output_dir}: {e}", file=sys.stderr)
        return 2
    header = ("name", "anchor", "value", "bound", "pass")
    cells = [[r["name"], r["anchor"], f"{r['value']:.6g}", f"{r['bound']:.6g}", "pass" if r["pass"] else "FAIL"]
             for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for c in cells:
        print("  ".join(v.ljust(w) for v, w in zip(c, widths)))
    return 0 if all(r["pass"] for r in rows) else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="riemstein", description="Stein's method experiments on manifolds")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run an experiment from an INI config")
    p_run.add_argument("config")
    p_rep = sub.add_parser("report", help="print the check table of an output directory")
    p_rep.add_argument("dir")
    p_st = sub.add_parser("selftest", help="run the quick exact-value checks")
    p_st.add_argument("--output", default=None)
    args = ap.parse_args(argv)
    if args.cmd == "run":
        return run(args.config)
    if args.cmd == "report":
        return report(args.dir)
    return selftest(args.output)


if __name__ == "__main__":
    sys.exit(main())
