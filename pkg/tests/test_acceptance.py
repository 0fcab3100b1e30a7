"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (the lines are printed with capture disabled) or directly
with ``python tests/test_acceptance.py``. Tolerances are pinned here and
must not be loosened to make a criterion pass.
"""
import itertools
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from riemstein.bounds import BoundConstants, eta_star, fh_constant_bounds, haar_sqrt_mean, vmf_vmf_bound, vmf_vmf_geometric
from riemstein.coupling import CouplingConfig, Mode, run_coupled
from riemstein.geometry import Circle, Euclidean, Hyperbolic, Point, Rotations, Sphere, TangentVector
from riemstein.potentials import GaussianEuclidean, SqDistHyperbolic, VmfRotations, VmfSphere, VonMisesCircle
from riemstein.sde import SdeConfig, flow_derivative_fd
from riemstein.stein import MonteCarloSteinSolver, circle_solve, lipschitz_probe, stein_identity_check
from riemstein.testfunctions import lookup
from riemstein.transport import SampleSet, cost_matrix, sample_exact, sample_uniform_rotations, w1_empirical

pytestmark = pytest.mark.acceptance

_printer = print


@pytest.fixture(autouse=True)
def _uncaptured(capsys):
    global _printer

    def emit(*a):
        with capsys.disabled():
            print("\n" + " ".join(map(str, a)))

    _printer = emit
    yield
    _printer = print


def verdict(label, ok, detail):
    _printer(f"{'PASS' if ok else 'FAIL'}  {label:<28} {detail}")
    assert ok, f"{label}: {detail}"


# ---------------------------------------------------------------------------


def test_hyperbolic_pathwise_decay():
    t0 = time.perf_counter()
    h, T, kappa = 0.005, 6.0, 0.5
    p = SqDistHyperbolic(Hyperbolic(2).origin(), 1.0)
    H = p.manifold
    x = Point(H, H.exp(H.origin(), np.array([0.0, 1.0, 0.0])))
    y = Point(H, H.exp(H.origin(), np.array([0.0, -0.5, 0.8])))
    cfg = CouplingConfig(sde=SdeConfig(step_h=h, horizon_T=T), noise="aligned")
    run = run_coupled(x, y, p, cfg, rng=7, n_paths=200)
    d0 = run.dists[:, :1]
    with np.errstate(divide="ignore"):
        lhs = np.log(run.dists) - np.log(d0)
    ok_paths = np.all(lhs <= -kappa * run.times + 5 * h * run.times + 1e-12, axis=1)
    secs = time.perf_counter() - t0
    # for information: the same check with isotropic Gaussian noise
    g = run_coupled(x, y, p, CouplingConfig(sde=SdeConfig(step_h=h, horizon_T=T), noise="gaussian"),
                    rng=7, n_paths=200)
    with np.errstate(divide="ignore"):
        glhs = np.log(g.dists) - np.log(g.dists[:, :1])
    gauss_ok = np.all(glhs <= -kappa * g.times + 5 * h * g.times + 1e-12, axis=1).mean()
    verdict("hyperbolic-pathwise-decay", ok_paths.all() and secs < 120,
            f"{ok_paths.mean():.1%} of 200 paths within slack (gaussian noise: {gauss_ok:.1%}); {secs:.1f}s")


def test_sphere_mean_decay_with_guard():
    t0 = time.perf_counter()
    kappa = 0.25
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    x = Point(S, [1.0, 0.0, 0.0])
    y = Point(S, S.project_point(np.array([-1.0, 0.02, 0.01])))
    cfg = CouplingConfig(sde=SdeConfig(step_h=0.005, horizon_T=8.0))
    run = run_coupled(x, y, p, cfg, rng=11, n_paths=1000, record_every=10)
    mean = run.dists.mean(axis=0)
    se = run.dists.std(axis=0, ddof=1) / math.sqrt(run.dists.shape[0])
    d0 = float(S.dist(x.coords, y.coords))
    sel = run.times <= 8.0 + 1e-12
    excess = (mean - d0 * np.exp(-kappa * run.times) - 3 * se)[sel]
    guard = float(run.mode_fraction(Mode.INDEPENDENT)[:3].max())
    secs = time.perf_counter() - t0
    verdict("sphere-mean-decay", excess.max() <= 1e-12 and guard > 0 and secs < 300,
            f"max excess over d0 e^(-kt) + 3se = {excess.max():.4f}; independent fraction near 0 = {guard:.3f}; "
            f"{secs:.1f}s")


def test_euclidean_exact_coupling():
    h, a = 0.005, 1.0
    p = GaussianEuclidean([0.0, 0.0], a * np.eye(2))
    E = p.manifold
    run = run_coupled(Point(E, [1.0, -1.0]), Point(E, [-2.0, 0.5]), p,
                      CouplingConfig(sde=SdeConfig(step_h=h, horizon_T=5.0)), rng=0, n_paths=50)
    d0 = run.dists[:, :1]
    rel = np.abs(run.dists / (d0 * np.exp(-a * run.times / 2)) - 1).max()
    verdict("euclidean-exact-coupling", rel < 10 * h, f"max relative error {rel:.2e} < {10 * h:g} on all 50 paths")


def test_circle_stein_solver():
    t0 = time.perf_counter()
    p = VonMisesCircle(0.0, 1.0)
    h = lookup(Circle(), "cos")
    sol = circle_solve(h, p)
    resid = sol.residual(h, p)
    tt, gs = sol.grid[1::128], sol.g_star_values[1::128]
    d = 1e-5
    factor2 = np.abs((sol.f(tt + d) - sol.f(tt - d)) / (2 * d) - 2 * gs).max()
    solver = MonteCarloSteinSolver(h, p, 0.5, n_paths=4000, seed=3)
    pts = np.linspace(-np.pi, np.pi, 8, endpoint=False) + 0.1
    zs = []
    for q in pts:
        c = solver.evaluate(np.array([[q]]))
        zs.append(abs(c.values[0] - float(sol.f(q))) / c.stderr[0])
    secs = time.perf_counter() - t0
    verdict("circle-stein-solver", resid < 1e-8 and max(zs) <= 3 and factor2 < 1e-6 and secs < 180,
            f"quadrature residual {resid:.1e}; max |MC - quad| / se = {max(zs):.2f} over 8 points; "
            f"f' vs 2g {factor2:.1e}; {secs:.1f}s")


def test_stein_identity_on_sphere():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    names = ["coord0", "sin2dist0", "bump1"]
    outs = [stein_identity_check(lookup(S, n), p, seed=k, n_chains=4) for k, n in enumerate(names)]
    ok = all(abs(o["mean"]) <= 3 * o["stderr"] + 0.01 for o in outs)
    detail = "; ".join(f"{n}: {o['mean']:+.4f} (se {o['stderr']:.4f})" for n, o in zip(names, outs))
    verdict("stein-identity", ok, detail + " vs 3se + 0.01")


def test_lipschitz_bound_circle():
    p = VonMisesCircle(0.0, 1.0)
    h = lookup(Circle(), "cos")
    sol = circle_solve(h, p)
    rng = np.random.default_rng(10)
    xs, ys = rng.uniform(-np.pi, np.pi, (500, 1)), rng.uniform(-np.pi, np.pi, (500, 1))
    kappa_eff = 0.5
    rep = lipschitz_probe(sol, (xs, ys), kappa_eff, h.C0, Circle())
    limit = h.C0 / kappa_eff * (1 + 1e-6)
    verdict("lipschitz-bound", rep.max_ratio <= limit and not rep.violations,
            f"max ratio {rep.max_ratio:.4f} <= {limit:.6f}; {len(rep.violations)} violations in 500 pairs")


def test_vmf_pair_bound():
    t0 = time.perf_counter()
    S = Sphere(2)
    x1, x2, c, kappa, n, reps = np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), 0.3, 0.25, 256, 8
    p1, p2 = VmfSphere(x1, c), VmfSphere(x2, c)
    big1, big2 = sample_exact(p1, 20000, 1), sample_exact(p2, 20000, 2)
    mr1 = float(S.dist(big1.coords, np.broadcast_to(x1, big1.coords.shape)).mean())
    mr2 = float(S.dist(big2.coords, np.broadcast_to(x2, big2.coords.shape)).mean())
    bound = vmf_vmf_bound(x1, c, x2, c, kappa, mr1, mr2)
    cs, _, r1, r2 = vmf_vmf_geometric(x1, c, x2, c)
    geometric = cs / (4 * kappa) * (r1 + r2)
    w = [w1_empirical(sample_exact(p1, n, 100 + r), sample_exact(p2, n, 200 + r)).value for r in range(reps)]
    W, se = float(np.mean(w)), float(np.std(w, ddof=1) / math.sqrt(reps))
    secs = time.perf_counter() - t0
    verdict("vmf-pair-bound", bound >= W - 3 * se and abs(geometric - 0.3 * math.sqrt(2) * math.pi) < 1e-12
            and secs < 300,
            f"bound {bound:.4f} (geometric part {geometric:.4f}) >= W1 {W:.4f} - 3*{se:.4f}; {secs:.1f}s")


def test_haar_constant_and_rotation_bound():
    m, hse = haar_sqrt_mean(100000, 1)
    c, kappa, n, reps = 0.25, 0.125, 256, 4
    bound = c / (2 * kappa) * m
    pv = VmfRotations(Rotations().origin(), c)
    w = [w1_empirical(sample_uniform_rotations(n, 100 + r), sample_exact(pv, n, 200 + r)).value for r in range(reps)]
    W = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(reps))
    verdict("haar-constant", abs(m - 4 / math.pi) <= 0.01 and bound >= W - 3 * se,
            f"E sqrt(3 - tr Z^2) = {m:.5f} vs 4/pi = {4 / math.pi:.5f} (+-0.01); bound {bound:.4f} >= W1 {W:.4f}")


def test_constant_calculators():
    bc = BoundConstants(m=2, kappa=1.0, c2=0.1, C0_phi=0.5, C1_phi=0.5, C2_phi=0.5)
    c2f = fh_constant_bounds(1.0, 1.0, 1.0, bc).C2f
    es = eta_star(bc)
    golden = abs(c2f - 3.116852525189283) <= 1e-12 and abs(es - 5.558426262594641) <= 1e-12
    worst = 0.0
    for kappa in np.linspace(0.1, 3.0, 15):
        for C2 in np.linspace(0.0, 0.5, 6):
            for C0, C1 in ((0.0, 0.0), (0.5, 0.3), (2.0, 1.0)):
                b = BoundConstants(3, float(kappa), 0.0, C0, C1, float(C2))
                ratio = math.sqrt(C2 / (4 * kappa + C2))
                worst = max(worst, abs(eta_star(b) - (ratio + 6 + C0 + C1) / kappa),
                            abs(fh_constant_bounds(1.0, 1.0, 1.0, b).C2f - 2 / kappa * (ratio + 1)))
    verdict("constant-calculators", golden and worst < 1e-12,
            f"C2f = {c2f:.15g}, eta* = {es:.15g}; flat-case grid max error {worst:.1e}")


def test_flow_derivative():
    A = np.diag([0.8, 0.3])
    p = GaussianEuclidean([0.0, 0.0], A)
    x = Point(p.manifold, [0.4, -0.2])
    v = TangentVector(x, [0.6, 0.8])
    fd = flow_derivative_fd(x, v, p, SdeConfig(step_h=1e-3, horizon_T=2.0, seed=3), eps=1e-4, n_paths=4,
                            record_every=50)
    cont = np.array([np.linalg.norm(expm(-t * A / 2) @ v.comps) for t in fd.times])
    rel = float(np.abs(fd.norms / cont - 1).max())
    q = VmfSphere([0.0, 0.0, 1.0], 0.5)
    xs = Point(q.manifold, [1.0, 0.0, 0.0])
    sfd = flow_derivative_fd(xs, TangentVector(xs, [0.0, 0.0, 1.0]), q, SdeConfig(step_h=0.005, horizon_T=5.0, seed=8),
                             eps=1e-4, n_paths=200, record_every=20)
    rate = sfd.decay_rate()
    verdict("flow-derivative", rel < 1e-4 and rate <= -0.25 + 0.1,
            f"euclidean relative error {rel:.2e} < 1e-4; sphere fitted rate {rate:.3f} <= {-0.25 + 0.1:.2f}")


def test_transport_solver():
    rng = np.random.default_rng(0)
    worst_bf, worst_metric, cases = 0.0, 0.0, 0
    for M in (Euclidean(2), Sphere(2), Hyperbolic(2), Rotations(), Circle()):
        for n in range(1, 8):
            for _ in range(4):
                a, b, c = (SampleSet(M, M.random_point(rng, n)) for _ in range(3))
                C = cost_matrix(a, b)
                bf = min(C[np.arange(n), list(pm)].sum() for pm in itertools.permutations(range(n))) / n
                ab = w1_empirical(a, b).value
                worst_bf = max(worst_bf, abs(ab - bf))
                tri = ab + w1_empirical(b, c).value - w1_empirical(a, c).value
                worst_metric = max(worst_metric, abs(ab - w1_empirical(b, a).value), w1_empirical(a, a).value,
                                   -tri, -ab)
                cases += 1
    verdict("transport-solver", worst_bf <= 1e-9 and worst_metric <= 1e-9,
            f"{cases} instances n <= 7: brute-force gap {worst_bf:.1e}; metric-property violation {worst_metric:.1e}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
