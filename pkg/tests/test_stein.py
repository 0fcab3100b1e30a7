import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import i0, i1

from riemstein.geometry import Circle, Euclidean, InvalidArgumentError, Point, Sphere
from riemstein.potentials import GaussianEuclidean, VmfSphere, VonMisesCircle
from riemstein.sde import ErgodicMean
from riemstein.stein import (
    MonteCarloSteinSolver,
    circle_expectation,
    circle_generator_mean,
    circle_solve,
    generator_fd,
    horizon_for,
    lipschitz_probe,
    solve_fh,
    stein_identity_check,
    stein_residual,
)
from riemstein.testfunctions import TestFunction, lookup, registry

COS = lookup(Circle(), "cos")


def test_horizon_rule():
    assert horizon_for(0.25) == 40.0
    assert horizon_for(4.0) == 5.0


def test_circle_expectation_bessel():
    assert circle_expectation(COS, VonMisesCircle(0.0, 1.0)) == pytest.approx(i1(1.0) / i0(1.0), abs=1e-13)
    # shifted centre moves the mean of cos to cos(x0) I1/I0
    p = VonMisesCircle(0.7, 2.0)
    assert circle_expectation(COS, p) == pytest.approx(math.cos(0.7) * i1(2.0) / i0(2.0), abs=1e-13)


def test_uniform_circle_closed_form():
    # c = 0: L f = f''/2 = cos gives f = -2 cos and g = sin
    sol = circle_solve(COS, VonMisesCircle(0.0, 0.0))
    t = np.linspace(-3.0, 3.0, 13)
    assert np.abs(sol.g(t) - np.sin(t)).max() < 1e-10
    assert np.abs(sol.f(t) + 2 * np.cos(t)).max() < 1e-10
    assert sol.a_star == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("c", [0.3, 1.0, 3.0])
def test_circle_first_order_residual(c):
    p = VonMisesCircle(0.4, c)
    for h in registry(Circle()):
        sol = circle_solve(h, p)
        assert sol.residual(h, p) < 1e-8


def test_circle_solution_properties():
    p = VonMisesCircle(0.0, 1.0)
    h = lookup(Circle(), "cosdist1")
    sol = circle_solve(h, p)
    # E f = 0
    assert abs(circle_expectation(sol, p)) < 1e-12
    # f' = 2 g_* and g_* integrates to zero over the circle
    t = np.linspace(-3.0, 3.0, 25)
    d = 1e-5
    fd = (sol.f(t + d) - sol.f(t - d)) / (2 * d)
    assert np.abs(fd - sol.f_prime(t)).max() < 1e-6
    assert abs(sol.g_star_values.mean()) < 1e-12
    # evaluation respects periodicity
    assert float(sol.f(np.pi - 1e-9)) == pytest.approx(float(sol.f(-np.pi + 1e-9)), abs=1e-6)


@given(a=st.floats(-3.0, 3.0))
def test_circle_constant_a_only_shifts_g(a):
    p = VonMisesCircle(0.0, 1.0)
    s0 = circle_solve(COS, p, a=0.0)
    sa = circle_solve(COS, p, a=a)
    # g_a - g_0 = a c e^{phi}
    ephi = s0.c_phi * np.exp(p.value(s0.grid[:, None]))
    assert np.abs(sa.g_values - s0.g_values - a * ephi).max() < 1e-9 * max(1, abs(a)) * ephi.max()
    assert np.array_equal(sa.f_values, s0.f_values)
    assert sa.residual(COS, p) < 1e-8


def test_circle_solver_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        circle_solve(COS, VmfSphere([0.0, 0.0, 1.0], 0.5))
    with pytest.raises(InvalidArgumentError):
        circle_solve(COS, VonMisesCircle(0.0, 1.0), n=64)


def test_circle_generator_mean_vanishes():
    p = VonMisesCircle(0.3, 1.5)
    v = circle_generator_mean(np.sin, lambda t: -np.sin(t), p, np.cos)
    assert abs(v) < 1e-12


def test_stein_residual_circle_quadrature():
    p = VonMisesCircle(0.0, 1.0)
    sol = circle_solve(COS, p)
    for q in (-2.0, 0.1, 1.3):
        rep = stein_residual(Point(Circle(), [q]), COS, sol, p, eps=1e-3, Eh=sol.Eh)
        assert rep.residual < 1e-6
        assert rep.noise == 0.0 and not rep.inconclusive


def test_generator_fd_sphere_oracle():
    # L x_j = (-2 x_j + c (x0_j - t x_j)) / 2 on S^2 with t = <x0, x>
    c = 0.5
    p = VmfSphere([0.0, 0.0, 1.0], c)
    X = Sphere(2).random_point(np.random.default_rng(1), 50)
    t = X[:, 2]
    for j in range(3):
        oracle = 0.5 * (-2 * X[:, j] + c * (p.x0[j] - t * X[:, j]))
        got = generator_fd(lambda x, j=j: x[..., j], p, X, eps=1e-3)
        assert np.abs(got - oracle).max() < 1e-5


def test_generator_fd_euclidean_oracle():
    A = np.array([[1.0, 0.2], [0.2, 0.5]])
    p = GaussianEuclidean([0.3, -0.1], A)
    X = np.random.default_rng(2).standard_normal((40, 2))
    oracle = 0.5 * (-np.sin(X[:, 0]) - (X - p.mean) @ A[0] * np.cos(X[:, 0]))
    got = generator_fd(lambda x: np.sin(x[..., 0]), p, X, eps=1e-3)
    assert np.abs(got - oracle).max() < 1e-6


def test_monte_carlo_solver_ou_oracle():
    # OU with A = a I and h = x_0: f_h = -2 (x_0 - mu_0) / a
    a = 1.0
    p = GaussianEuclidean([0.5, 0.0], a * np.eye(2))
    h = TestFunction(lambda x: x[..., 0], 1.0, 0.0, 0.0, "x0")
    est = solve_fh(Point(p.manifold, [1.5, 0.3]), h, p, a / 2, n_paths=400, seed=4,
                   Eh=ErgodicMean(0.5, 0.0, 1))
    assert est.horizon_T == 20.0
    assert abs(est.value + 2.0) < 3 * est.stderr + 0.02
    assert est.truncation_bound < 1e-2


def test_monte_carlo_matches_circle_quadrature():
    p = VonMisesCircle(0.0, 1.0)
    sol = circle_solve(COS, p)
    solver = MonteCarloSteinSolver(COS, p, 0.5, n_paths=600, seed=5)
    c = solver.evaluate(np.array([[0.5], [2.0]]))
    z = np.abs(c.values - sol.f(np.array([0.5, 2.0]))) / c.stderr
    assert z.max() < 4.0


def test_short_horizon_warns_and_kappa_required():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    x = Point(p.manifold, [1.0, 0.0, 0.0])
    h = lookup(p.manifold, "coord2")
    with pytest.warns(RuntimeWarning):
        est = solve_fh(x, h, p, 0.25, n_paths=10, horizon_T=5.0, Eh=ErgodicMean(0.0, 0.0, 1))
    assert "short-horizon" in est.flags
    with pytest.raises(InvalidArgumentError):
        solve_fh(x, h, p, None)
    with pytest.raises(InvalidArgumentError):
        MonteCarloSteinSolver(h, p, 0.0)


def test_shared_noise_makes_neighbours_close():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    h = lookup(p.manifold, "coord2")
    solver = MonteCarloSteinSolver(h, p, 0.25, n_paths=50, seed=1, horizon_T=10.0, Eh=ErgodicMean(0.0, 0.0, 1))
    S = p.manifold
    x = np.array([1.0, 0.0, 0.0])
    y = S.exp(x, np.array([0.0, 0.0, 0.01]))
    c = solver.evaluate(np.stack([x, y]))
    diff = c.per_path[:, 0] - c.per_path[:, 1]
    # per-path differences are Lipschitz-small, not of the size of the path noise
    assert np.abs(diff).max() < 0.01 * 2 / 0.25 + 1e-3
    assert np.abs(diff).max() < 0.2 * c.per_path[:, 0].std()


def test_lipschitz_probe_flags_violations():
    E = Euclidean(1)
    xs = np.linspace(0, 1, 10)[:, None]
    ys = xs + 0.5
    rep = lipschitz_probe(lambda x: 2 * x[..., 0], (xs, ys), 1.0, 1.0, E)
    assert rep.max_ratio == pytest.approx(2.0)
    assert len(rep.violations) == 10
    ok = lipschitz_probe(lambda x: 0.5 * x[..., 0], (xs, ys), 1.0, 1.0, E)
    assert not ok.violations and ok.limit == 1.0


def test_lipschitz_of_circle_solution():
    p = VonMisesCircle(0.0, 1.0)
    sol = circle_solve(COS, p)
    rng = np.random.default_rng(0)
    xs, ys = rng.uniform(-np.pi, np.pi, (500, 1)), rng.uniform(-np.pi, np.pi, (500, 1))
    assert not lipschitz_probe(sol, (xs, ys), 0.5, COS.C0, Circle()).violations


def test_stein_identity_check_sphere():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    out = stein_identity_check(lambda x: x[..., 0] * x[..., 2], p, seed=3, n_chains=8, step=0.01)
    assert out["pass"], out
