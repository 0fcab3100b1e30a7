import numpy as np
import pytest

from riemstein.geometry import Circle, Euclidean, Hyperbolic, Rotations, Sphere
from riemstein.testfunctions import TestFunction, linear_combination, lookup, registry

# finite differences of s -> h(exp(x, s u)) give grad h(u), Hess h(u, u) and D Hess h(u, u, u)
S = 1e-3


def _directional(M, h, x, u):
    s = S * np.arange(-2, 3)
    pts = M.exp(np.broadcast_to(x, (5, M.ambient_dim)), s[:, None] * u)
    v = h(pts)
    d1 = (v[3] - v[1]) / (2 * S)
    d2 = (v[3] - 2 * v[2] + v[1]) / S**2
    d3 = (v[4] - 2 * v[3] + 2 * v[1] - v[0]) / (2 * S**3)
    return abs(d1), abs(d2), abs(d3)


@pytest.mark.parametrize("M", [Sphere(2), Sphere(3), Circle(), Euclidean(2), Rotations()],
                         ids=lambda M: f"{M.name}{M.dim}")
def test_declared_constants_hold_numerically(M):
    rng = np.random.default_rng(4)
    funcs = registry(M)
    assert funcs
    for h in funcs:
        worst = np.zeros(3)
        for _ in range(300):
            x = M.random_point(rng)
            u = M.random_tangent(x, rng)
            u = u / M.norm(x, u)
            worst = np.maximum(worst, _directional(M, h, x, u))
        declared = np.array([h.C0, h.C1, h.C2])
        assert np.all(worst <= declared * (1 + 1e-3) + 1e-4), (h.name, worst, declared)


def test_registry_names_and_lookup():
    names = [h.name for h in registry(Sphere(2))]
    assert len(names) == len(set(names)) >= 10
    assert lookup(Sphere(2), "coord2")(np.array([0.0, 0.0, 1.0])) == 1.0
    with pytest.raises(KeyError):
        lookup(Circle(), "coord0")
    assert registry(Hyperbolic(2)) == []


def test_scaled_and_combination_constants():
    h = lookup(Circle(), "cos")
    g = h.scaled(-2.0, 1.0)
    assert (g.C0, g.C1, g.C2) == (2.0, 2.0, 2.0)
    assert g(np.array([[0.0]]))[0] == -1.0
    c = linear_combination([(0.5, h), (-1.0, lookup(Circle(), "cos2"))])
    assert c.C0 == pytest.approx(0.5 + 0.5)
    assert linear_combination([(1.0, TestFunction(lambda x: x[..., 0]))]).C0 is None


@pytest.mark.parametrize("M", [Sphere(2), Sphere(4), Circle(), Euclidean(3), Rotations()],
                         ids=lambda M: f"{M.name}{M.dim}")
def test_declared_C0_on_random_pairs(M):
    rng = np.random.default_rng(8)
    X, Y = M.random_point(rng, 1000), M.random_point(rng, 1000)
    d = M.dist(X, Y)
    for h in registry(M):
        assert np.all(np.abs(h(X) - h(Y)) <= h.C0 * d * (1 + 1e-6) + 1e-15), h.name
