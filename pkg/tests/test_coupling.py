import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riemstein.coupling import (
    CoupledPairState,
    CouplingConfig,
    Mode,
    coupled_step,
    fit_decay_rate,
    independent_step,
    pair_step_batch,
    run_coupled,
)
from riemstein.geometry import Euclidean, Hyperbolic, InvalidArgumentError, Point, Sphere
from riemstein.potentials import (
    GaussianEuclidean,
    SqDistHyperbolic,
    VmfRotations,
    VmfSphere,
    a1_certificate,
)
from riemstein.sde import SdeConfig


def _euclid(a=1.0):
    return GaussianEuclidean([0.0, 0.0], a * np.eye(2))


def test_band_defaults_and_validation():
    cfg = CouplingConfig()
    assert cfg.band(math.pi) == pytest.approx((0.8 * math.pi, 0.9 * math.pi))
    assert cfg.band(math.inf) == (math.inf, math.inf)
    with pytest.raises(InvalidArgumentError):
        CouplingConfig(guard_on=1.0, guard_off=2.0).band(math.pi)
    with pytest.raises(InvalidArgumentError):
        CouplingConfig(noise="mirror")


def test_euclidean_noise_cancels_exactly():
    p = _euclid(1.0)
    E = p.manifold
    cfg = CouplingConfig(sde=SdeConfig(step_h=0.01, horizon_T=5.0))
    run = run_coupled(Point(E, [1.0, 2.0]), Point(E, [-0.5, 0.0]), p, cfg, rng=3, n_paths=5)
    d0 = 2.5
    k = np.round(run.times / 0.01)
    # discrete oracle (1 - h/2)^k and continuous oracle e^{-t/2}
    assert np.abs(run.dists - d0 * (1 - 0.005) ** k).max() < 1e-12
    rel = np.abs(run.dists / (d0 * np.exp(-run.times / 2)) - 1)
    assert rel.max() < 10 * 0.01
    assert np.all(run.modes == Mode.COUPLED)


def test_identical_starts_merge_immediately():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    x = Point(p.manifold, [1.0, 0.0, 0.0])
    run = run_coupled(x, x, p, CouplingConfig(sde=SdeConfig(horizon_T=1.0)), rng=0, n_paths=3)
    assert np.all(run.dists == 0)
    assert np.all(run.modes == Mode.MERGED)


def test_merged_is_absorbing():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    x = Point(p.manifold, [1.0, 0.0, 0.0])
    cfg = CouplingConfig()
    s = CoupledPairState(x, x, Mode.MERGED, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = coupled_step(s, p, 0.005, rng, cfg)
        assert s.mode == Mode.MERGED and s.dist == 0.0
        assert np.array_equal(s.x.coords, s.y.coords)


def test_merge_transition_snaps():
    p = _euclid()
    E = p.manifold
    cfg = CouplingConfig(merge_tol=1e-3)
    s = CoupledPairState.start(Point(E, [0.0, 0.0]), Point(E, [0.0, 1.0005e-3]), cfg)
    assert s.mode == Mode.COUPLED
    s = coupled_step(s, p, 0.01, 0, cfg)
    assert s.mode == Mode.MERGED and s.dist == 0.0


def test_guard_forces_independent():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    cfg = CouplingConfig()
    x = Point(S, [1.0, 0.0, 0.0])
    y = Point(S, S.exp(x.coords, np.array([0.0, 0.95 * math.pi, 0.0])))
    s = CoupledPairState(x, y, Mode.COUPLED, float(S.dist(x.coords, y.coords)))
    assert coupled_step(s, p, 0.005, 1, cfg).mode == Mode.INDEPENDENT
    assert CoupledPairState.start(x, y, cfg).mode == Mode.INDEPENDENT


@given(r=st.floats(0.81 * math.pi, 0.89 * math.pi), seed=st.integers(0, 2**31))
def test_guard_hysteresis(r, seed):
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    cfg = CouplingConfig()
    x = Point(S, [1.0, 0.0, 0.0])
    y = Point(S, S.exp(x.coords, np.array([0.0, r, 0.0])))
    h = 1e-6  # tiny step: the distance stays inside the band
    s = independent_step(CoupledPairState(x, y, Mode.INDEPENDENT, r), p, h, seed, cfg)
    assert s.mode == Mode.INDEPENDENT
    s = coupled_step(CoupledPairState(x, y, Mode.COUPLED, r), p, h, seed, cfg)
    assert s.mode == Mode.COUPLED


def test_step_mode_preconditions():
    p = _euclid()
    E = p.manifold
    s = CoupledPairState.start(Point(E, [0.0, 0.0]), Point(E, [1.0, 0.0]), CouplingConfig())
    with pytest.raises(InvalidArgumentError):
        independent_step(s, p, 0.01, 0)
    with pytest.raises(InvalidArgumentError):
        coupled_step(CoupledPairState(s.x, s.y, Mode.INDEPENDENT, 1.0), p, 0.01, 0)


def test_seed_determinism():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    x, y = Point(S, [1.0, 0.0, 0.0]), Point(S, [-1.0, 0.02, 0.01])
    cfg = CouplingConfig(sde=SdeConfig(horizon_T=1.0))
    a = run_coupled(x, Point(S, S.project_point(y.coords)), p, cfg, rng=5, n_paths=10)
    b = run_coupled(x, Point(S, S.project_point(y.coords)), p, cfg, rng=5, n_paths=10)
    assert np.array_equal(a.dists, b.dists) and np.array_equal(a.modes, b.modes)


def test_fit_decay_rate_synthetic():
    t = np.linspace(0, 5, 51)
    D = np.tile(np.exp(-0.7 * t), (40, 1))
    fit = fit_decay_rate(D, t, 1.0)
    assert fit.rate == pytest.approx(-0.7, abs=1e-9)
    assert fit_decay_rate(D, t, 2.0).rate == pytest.approx(-1.4, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        fit_decay_rate(D[:10], t)
    with pytest.raises(InvalidArgumentError):
        fit_decay_rate(D, t, 0.5)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_fit_decay_rate_gaussian_oracle(a):
    p = _euclid(a)
    E = p.manifold
    h = 0.005
    run = run_coupled(Point(E, [0.0, 0.0]), Point(E, [1.0, 1.0]), p,
                      CouplingConfig(sde=SdeConfig(step_h=h, horizon_T=4.0)), rng=0, n_paths=30, record_every=10)
    # exact slope of the discrete recursion, and the continuous -a/2 within O(h)
    disc = math.log(1 - a * h / 2) / h
    assert fit_decay_rate(run.dists, run.times, 1).rate == pytest.approx(disc, abs=1e-9)
    assert fit_decay_rate(run.dists, run.times, 1).rate == pytest.approx(-a / 2, abs=a * a * h)
    assert fit_decay_rate(run.dists, run.times, 2).rate == pytest.approx(-a, abs=2 * a * a * h)


@pytest.mark.parametrize(
    "p,T,n",
    [
        (VmfSphere([0.0, 0.0, 1.0], 0.5), 20.0, 200),
        (SqDistHyperbolic(Hyperbolic(2).origin(), 1.0), 10.0, 200),
        (VmfRotations(np.eye(3).ravel(), 0.25), 12.0, 60),
        (GaussianEuclidean([0.0, 0.0], np.diag([0.8, 0.3])), 20.0, 40),
    ],
    ids=["sphere", "hyperbolic", "rotations", "euclidean"],
)
def test_fitted_rate_beats_kappa(p, T, n):
    M = p.manifold
    kappa = a1_certificate(p).kappa
    rng = np.random.default_rng(0)
    x = M.origin() if isinstance(M, Hyperbolic) else M.random_point(rng)
    v = M.random_tangent(x, rng)
    y = M.exp(x, v / M.norm(x, v))
    run = run_coupled(Point(M, x), Point(M, y), p, CouplingConfig(sde=SdeConfig(horizon_T=T)), rng=1,
                      n_paths=n, record_every=10)
    for ell in (1, 2):
        assert fit_decay_rate(run.dists, run.times, ell).rate <= -kappa + 0.1


def test_hyperbolic_small_increments_with_aligned_noise():
    p = SqDistHyperbolic(Hyperbolic(2).origin(), 1.0)
    H = p.manifold
    h = 0.005
    x = Point(H, H.exp(H.origin(), np.array([0.0, 1.0, 0.0])))
    y = Point(H, H.exp(H.origin(), np.array([0.0, -0.5, 0.8])))
    run = run_coupled(x, y, p, CouplingConfig(sde=SdeConfig(step_h=h, horizon_T=3.0), noise="aligned"),
                      rng=2, n_paths=100)
    jumps = np.diff(run.dists, axis=1) > 10 * math.sqrt(h) * h
    assert jumps.mean() < 0.01


def test_coupled_legs_keep_the_marginal_law():
    # each leg of a coupled pair is itself a Langevin chain, so both reach vMF(c)
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    target = 1 / math.tanh(0.5) - 2.0  # E z under vMF(c) on S^2 is coth(c) - 1/c
    cfg = CouplingConfig()
    rng = np.random.default_rng(4)
    n = 400
    X = np.tile([1.0, 0.0, 0.0], (n, 1))
    Y = np.tile(S.project_point(np.array([0.0, 1.0, 0.2])), (n, 1))
    modes = np.full(n, Mode.COUPLED, dtype=np.int8)
    band = cfg.band(S.injectivity_radius)
    for _ in range(4000):
        X, Y, modes, _ = pair_step_batch(p, X, Y, modes, 0.01, rng, band, cfg.merge_tol)
    for Z in (X, Y):
        se = math.sqrt(Z[:, 2].var() / n)
        assert abs(Z[:, 2].mean() - target) < 3 * se + 0.01
    assert (modes == Mode.MERGED).mean() > 0.5


@pytest.mark.slow
def test_independent_legs_match_single_chain():
    p = VmfSphere([0.0, 0.0, 1.0], 0.5)
    S = p.manifold
    target = 1 / math.tanh(0.5) - 2.0
    cfg = CouplingConfig(guard_on=0.0002, guard_off=0.0001, merge_tol=1e-12,
                         sde=SdeConfig(step_h=0.01, horizon_T=40.0))
    x = Point(S, [1.0, 0.0, 0.0])
    y = Point(S, S.project_point(np.array([0.0, 1.0, 0.2])))
    rng = np.random.default_rng(7)
    n = 400
    X, Y = np.tile(x.coords, (n, 1)), np.tile(y.coords, (n, 1))
    modes = np.full(n, Mode.INDEPENDENT, dtype=np.int8)
    band = cfg.band(S.injectivity_radius)
    for _ in range(4000):
        X, Y, modes, _ = pair_step_batch(p, X, Y, modes, 0.01, rng, band, cfg.merge_tol)
    se = math.sqrt(Y[:, 2].var() / n)
    assert abs(Y[:, 2].mean() - target) < 3 * se + 0.01
    assert abs(X[:, 2].mean() - target) < 3 * se + 0.01


def test_euclidean_start_state_distance():
    E = Euclidean(2)
    s = CoupledPairState.start(Point(E, [0.0, 0.0]), Point(E, [3.0, 4.0]), CouplingConfig())
    assert s.dist == 5.0 and s.mode == Mode.COUPLED
    with pytest.raises(InvalidArgumentError):
        CoupledPairState.start(Point(E, [0.0, 0.0]), Point(Sphere(1), [1.0, 0.0]), CouplingConfig())
