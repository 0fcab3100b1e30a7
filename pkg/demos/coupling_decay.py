"""Fitted contraction rates of parallel-coupled Langevin pairs against the certified kappa."""
import numpy as np

from riemstein import Hyperbolic, Point, a1_certificate
from riemstein.coupling import CouplingConfig, fit_decay_rate, run_coupled
from riemstein.potentials import GaussianEuclidean, SqDistHyperbolic, VmfSphere
from riemstein.sde import SdeConfig

cases = [
    ("sphere vMF c=0.5", VmfSphere([0.0, 0.0, 1.0], 0.5), 20.0),
    ("hyperbolic c=1", SqDistHyperbolic(Hyperbolic(2).origin(), 1.0), 10.0),
    ("gaussian diag(.8,.3)", GaussianEuclidean([0.0, 0.0], np.diag([0.8, 0.3])), 20.0),
]

print(f"{'case':<22} {'kappa':>6} {'rate l=1':>9} {'rate l=2':>9}")
for name, p, T in cases:
    M = p.manifold
    rng = np.random.default_rng(0)
    x = M.origin() if isinstance(M, Hyperbolic) else M.random_point(rng)
    v = M.random_tangent(x, rng)
    y = M.exp(x, v / M.norm(x, v))
    run = run_coupled(Point(M, x), Point(M, y), p, CouplingConfig(sde=SdeConfig(horizon_T=T)),
                      rng=1, n_paths=100, record_every=10)
    kappa = a1_certificate(p).kappa
    r1 = fit_decay_rate(run.dists, run.times, 1).rate
    r2 = fit_decay_rate(run.dists, run.times, 2).rate
    print(f"{name:<22} {kappa:6.3f} {r1:9.3f} {r2:9.3f}")
