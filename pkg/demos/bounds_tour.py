"""Closed-form distance bounds next to empirical Wasserstein-1 distances."""
import math

import numpy as np

from riemstein import Rotations, Sphere, VmfRotations, VmfSphere
from riemstein.bounds import BoundConstants, eta_star, fh_constant_bounds, so_uniform_bound, vmf_vmf_bound
from riemstein.transport import sample_exact, sample_uniform_rotations, w1_empirical

S = Sphere(2)
x1, x2 = np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])
p1, p2 = VmfSphere(x1, 0.3), VmfSphere(x2, 0.3)
big1, big2 = sample_exact(p1, 20000, 1), sample_exact(p2, 20000, 2)
mr1 = float(S.dist(big1.coords, np.broadcast_to(x1, big1.coords.shape)).mean())
mr2 = float(S.dist(big2.coords, np.broadcast_to(x2, big2.coords.shape)).mean())
w = w1_empirical(sample_exact(p1, 256, 3), sample_exact(p2, 256, 4)).value
print(f"vMF pair on S^2:   bound {vmf_vmf_bound(x1, 0.3, x2, 0.3, 0.25, mr1, mr2):.3f}   W1 {w:.3f}")

pv = VmfRotations(Rotations().origin(), 0.25)
w = w1_empirical(sample_uniform_rotations(256, 5), sample_exact(pv, 256, 6)).value
print(f"uniform vs vMF SO(3): bound {so_uniform_bound(0.25, 0.125, 100000, 7):.3f}   W1 {w:.3f}"
      f"   (4/pi = {4 / math.pi:.4f})")

bc = BoundConstants(m=2, kappa=1.0, c2=0.1, C0_phi=0.5, C1_phi=0.5, C2_phi=0.5)
print(f"regularity constants: lambda {bc.lam:.6f}  C2(f) {fh_constant_bounds(1, 1, 1, bc).C2f:.6f}"
      f"  eta* {eta_star(bc):.6f}")
