"""Stein solution for h = cos under the von Mises law M(0, 1): quadrature versus simulation."""
import numpy as np

from riemstein import Circle, VonMisesCircle
from riemstein.stein import MonteCarloSteinSolver, circle_solve
from riemstein.testfunctions import lookup

p = VonMisesCircle(0.0, 1.0)
h = lookup(Circle(), "cos")
sol = circle_solve(h, p)
print(f"E cos(X) = {sol.Eh:.6f}, first-order residual {sol.residual(h, p):.1e}")

# every call reuses the solver seed, so the Monte Carlo errors below are strongly correlated
solver = MonteCarloSteinSolver(h, p, kappa=0.5, n_paths=1000, seed=1)
print(f"{'x':>6} {'quadrature':>11} {'monte carlo':>12} {'stderr':>8}")
for x in np.linspace(-3.0, 3.0, 7):
    c = solver.evaluate(np.array([[x]]))
    print(f"{x:6.2f} {float(sol.f(x)):11.4f} {c.values[0]:12.4f} {c.stderr[0]:8.4f}")
