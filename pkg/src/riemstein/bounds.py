"""Closed-form distance bounds and the regularity constants of Stein solutions.

Formula evaluators are pure functions of their numeric inputs. The Monte
Carlo helpers take sample sets or generators and return plain floats or a
:class:`BoundReport`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .geometry import InvalidArgumentError, Sphere, haar_so3
from .potentials import Potential
from .sde import as_rng
from .testfunctions import TestFunction, registry
from .transport import SampleSet, w1_empirical

__all__ = [
    "BoundConstants",
    "FhConstants",
    "BoundReport",
    "alpha",
    "lambda_1",
    "lambda_2",
    "tau_q",
    "eta_q",
    "wasserstein_bound_general",
    "wasserstein_bound_mixed",
    "vmf_vmf_bound",
    "vmf_vmf_geometric",
    "fisher_watson_bound",
    "so_uniform_bound",
    "haar_sqrt_mean",
    "fh_constant_bounds",
    "eta_constants",
    "eta_star",
    "dH_bound_check",
    "default_c2",
]


@dataclass(frozen=True)
class BoundConstants:
    """Inputs of the second-order regularity estimates.

    ``c2`` bounds the operator norms of the frame-lift derivatives and of the
    curvature tensor and its derivative; it is supplied by the caller.
    """

    m: int
    kappa: float
    c2: float
    C0_phi: float
    C1_phi: float
    C2_phi: float

    def __post_init__(self):
        if self.m < 1 or not self.kappa > 0 or self.c2 < 0:
            raise InvalidArgumentError("need m >= 1, kappa > 0, c2 >= 0")

    @property
    def lam(self) -> float:
        m, c = self.m, self.c2
        return 2 * m * c + (5 * math.sqrt(m) + 2 * m + 4) * c * c + c * self.C0_phi + self.C2_phi

    @property
    def second_order_ok(self) -> bool:
        """Whether ``6 kappa > lambda``, the hypothesis of the second-derivative estimate."""
        return 6 * self.kappa > self.lam

    def ratio(self) -> float:
        """``((lambda + (16 m + 12) c2^2) / (4 kappa + lambda - 16 c2^2))^(1/2)``."""
        lam, c = self.lam, self.c2
        return math.sqrt((lam + (16 * self.m + 12) * c * c) / (4 * self.kappa + lam - 16 * c * c))


def default_c2(kind) -> float:
    """Documented default for ``c2``: 0 on flat spaces, 1 on the sphere."""
    from .geometry import Circle, Euclidean

    if isinstance(kind, (Euclidean, Circle)):
        return 0.0
    return 1.0


# ---------------------------------------------------------------------------
# moment-growth constants for derivative flows


def alpha(p: float, c: float, kappa: float) -> float:
    """``alpha(p, c) = -2 kappa + (p - 1) c^2``."""
    return -2.0 * kappa + (p - 1.0) * c * c


def lambda_1(bc: BoundConstants) -> float:
    m, c = bc.m, bc.c2
    return 0.5 * (2 * m * c + (5 * math.sqrt(m) + 2 * m) * c * c + c * bc.C0_phi + bc.C2_phi)


def lambda_2(bc: BoundConstants) -> float:
    return 4.0 * (1 + bc.m) * bc.c2**2


def tau_q(q: float, bc: BoundConstants) -> float:
    a = alpha(2 * q, bc.c2, bc.kappa)
    return max(2 * a, lambda_1(bc) + a - bc.c2**2)


def eta_q(q: float, bc: BoundConstants, t: float = 1.0) -> float:
    a = alpha(2 * q, bc.c2, bc.kappa)
    num = lambda_1(bc) + (q - 1) * lambda_2(bc)
    den = a + bc.c2**2 - lambda_1(bc)
    if den != 0:
        return (num / abs(den)) ** (q / 2)
    return (num * t) ** (q / 2)


# ---------------------------------------------------------------------------
# distance bounds


def _grad_norms(p: Potential, X: np.ndarray) -> np.ndarray:
    return p.manifold.norm(X, p.grad(X))


def _check_pair(phi: Potential, psi: Potential, z: SampleSet):
    if phi.manifold != psi.manifold or z.kind != phi.manifold:
        raise InvalidArgumentError("potentials and samples must share one manifold")


def wasserstein_bound_general(phi: Potential, psi: Potential, z: SampleSet, kappa: float) -> float:
    """``(1 / 2 kappa) E |grad psi(Z) - grad phi(Z)|`` over the sample ``Z ~ exp(-psi)``."""
    _check_pair(phi, psi, z)
    if not kappa > 0:
        raise InvalidArgumentError("kappa must be positive")
    X = z.coords
    M = phi.manifold
    return float(M.norm(X, psi.grad(X) - phi.grad(X)).mean() / (2 * kappa))


def wasserstein_bound_mixed(phi: Potential, psi: Potential, z: SampleSet, kappa_phi: float,
                            kappa_psi: float) -> float:
    """``E |grad psi(Z) / 2 kappa_phi - grad phi(Z) / 2 kappa_psi|`` for distinct constants."""
    _check_pair(phi, psi, z)
    if not (kappa_phi > 0 and kappa_psi > 0):
        raise InvalidArgumentError("kappas must be positive")
    X = z.coords
    M = phi.manifold
    v = psi.grad(X) / (2 * kappa_phi) - phi.grad(X) / (2 * kappa_psi)
    return float(M.norm(X, v).mean())


def vmf_vmf_geometric(x1, c1, x2, c2) -> tuple[float, np.ndarray, float, float]:
    """``(c*, x*, rho(x*, x1), rho(x*, x2))`` for two vMF laws on a sphere."""
    x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
    d = c2 * x2 - c1 * x1
    cs = float(np.linalg.norm(d))
    if cs == 0:
        return 0.0, np.zeros_like(x1), 0.0, 0.0
    xs = d / cs
    S = Sphere(x1.size - 1)
    return cs, xs, float(S.dist(xs, x1)), float(S.dist(xs, x2))


def vmf_vmf_bound(x1, c1, x2, c2, kappa, mean_rho_1, mean_rho_2) -> float:
    """``c* / (4 kappa) * sum_i (rho(x*, x_i) + E rho(x_i, X_i))``; zero when ``c* = 0``."""
    cs, _, r1, r2 = vmf_vmf_geometric(x1, c1, x2, c2)
    if cs == 0:
        return 0.0
    return cs / (4 * kappa) * (r1 + mean_rho_1 + r2 + mean_rho_2)


def fisher_watson_bound(x2, c2: float, kappa: float, z: SampleSet) -> float:
    """``(c2 / 2 kappa) E |sin(2 rho(x2, Z))|``."""
    if not isinstance(z.kind, Sphere):
        raise InvalidArgumentError("Fisher-Watson samples live on a sphere")
    r = z.kind.dist(np.broadcast_to(np.asarray(x2, float), z.coords.shape), z.coords)
    return float(c2 / (2 * kappa) * np.abs(np.sin(2 * r)).mean())


def haar_sqrt_mean(n: int, rng) -> tuple[float, float]:
    """Monte Carlo ``E sqrt(3 - tr Z^2)`` for Haar ``Z`` on SO(3), with its standard error."""
    Z = haar_so3(as_rng(rng), (n,))
    tr2 = np.einsum("nij,nji->n", Z, Z)
    v = np.sqrt(np.maximum(3.0 - tr2, 0.0))
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))


def so_uniform_bound(c: float, kappa: float, n: int, rng) -> float:
    """``(c / 2 kappa) E sqrt(3 - tr Z^2)`` with ``Z`` uniform on SO(3)."""
    if not kappa > 0:
        raise InvalidArgumentError("kappa must be positive")
    mean, _ = haar_sqrt_mean(n, rng)
    return c / (2 * kappa) * mean


# ---------------------------------------------------------------------------
# Stein-solution constants


@dataclass(frozen=True)
class FhConstants:
    C0f: float
    C1f: float
    C2f: Optional[float]
    reason: str = ""


def fh_constant_bounds(C0h: float, C1h: float, C2h: float, bc: BoundConstants) -> FhConstants:
    """Lipschitz constants of ``f_h`` and its first two derivatives."""
    k = bc.kappa
    C0f, C1f = C0h / k, C1h / k
    if not bc.second_order_ok:
        return FhConstants(C0f, C1f, None, reason=f"6 kappa = {6 * k:g} <= lambda = {bc.lam:g}")
    C2f = (2.0 / k) * (bc.ratio() * C1h + C2h)
    return FhConstants(C0f, C1f, C2f)


def eta_constants(C0f: float, C1f: float, C2f: float, C0phi: float, C1phi: float, m: int) -> float:
    """``m C2(f) + C0(phi) C1(f) + C1(phi) C0(f)``."""
    return m * C2f + C0phi * C1f + C1phi * C0f


def eta_star(bc: BoundConstants) -> float:
    """``(1 / kappa) {ratio + 2m + C0(phi) + C1(phi)}``; requires ``6 kappa > lambda``."""
    if not bc.second_order_ok:
        raise InvalidArgumentError(f"6 kappa = {6 * bc.kappa:g} must exceed lambda = {bc.lam:g}")
    return (bc.ratio() + 2 * bc.m + bc.C0_phi + bc.C1_phi) / bc.kappa


# ---------------------------------------------------------------------------
# smooth-class distance check


@dataclass
class BoundReport:
    bound: float
    empirical: Optional[float]
    stderr: float
    inputs: dict = field(default_factory=dict)
    passed: bool = True
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, default=float)


def dH_bound_check(z: SampleSet, x: SampleSet, eta_star_value: float,
                   funcs: Optional[list[TestFunction]] = None) -> BoundReport:
    """Compare ``max_h |mean h(Z) - mean h(X)|`` with ``eta* W1(Z, X)`` over a smooth test class.

    The right side uses the optimal assignment coupling. Standard errors are
    those of the paired differences ``h(z_i) - h(x_sigma(i))``.
    """
    if len(z) != len(x):
        raise InvalidArgumentError("equal sample sizes required")
    funcs = registry(z.kind) if funcs is None else funcs
    funcs = [f for f in funcs if all(c is not None and c <= 1.0 for c in (f.C0, f.C1, f.C2))]
    if not funcs:
        raise InvalidArgumentError("test-function registry is empty")
    w = w1_empirical(z, x)
    xs = x.coords[w.assignment]
    gaps, ses = [], []
    for f in funcs:
        diff = f(z.coords) - f(xs)
        gaps.append(abs(float(diff.mean())))
        ses.append(float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0)
    i = int(np.argmax(gaps))
    right = eta_star_value * w.value
    return BoundReport(
        bound=float(right),
        empirical=float(gaps[i]),
        stderr=ses[i],
        inputs={"eta_star": eta_star_value, "n": len(z), "w1": w.value, "kind": str(z.kind)},
        passed=bool(gaps[i] <= right + 3 * ses[i]),
        details={"argmax": funcs[i].name, "gaps": dict(zip([f.name for f in funcs], gaps))},
    )
