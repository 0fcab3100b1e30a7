"""Potential families phi with density proportional to exp(-phi).

Each potential is a frozen dataclass bound to a manifold. ``value`` and
``grad`` operate on batches of ambient coordinates; the module-level
functions :func:`phi_value` and :func:`grad_phi` are the single-point API.

Gradients are written as tangent projections of smooth ambient fields, so
they are defined everywhere, including at the antipode of a vMF pole where
the radial parametrisation ``c sin(r) dr`` is singular but has limit zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .geometry import (
    Circle,
    Euclidean,
    Hyperbolic,
    InvalidArgumentError,
    Manifold,
    Point,
    Rotations,
    Sphere,
    TangentVector,
    wrap_angle,
)

__all__ = [
    "Potential",
    "VmfSphere",
    "SqDistHyperbolic",
    "VmfRotations",
    "GaussianEuclidean",
    "VonMisesCircle",
    "FisherWatsonSphere",
    "A1Certificate",
    "LipschitzConstants",
    "phi_value",
    "grad_phi",
    "a1_certificate",
    "lipschitz_constants_phi",
    "circle_normalizer",
]


def _coords(p) -> np.ndarray:
    if isinstance(p, Point):
        return np.array(p.coords)
    return np.atleast_1d(np.asarray(p, dtype=float)).copy()


def _positive(name, c):
    if not (np.isfinite(c) and c > 0):
        raise InvalidArgumentError(f"{name} must be positive and finite, got {c}")


@dataclass(frozen=True)
class A1Certificate:
    """Curvature-dimension certificate ``Ric + Hess phi >= 2 kappa g``."""

    kappa: Optional[float]
    ricci_lb: float
    hess_lb: Optional[float]
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.kappa is not None


@dataclass(frozen=True)
class LipschitzConstants:
    C0: float
    C1: float
    C2: float
    flagged: bool = False  # True when any entry is a conservative guess or infinite


@dataclass(frozen=True, eq=False)
class Potential:
    """Base class. Subclasses set ``manifold`` and implement ``value``/``grad``."""

    manifold: Manifold = field(init=False)

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess_lb(self) -> Optional[float]:
        return None

    def lipschitz(self) -> LipschitzConstants:
        inf = float("inf")
        return LipschitzConstants(inf, inf, inf, flagged=True)

    def check_point(self, x: Point):
        if x.kind != self.manifold:
            raise InvalidArgumentError(f"point on {x.kind} but potential lives on {self.manifold}")


@dataclass(frozen=True, eq=False)
class VmfSphere(Potential):
    """``phi(x) = -c <x0, x>``: von Mises-Fisher law on the sphere."""

    x0: np.ndarray
    c: float

    def __post_init__(self):
        x0 = _coords(self.x0)
        if abs(np.linalg.norm(x0) - 1.0) > 1e-9:
            raise InvalidArgumentError("vMF pole must be a unit vector")
        _positive("c", self.c)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "manifold", Sphere(x0.size - 1))

    def value(self, x):
        return -self.c * (np.asarray(x) @ self.x0)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return -self.c * (self.x0 - (x @ self.x0)[..., None] * x)

    def hess_lb(self):
        return -self.c

    def lipschitz(self):
        return LipschitzConstants(self.c, self.c, self.c)


@dataclass(frozen=True, eq=False)
class FisherWatsonSphere(Potential):
    """``phi(x) = -c1 <x1, x> - c2 <x2, x>^2`` with orthogonal poles."""

    x1: np.ndarray
    c1: float
    x2: np.ndarray
    c2: float

    def __post_init__(self):
        x1, x2 = _coords(self.x1), _coords(self.x2)
        for v in (x1, x2):
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise InvalidArgumentError("Fisher-Watson poles must be unit vectors")
        if abs(x1 @ x2) > 1e-9:
            raise InvalidArgumentError("Fisher-Watson poles must be orthogonal")
        _positive("c1", self.c1)
        _positive("c2", self.c2)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "manifold", Sphere(x1.size - 1))

    def value(self, x):
        x = np.asarray(x)
        return -self.c1 * (x @ self.x1) - self.c2 * (x @ self.x2) ** 2

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        a = -self.c1 * self.x1 - 2.0 * self.c2 * (x @ self.x2)[..., None] * self.x2
        return a - (a * x).sum(-1, keepdims=True) * x

    def lipschitz(self):
        # sup|grad| <= c1 + c2 and sup|Hess| <= c1 + 2 c2; third derivative not bounded here
        return LipschitzConstants(self.c1 + self.c2, self.c1 + 2.0 * self.c2, float("inf"), flagged=True)


@dataclass(frozen=True, eq=False)
class SqDistHyperbolic(Potential):
    """``phi(x) = c rho(o, x)^2`` on the hyperboloid."""

    o: np.ndarray
    c: float

    def __post_init__(self):
        o = _coords(self.o)
        M = Hyperbolic(o.size - 1)
        if M.point_residual(o) > 1e-9:
            raise InvalidArgumentError("center is not on the hyperboloid")
        _positive("c", self.c)
        object.__setattr__(self, "o", o)
        object.__setattr__(self, "manifold", M)

    def value(self, x):
        return self.c * self.manifold.dist(self.o, x) ** 2

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * self.c * self.manifold.log(x, np.broadcast_to(self.o, x.shape))

    def hess_lb(self):
        return 2.0 * self.c


@dataclass(frozen=True, eq=False)
class VmfRotations(Potential):
    """``phi(S) = -c tr(S0 S)`` on SO(3)."""

    S0: np.ndarray
    c: float

    def __post_init__(self):
        S0 = _coords(self.S0).reshape(-1)
        M = Rotations()
        if S0.size != 9 or M.point_residual(S0) > 1e-9:
            raise InvalidArgumentError("S0 must be a rotation matrix")
        _positive("c", self.c)
        object.__setattr__(self, "S0", S0.reshape(3, 3))
        object.__setattr__(self, "manifold", M)

    def value(self, x):
        S = Rotations.as_matrix(x)
        return -self.c * np.trace(self.S0 @ S, axis1=-2, axis2=-1)

    def grad(self, x):
        # body gradient G solves -tr(G E)/2 = -c tr(A E) for skew E, so G = c (A - A^T)
        S = Rotations.as_matrix(x)
        A = self.S0 @ S
        return Rotations.as_flat(self.c * S @ (A - np.swapaxes(A, -1, -2)))

    def hess_lb(self):
        return -self.c

    def lipschitz(self):
        return LipschitzConstants(2.0 * self.c, 2.0 * self.c, float("inf"), flagged=True)


@dataclass(frozen=True, eq=False)
class GaussianEuclidean(Potential):
    """``phi(x) = (x - mean)^T A (x - mean) / 2``."""

    mean: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        mu = _coords(self.mean)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (mu.size, mu.size):
            raise InvalidArgumentError("A must be a square matrix matching the mean")
        if np.abs(A - A.T).max() > 1e-12:
            raise InvalidArgumentError("A must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise InvalidArgumentError("A must be positive definite")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "manifold", Euclidean(mu.size))

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.mean
        return 0.5 * np.einsum("...i,ij,...j->...", d, self.A, d)

    def grad(self, x):
        return (np.asarray(x, dtype=float) - self.mean) @ self.A

    def hess_lb(self):
        return float(np.linalg.eigvalsh(self.A).min())

    def lipschitz(self):
        return LipschitzConstants(float("inf"), float(np.linalg.norm(self.A, 2)), 0.0)


@dataclass(frozen=True, eq=False)
class VonMisesCircle(Potential):
    """``phi(x) = -c cos(x - x0)``; ``c = 0`` gives the uniform law."""

    x0: float
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c >= 0):
            raise InvalidArgumentError("c must be nonnegative")
        object.__setattr__(self, "x0", float(wrap_angle(float(np.ravel(self.x0)[0]))))
        object.__setattr__(self, "manifold", Circle())

    def value(self, x):
        return -self.c * np.cos(np.asarray(x, dtype=float)[..., 0] - self.x0)

    def grad(self, x):
        return self.c * np.sin(np.asarray(x, dtype=float) - self.x0)

    def d2(self, x):
        """Second derivative ``phi''`` (scalar angle input)."""
        return self.c * np.cos(np.asarray(x, dtype=float) - self.x0)

    def hess_lb(self):
        return -self.c

    def lipschitz(self):
        return LipschitzConstants(self.c, self.c, self.c)


# ---------------------------------------------------------------------------
# single-point API


def phi_value(p: Potential, x: Point) -> float:
    p.check_point(x)
    return float(p.value(x.coords))


def grad_phi(p: Potential, x: Point) -> TangentVector:
    p.check_point(x)
    return TangentVector(x, p.grad(x.coords))


def a1_certificate(p: Potential) -> A1Certificate:
    """Ricci and Hessian lower bounds and the resulting kappa, when positive."""
    if not isinstance(p, Potential):
        raise InvalidArgumentError(f"unsupported potential {p!r}")
    ric = float(p.manifold.ricci_lb)
    hess = p.hess_lb()
    if hess is None:
        return A1Certificate(None, ric, None, reason="no Hessian lower bound is available for this family")
    kappa = 0.5 * (ric + hess)
    if kappa <= 0:
        return A1Certificate(None, ric, hess, reason=f"Ric + Hess lower bound {ric + hess:g} is not positive")
    return A1Certificate(kappa, ric, hess)


def lipschitz_constants_phi(p: Potential) -> LipschitzConstants:
    return p.lipschitz()


def circle_normalizer(p: VonMisesCircle, n: int = 4097) -> float:
    """``int_{-pi}^{pi} exp(-phi)`` by composite Simpson on ``n`` (odd) nodes."""
    if not isinstance(p, VonMisesCircle):
        raise InvalidArgumentError("circle_normalizer needs a circle potential")
    n = max(int(n), 4097) | 1
    t = np.linspace(-np.pi, np.pi, n)
    return float(integrate.simpson(np.exp(-p.value(t[:, None])), x=t))
