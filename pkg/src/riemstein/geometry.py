"""Closed-form Riemannian primitives for a handful of concrete manifolds.

Every manifold works on batches: points and tangent vectors are arrays whose
last axis holds ambient coordinates, and any leading axes are broadcast. The
single-point API (:class:`Point`, :class:`TangentVector`, :func:`exp_map`, ...)
wraps the batch methods and adds argument checking.

Ambient representations
-----------------------
========================  ==============  ===================================
kind                      ambient size    tangent vector at ``x``
========================  ==============  ===================================
``Euclidean(m)``          ``m``           any vector
``Sphere(m)``             ``m + 1``       ``<x, v> = 0``
``Hyperbolic(m)``         ``m + 1``       ``<x, v>_L = 0`` (Minkowski)
``Rotations(3)``          ``9``           ``dR`` with ``R^T dR`` skew
``Circle()``              ``1``           angular velocity
========================  ==============  ===================================

Rotation matrices are stored row-major in 9 coordinates. The metric on
``Rotations(3)`` is ``g(E1, E2) = -tr(E1 E2) / 2`` on the Lie algebra, so a
rotation by angle ``theta`` lies at distance ``theta`` from the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

__all__ = [
    "TOL_CUT",
    "GeometryError",
    "InvalidArgumentError",
    "CutLocusError",
    "Manifold",
    "ManifoldKind",
    "Euclidean",
    "Sphere",
    "Hyperbolic",
    "Rotations",
    "Circle",
    "Point",
    "TangentVector",
    "Frame",
    "CurvatureConstants",
    "exp_map",
    "log_map",
    "distance",
    "parallel_transport",
    "orthonormal_frame",
    "curvature_constants",
    "gaussian_tangent",
    "wrap_angle",
    "hat",
    "vee",
    "rodrigues",
]

#: distance from the cut locus below which ``log`` falls back to tie-breaking
TOL_CUT = 1e-7


class GeometryError(ValueError):
    """Base class for geometry errors."""


class InvalidArgumentError(GeometryError):
    """Raised on mismatched manifolds, base points or malformed inputs."""


class CutLocusError(GeometryError):
    """Raised when a minimal geodesic is not unique.

    Attributes
    ----------
    candidates : list of ndarray
        Tangent vectors at the base point, each of which reaches the target.
        The first entry is the deterministic tie-break choice.
    """

    def __init__(self, message: str, candidates: list[np.ndarray]):
        super().__init__(message)
        self.candidates = candidates


def wrap_angle(a):
    """Wrap angles to the half-open interval (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


def _dot(u, v):
    return np.einsum("...i,...i->...", u, v)


def _sinc(t):
    # sin(t) / t
    return np.sinc(np.asarray(t) / np.pi)


def _lex_argmin(cands):
    """Index of the lexicographically smallest row of ``cands``, shape (k, n)."""
    order = np.lexsort(cands.T[::-1])
    return int(order[0])


# ---------------------------------------------------------------------------
# so(3) helpers


def hat(w):
    """Skew-symmetric 3x3 matrix of a 3-vector (batch)."""
    w = np.asarray(w, dtype=float)
    z = np.zeros(w.shape[:-1])
    return np.stack(
        [
            np.stack([z, -w[..., 2], w[..., 1]], axis=-1),
            np.stack([w[..., 2], z, -w[..., 0]], axis=-1),
            np.stack([-w[..., 1], w[..., 0], z], axis=-1),
        ],
        axis=-2,
    )


def vee(E):
    """Inverse of :func:`hat` applied to the skew part of ``E``."""
    E = np.asarray(E, dtype=float)
    return 0.5 * np.stack(
        [E[..., 2, 1] - E[..., 1, 2], E[..., 0, 2] - E[..., 2, 0], E[..., 1, 0] - E[..., 0, 1]],
        axis=-1,
    )


def rodrigues(w):
    """Matrix exponential of ``hat(w)`` by the Rodrigues formula."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)[..., None, None]
    K = hat(w)
    a = _sinc(th)
    b = 0.5 * _sinc(th / 2.0) ** 2
    return np.eye(3) + a * K + b * (K @ K)


def _quaternion(Q):
    """Unit quaternion (w, x, y, z) with w >= 0 for rotation matrices ``Q``."""
    Q = np.asarray(Q, dtype=float)
    q00, q11, q22 = Q[..., 0, 0], Q[..., 1, 1], Q[..., 2, 2]
    tr = q00 + q11 + q22
    choice = np.argmax(np.stack([tr, q00, q11, q22], axis=-1), axis=-1)
    out = np.empty(Q.shape[:-2] + (4,))

    def fill(mask, comps):
        if np.any(mask):
            out[mask] = np.stack(comps, axis=-1)[mask]

    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(np.maximum(1.0 + tr, 0.0)) * 2.0
        fill(choice == 0, [0.25 * s, (Q[..., 2, 1] - Q[..., 1, 2]) / s,
                           (Q[..., 0, 2] - Q[..., 2, 0]) / s, (Q[..., 1, 0] - Q[..., 0, 1]) / s])
        s = np.sqrt(np.maximum(1.0 + q00 - q11 - q22, 0.0)) * 2.0
        fill(choice == 1, [(Q[..., 2, 1] - Q[..., 1, 2]) / s, 0.25 * s,
                           (Q[..., 0, 1] + Q[..., 1, 0]) / s, (Q[..., 0, 2] + Q[..., 2, 0]) / s])
        s = np.sqrt(np.maximum(1.0 - q00 + q11 - q22, 0.0)) * 2.0
        fill(choice == 2, [(Q[..., 0, 2] - Q[..., 2, 0]) / s, (Q[..., 0, 1] + Q[..., 1, 0]) / s,
                           0.25 * s, (Q[..., 1, 2] + Q[..., 2, 1]) / s])
        s = np.sqrt(np.maximum(1.0 - q00 - q11 + q22, 0.0)) * 2.0
        fill(choice == 3, [(Q[..., 1, 0] - Q[..., 0, 1]) / s, (Q[..., 0, 2] + Q[..., 2, 0]) / s,
                           (Q[..., 1, 2] + Q[..., 2, 1]) / s, 0.25 * s])
    out *= np.where(out[..., :1] < 0.0, -1.0, 1.0)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def _so3_log(Q):
    """Rotation vector ``w`` with ``rodrigues(w) = Q`` and ``|w| = angle in [0, pi]``."""
    q = _quaternion(Q)
    qv = q[..., 1:]
    s = np.linalg.norm(qv, axis=-1)
    theta = 2.0 * np.arctan2(s, q[..., 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s > 1e-12, theta / s, 2.0 / np.maximum(q[..., 0], 1e-300))
    return qv * ratio[..., None]


# ---------------------------------------------------------------------------
# manifolds


@dataclass(frozen=True)
class Manifold:
    """Abstract manifold kind. Subclasses provide the batch primitives."""

    dim: int

    name: ClassVar[str] = "manifold"
    ambient_dim: ClassVar[int]

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {self.dim}")

    # -- metric ---------------------------------------------------------
    def inner(self, x, u, v):
        return _dot(u, v)

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    # -- constants ------------------------------------------------------
    @property
    def ricci_lb(self) -> float:
        raise NotImplementedError

    @property
    def injectivity_radius(self) -> float:
        raise NotImplementedError

    # -- points ---------------------------------------------------------
    def origin(self) -> np.ndarray:
        raise NotImplementedError

    def project_point(self, x):
        return np.asarray(x, dtype=float)

    def project_tangent(self, x, v):
        return np.asarray(v, dtype=float)

    def point_residual(self, x):
        return np.zeros(np.shape(x)[:-1])

    def tangent_residual(self, x, v):
        return np.zeros(np.shape(v)[:-1])

    def random_point(self, rng, size=None):
        raise NotImplementedError

    def random_tangent(self, x, rng, scale=1.0):
        x = np.asarray(x, dtype=float)
        xi = rng.standard_normal(x.shape[:-1] + (self.dim,))
        return scale * self.frame_combination(x, xi)

    # -- geodesics ------------------------------------------------------
    def exp(self, x, v):
        raise NotImplementedError

    def log(self, x, y):
        """Minimal log with deterministic tie-breaking near the cut locus."""
        raise NotImplementedError

    def dist(self, x, y):
        raise NotImplementedError

    def transport(self, x, y, v):
        """Parallel transport of ``v`` at ``x`` along the minimal geodesic to ``y``."""
        raise NotImplementedError

    def cut_candidates(self, x, y) -> list[np.ndarray]:
        """All log candidates when ``y`` is near the cut locus of ``x`` (single pair)."""
        return [self.log(x, y)]

    # -- frames ---------------------------------------------------------
    def frame(self, x):
        """Orthonormal frame, shape ``(..., dim, ambient_dim)``."""
        raise NotImplementedError

    def frame_combination(self, x, xi):
        """Tangent vector ``sum_i xi_i e_i(x)`` for frame coefficients ``xi``."""
        return np.einsum("...i,...ij->...j", xi, self.frame(x))

    def frame_coordinates(self, x, v):
        """Coefficients of ``v`` in the frame at ``x``."""
        F = self.frame(x)
        return self.inner(x[..., None, :], F, v[..., None, :])

    def __str__(self):
        return f"{self.name}({self.dim})"


ManifoldKind = Manifold


@dataclass(frozen=True)
class Euclidean(Manifold):
    name: ClassVar[str] = "euclidean"

    @property
    def ambient_dim(self):
        return self.dim

    @property
    def ricci_lb(self):
        return 0.0

    @property
    def injectivity_radius(self):
        return np.inf

    def origin(self):
        return np.zeros(self.dim)

    def random_point(self, rng, size=None):
        shape = (() if size is None else np.atleast_1d(size).tolist())
        return rng.standard_normal(tuple(shape) + (self.dim,))

    def exp(self, x, v):
        return np.asarray(x, dtype=float) + v

    def log(self, x, y):
        return np.asarray(y, dtype=float) - x

    def dist(self, x, y):
        return np.linalg.norm(np.asarray(y, dtype=float) - x, axis=-1)

    def transport(self, x, y, v):
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast_shapes(np.shape(y), np.shape(v))).copy()

    def frame(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim))

    def frame_combination(self, x, xi):
        return np.asarray(xi, dtype=float).copy()


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere in ``R^(dim+1)``."""

    name: ClassVar[str] = "sphere"

    @property
    def ambient_dim(self):
        return self.dim + 1

    @property
    def ricci_lb(self):
        return float(self.dim - 1)

    @property
    def injectivity_radius(self):
        return np.pi

    def origin(self):
        e = np.zeros(self.dim + 1)
        e[0] = 1.0
        return e

    def project_point(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def project_tangent(self, x, v):
        return v - _dot(x, v)[..., None] * x

    def point_residual(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0)

    def tangent_residual(self, x, v):
        return np.abs(_dot(x, v))

    def random_point(self, rng, size=None):
        shape = (() if size is None else tuple(np.atleast_1d(size).tolist()))
        return self.project_point(rng.standard_normal(shape + (self.dim + 1,)))

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v, axis=-1)[..., None]
        return self.project_point(np.cos(n) * x + _sinc(n) * v)

    def dist(self, x, y):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))

    def _lex_cut_vector(self, x):
        # lexicographically smallest tangent vector of length pi at x
        x = np.asarray(x, dtype=float)
        P = np.eye(self.dim + 1) - x[..., :, None] * x[..., None, :]
        norms = np.linalg.norm(P, axis=-1)
        idx = np.argmax(norms > 1e-12, axis=-1)
        row = np.take_along_axis(P, idx[..., None, None], axis=-2)[..., 0, :]
        return -np.pi * row / np.linalg.norm(row, axis=-1, keepdims=True)

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        theta = self.dist(x, y)[..., None]
        u = y - _dot(x, y)[..., None] * x
        s = np.linalg.norm(u, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(s > 0.0, u * (theta / np.where(s > 0.0, s, 1.0)), 0.0 * u)
        cut = theta[..., 0] > np.pi - TOL_CUT
        if np.any(cut):
            v = np.where(cut[..., None], self._lex_cut_vector(np.broadcast_to(x, v.shape)), v)
        return v

    def cut_candidates(self, x, y):
        v = self._lex_cut_vector(x)
        return [v, -v]

    def transport(self, x, y, v):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        coef = _dot(y, v) / (1.0 + _dot(x, y))
        return v - coef[..., None] * (x + y)

    def frame(self, x):
        # Gram-Schmidt on the projected ambient basis, skipping the direction
        # most aligned with x
        x = np.asarray(x, dtype=float)
        n = self.dim + 1
        pivot = np.argmax(np.abs(x), axis=-1)
        keep = np.arange(self.dim) + (np.arange(self.dim) >= pivot[..., None])
        basis = np.eye(n)[keep]  # (..., m, n)
        basis = basis - _dot(basis, x[..., None, :])[..., None] * x[..., None, :]
        out = np.empty_like(basis)
        for i in range(self.dim):
            b = basis[..., i, :]
            for j in range(i):
                b = b - _dot(b, out[..., j, :])[..., None] * out[..., j, :]
            out[..., i, :] = b / np.linalg.norm(b, axis=-1, keepdims=True)
        return out


def _minkowski(u, v):
    return -u[..., 0] * v[..., 0] + _dot(u[..., 1:], v[..., 1:])


@dataclass(frozen=True)
class Hyperbolic(Manifold):
    """Hyperboloid model ``<x, x>_L = -1``, ``x_0 > 0`` of curvature -1."""

    name: ClassVar[str] = "hyperbolic"

    @property
    def ambient_dim(self):
        return self.dim + 1

    @property
    def ricci_lb(self):
        return -float(self.dim - 1)

    @property
    def injectivity_radius(self):
        return np.inf

    def inner(self, x, u, v):
        return _minkowski(u, v)

    def origin(self):
        e = np.zeros(self.dim + 1)
        e[0] = 1.0
        return e

    def project_point(self, x):
        x = np.array(x, dtype=float)
        x[..., 0] = np.sqrt(1.0 + _dot(x[..., 1:], x[..., 1:]))
        return x

    def project_tangent(self, x, v):
        return v + _minkowski(x, v)[..., None] * x

    def point_residual(self, x):
        # relative to x0^2: far from the origin both terms of <x, x>_L are huge
        x = np.asarray(x, dtype=float)
        scale = np.maximum(x[..., 0] ** 2, 1.0)
        return np.abs(_minkowski(x, x) + 1.0) / scale + np.where(x[..., 0] > 0, 0.0, np.inf)

    def tangent_residual(self, x, v):
        x, v = np.asarray(x, dtype=float), np.asarray(v, dtype=float)
        scale = np.maximum(np.abs(x[..., 0]) * np.maximum(np.abs(v).max(axis=-1), 1.0), 1.0)
        return np.abs(_minkowski(x, v)) / scale

    def random_point(self, rng, size=None, scale=1.0):
        shape = (() if size is None else tuple(np.atleast_1d(size).tolist()))
        o = np.broadcast_to(self.origin(), shape + (self.dim + 1,))
        v = np.zeros(shape + (self.dim + 1,))
        v[..., 1:] = scale * rng.standard_normal(shape + (self.dim,))
        return self.exp(o, v)

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        n = np.sqrt(np.maximum(_minkowski(v, v), 0.0))[..., None]
        shc = np.where(n > 1e-8, np.sinh(n) / np.where(n > 1e-8, n, 1.0), 1.0 + n**2 / 6.0)
        return self.project_point(np.cosh(n) * x + shc * v)

    def dist(self, x, y):
        d = np.asarray(x, dtype=float) - y
        return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(_minkowski(d, d), 0.0)))

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = self.dist(x, y)[..., None]
        u = y + _minkowski(x, y)[..., None] * x
        s = np.sqrt(np.maximum(_minkowski(u, u), 0.0))[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0.0, u * (d / np.where(s > 0.0, s, 1.0)), 0.0 * u)

    def transport(self, x, y, v):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        coef = _minkowski(y, v) / (1.0 - _minkowski(x, y))
        return v + coef[..., None] * (x + y)

    def frame(self, x):
        # image of the standard basis under the boost taking the origin to x
        x = np.asarray(x, dtype=float)
        m = self.dim
        xs = x[..., 1:]
        F = np.empty(x.shape[:-1] + (m, m + 1))
        F[..., :, 0] = xs
        F[..., :, 1:] = np.eye(m) + xs[..., :, None] * xs[..., None, :] / (1.0 + x[..., 0])[..., None, None]
        return F


_SO3_BASIS = hat(np.eye(3))  # (3, 3, 3): generators of unit angular speed


@dataclass(frozen=True)
class Rotations(Manifold):
    """SO(3) with the bi-invariant metric ``g(E1, E2) = -tr(E1 E2) / 2``."""

    dim: int = 3
    name: ClassVar[str] = "rotations"
    ambient_dim: ClassVar[int] = 9

    def __post_init__(self):
        if self.dim != 3:
            raise InvalidArgumentError("only SO(3) (dim=3) is supported")

    @staticmethod
    def as_matrix(x):
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (3, 3))

    @staticmethod
    def as_flat(R):
        R = np.asarray(R, dtype=float)
        return R.reshape(R.shape[:-2] + (9,))

    def inner(self, x, u, v):
        return 0.5 * _dot(u, v)

    @property
    def ricci_lb(self):
        return (3 - 2) / 2.0

    @property
    def injectivity_radius(self):
        return np.pi

    def origin(self):
        return np.eye(3).reshape(9)

    def project_point(self, x):
        R = self.as_matrix(x)
        U, _, Vt = np.linalg.svd(R)
        P = U @ Vt
        neg = np.linalg.det(P) < 0
        if np.any(neg):
            U = U.copy()
            U[neg, :, -1] *= -1
            P = U @ Vt
        return self.as_flat(P)

    def project_tangent(self, x, v):
        R = self.as_matrix(x)
        E = np.swapaxes(R, -1, -2) @ self.as_matrix(v)
        return self.as_flat(R @ (0.5 * (E - np.swapaxes(E, -1, -2))))

    def point_residual(self, x):
        R = self.as_matrix(x)
        orth = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max(axis=(-1, -2))
        return orth + np.abs(np.linalg.det(R) - 1.0)

    def tangent_residual(self, x, v):
        E = np.swapaxes(self.as_matrix(x), -1, -2) @ self.as_matrix(v)
        return np.abs(E + np.swapaxes(E, -1, -2)).max(axis=(-1, -2))

    def random_point(self, rng, size=None):
        shape = (() if size is None else tuple(np.atleast_1d(size).tolist()))
        return self.as_flat(haar_so3(rng, shape))

    def body(self, x, v):
        """Rotation vector of the left-trivialised tangent ``R^T v``."""
        return vee(np.swapaxes(self.as_matrix(x), -1, -2) @ self.as_matrix(v))

    def exp(self, x, v):
        R = self.as_matrix(x)
        return self.project_point(self.as_flat(R @ rodrigues(self.body(x, v))))

    def dist(self, x, y):
        Q = np.swapaxes(self.as_matrix(x), -1, -2) @ self.as_matrix(y)
        q = _quaternion(Q)
        return 2.0 * np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), q[..., 0])

    def _log_body(self, x, y):
        Q = np.swapaxes(self.as_matrix(x), -1, -2) @ self.as_matrix(y)
        return _so3_log(Q)

    def _cut_body_candidates(self, w):
        th = np.linalg.norm(w)
        return [w, -w * (2.0 * np.pi - th) / th]

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        w = self._log_body(x, y)
        R = self.as_matrix(x)
        th = np.linalg.norm(w, axis=-1)
        cut = th > np.pi - TOL_CUT
        if np.any(cut):
            w = np.array(w, copy=True)
            Rb = np.broadcast_to(R, w.shape[:-1] + (3, 3))
            for idx in zip(*np.nonzero(np.atleast_1d(cut))) if w.ndim > 1 else [()]:
                cands = self._cut_body_candidates(w[idx])
                amb = np.stack([(Rb[idx] @ hat(c)).reshape(9) for c in cands])
                w[idx] = cands[_lex_argmin(amb)]
        return self.as_flat(R @ hat(w))

    def cut_candidates(self, x, y):
        R = self.as_matrix(x)
        cands = [self.as_flat(R @ hat(c)) for c in self._cut_body_candidates(self._log_body(x, y))]
        order = np.lexsort(np.stack(cands).T[::-1])
        return [cands[i] for i in order]

    def transport(self, x, y, v):
        # left-trivialised transport along R exp(sE): Z -> exp(-E/2) Z exp(E/2)
        R = self.as_matrix(x)
        w = self._log_body(x, y)
        H = rodrigues(0.5 * w)
        out = R @ H @ np.swapaxes(R, -1, -2) @ self.as_matrix(v) @ H
        return self.as_flat(out)

    def frame(self, x):
        R = self.as_matrix(x)
        F = R[..., None, :, :] @ _SO3_BASIS
        return F.reshape(F.shape[:-2] + (9,))


@dataclass(frozen=True)
class Circle(Manifold):
    """Unit circle parametrised by an angle in (-pi, pi]."""

    dim: int = 1
    name: ClassVar[str] = "circle"
    ambient_dim: ClassVar[int] = 1

    def __post_init__(self):
        if self.dim != 1:
            raise InvalidArgumentError("the circle has dimension 1")

    @property
    def ricci_lb(self):
        return 0.0

    @property
    def injectivity_radius(self):
        return np.pi

    def origin(self):
        return np.zeros(1)

    def project_point(self, x):
        return wrap_angle(x)

    def point_residual(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return np.where((x > -np.pi) & (x <= np.pi), 0.0, np.inf)

    def random_point(self, rng, size=None):
        shape = (() if size is None else tuple(np.atleast_1d(size).tolist()))
        return wrap_angle(rng.uniform(-np.pi, np.pi, shape + (1,)))

    def exp(self, x, v):
        return wrap_angle(np.asarray(x, dtype=float) + v)

    def log(self, x, y):
        d = wrap_angle(np.asarray(y, dtype=float) - x)
        # near the antipode the two candidates are d and d - 2pi; keep the smaller
        return np.where(d > np.pi - TOL_CUT, d - 2.0 * np.pi, d)

    def cut_candidates(self, x, y):
        d = wrap_angle(np.asarray(y, dtype=float) - x)
        return [d - 2.0 * np.pi, d]

    def dist(self, x, y):
        return np.abs(wrap_angle(np.asarray(y, dtype=float) - x))[..., 0]

    def transport(self, x, y, v):
        return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast_shapes(np.shape(y), np.shape(v))).copy()

    def frame(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1] + (1, 1))

    def frame_combination(self, x, xi):
        return np.asarray(xi, dtype=float).copy()


def haar_so3(rng, shape=()):
    """Haar-distributed rotation matrices from sign-corrected Gaussian QR."""
    shape = tuple(shape)
    G = rng.standard_normal(shape + (3, 3))
    Q, Rr = np.linalg.qr(G)
    d = np.sign(np.diagonal(Rr, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    Q = Q * d[..., None, :]
    neg = np.linalg.det(Q) < 0
    Q[..., :, 0] *= np.where(neg, -1.0, 1.0)[..., None]
    return Q


# ---------------------------------------------------------------------------
# single-point API


@dataclass(frozen=True, eq=False)
class Point:
    """A point on ``kind``, in the ambient coordinates listed in the module docstring."""

    kind: Manifold
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size != self.kind.ambient_dim:
            raise InvalidArgumentError(
                f"{self.kind} expects {self.kind.ambient_dim} coordinates, got {c.size}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def residual(self) -> float:
        return float(self.kind.point_residual(self.coords))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.residual() <= tol

    def __eq__(self, other):
        return (
            isinstance(other, Point)
            and self.kind == other.kind
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self):
        return hash((self.kind, self.coords.tobytes()))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector ``comps`` at ``base``, in ambient coordinates."""

    base: Point
    comps: np.ndarray

    def __post_init__(self):
        c = np.array(self.comps, dtype=float).reshape(-1)
        if c.size != self.base.kind.ambient_dim:
            raise InvalidArgumentError("tangent components do not match the ambient size")
        c.setflags(write=False)
        object.__setattr__(self, "comps", c)

    @property
    def kind(self) -> Manifold:
        return self.base.kind

    def norm(self) -> float:
        return float(self.kind.norm(self.base.coords, self.comps))

    def residual(self) -> float:
        return float(self.kind.tangent_residual(self.base.coords, self.comps))

    def inner(self, other: "TangentVector") -> float:
        _same_base(self.base, other.base)
        return float(self.kind.inner(self.base.coords, self.comps, other.comps))


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of the tangent space at ``base``."""

    base: Point
    basis: tuple = field(default=())

    def matrix(self) -> np.ndarray:
        return np.stack([v.comps for v in self.basis])


@dataclass(frozen=True)
class CurvatureConstants:
    ricci_lb: float
    injectivity_radius: float


def _same_kind(x: Point, y: Point):
    if x.kind != y.kind:
        raise InvalidArgumentError(f"manifold mismatch: {x.kind} vs {y.kind}")


def _same_base(x: Point, y: Point, tol: float = 1e-12):
    _same_kind(x, y)
    if not np.allclose(x.coords, y.coords, rtol=0.0, atol=tol):
        raise InvalidArgumentError("tangent vector is not based at the given point")


def _near_cut(x: Point, y: Point) -> bool:
    M = x.kind
    return np.isfinite(M.injectivity_radius) and float(M.dist(x.coords, y.coords)) > (
        M.injectivity_radius - TOL_CUT
    )


def exp_map(x: Point, v: TangentVector) -> Point:
    """Endpoint of the geodesic leaving ``x`` with velocity ``v`` at time 1."""
    _same_base(x, v.base)
    return Point(x.kind, x.kind.exp(x.coords, v.comps))


def log_map(x: Point, y: Point, tie_break: bool = False) -> TangentVector:
    """Minimal initial velocity of a geodesic from ``x`` to ``y``.

    Near the cut locus (within :data:`TOL_CUT`) the minimal geodesic is not
    unique. By default a :class:`CutLocusError` carrying the candidates is
    raised; with ``tie_break=True`` the lexicographically smallest candidate
    (in ambient components) is returned instead.
    """
    _same_kind(x, y)
    if _near_cut(x, y) and not tie_break:
        cands = x.kind.cut_candidates(x.coords, y.coords)
        raise CutLocusError(f"{y.coords} lies on the cut locus of {x.coords}", cands)
    return TangentVector(x, x.kind.log(x.coords, y.coords))


def distance(x: Point, y: Point) -> float:
    """Geodesic distance."""
    _same_kind(x, y)
    return float(x.kind.dist(x.coords, y.coords))


def parallel_transport(x: Point, y: Point, v: TangentVector) -> TangentVector:
    """Transport ``v`` from ``x`` to ``y`` along the minimal geodesic."""
    _same_kind(x, y)
    _same_base(x, v.base)
    if _near_cut(x, y):
        cands = x.kind.cut_candidates(x.coords, y.coords)
        raise CutLocusError("minimal geodesic is not unique", cands)
    return TangentVector(y, x.kind.transport(x.coords, y.coords, v.comps))


def orthonormal_frame(x: Point) -> Frame:
    """Deterministic orthonormal frame at ``x``."""
    F = np.asarray(x.kind.frame(x.coords))
    return Frame(x, tuple(TangentVector(x, row) for row in F))


def curvature_constants(kind: Manifold) -> CurvatureConstants:
    """Ricci lower bound and injectivity radius of ``kind``."""
    if not isinstance(kind, Manifold):
        raise InvalidArgumentError(f"unsupported manifold kind: {kind!r}")
    return CurvatureConstants(float(kind.ricci_lb), float(kind.injectivity_radius))


def gaussian_tangent(x: Point, rng: np.random.Generator) -> TangentVector:
    """Standard Gaussian tangent vector: i.i.d. N(0, 1) coefficients in the frame at ``x``."""
    xi = rng.standard_normal(x.kind.dim)
    return TangentVector(x, x.kind.frame_combination(x.coords, xi))
