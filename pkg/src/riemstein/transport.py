"""Empirical Wasserstein-1 distances and samplers for the stationary laws.

``w1_empirical`` solves the assignment problem on the geodesic cost matrix
with ``scipy.optimize.linear_sum_assignment`` (a shortest augmenting path
method), which is exact for equal-size samples with uniform weights.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import (
    Circle,
    Euclidean,
    Hyperbolic,
    InvalidArgumentError,
    Manifold,
    Point,
    Rotations,
    Sphere,
    haar_so3,
    wrap_angle,
)
from .potentials import (
    FisherWatsonSphere,
    GaussianEuclidean,
    Potential,
    VmfRotations,
    VmfSphere,
    VonMisesCircle,
    a1_certificate,
)
from .sde import DEFAULT_STEP, as_rng, run_chains

__all__ = [
    "Provenance",
    "SampleSet",
    "W1Result",
    "w1_empirical",
    "cost_matrix",
    "sample_exact",
    "sample_uniform_rotations",
    "sample_diffusion",
    "vmf_sphere_sample",
    "MAX_ASSIGNMENT",
]

MAX_ASSIGNMENT = 2048
_KINDS = {"euclidean": Euclidean, "sphere": Sphere, "hyperbolic": Hyperbolic}


class Provenance(str, Enum):
    DIFFUSION_THINNED = "DiffusionThinned"
    EXACT_SAMPLER = "ExactSampler"
    EXTERNAL = "External"


@dataclass(frozen=True, eq=False)
class SampleSet:
    kind: Manifold
    coords: np.ndarray  # (n, ambient)
    provenance: Provenance = Provenance.EXTERNAL

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if c.shape[0] < 1 or c.shape[1] != self.kind.ambient_dim:
            raise InvalidArgumentError("sample coordinates do not match the manifold")
        res = np.asarray(self.kind.point_residual(c))
        if np.any(res > 1e-9):
            raise InvalidArgumentError(f"{int((res > 1e-9).sum())} points are off the manifold")
        object.__setattr__(self, "coords", c)

    def __len__(self):
        return self.coords.shape[0]

    @property
    def points(self) -> list[Point]:
        return [Point(self.kind, c) for c in self.coords]

    # -- CSV ------------------------------------------------------------
    def header(self) -> list[str]:
        return [f"{self.kind.name}:{self.kind.dim}"] + [f"x{i}" for i in range(1, self.kind.ambient_dim)]

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.coords:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: Union[str, Path], provenance: Provenance = Provenance.EXTERNAL) -> "SampleSet":
        """Read a CSV written by :meth:`to_csv`; ``source`` is a path or the CSV text."""
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else str(source)
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InvalidArgumentError("empty CSV")
        tag = rows[0][0]
        name, _, dim = tag.partition(":")
        kind = _kind_from_tag(name, int(dim))
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        return cls(kind, data, provenance)


def _kind_from_tag(name: str, dim: int) -> Manifold:
    if name in _KINDS:
        return _KINDS[name](dim)
    if name == "rotations":
        return Rotations(dim)
    if name == "circle":
        return Circle()
    raise InvalidArgumentError(f"unknown manifold tag {name!r}")


@dataclass(frozen=True)
class W1Result:
    value: float
    assignment: np.ndarray  # b index matched to each a index


def cost_matrix(a: SampleSet, b: SampleSet, block: int = 256) -> np.ndarray:
    """Geodesic distances ``rho(a_i, b_j)`` computed in row blocks."""
    M = a.kind
    n, k = len(a), len(b)
    C = np.empty((n, k))
    for s in range(0, n, block):
        A = a.coords[s:s + block, None, :]
        C[s:s + block] = M.dist(np.broadcast_to(A, (A.shape[0], k, M.ambient_dim)),
                                np.broadcast_to(b.coords[None], (A.shape[0], k, M.ambient_dim)))
    return C


def w1_empirical(a: SampleSet, b: SampleSet) -> W1Result:
    """Exact W1 between two uniform empirical laws of equal size."""
    if a.kind != b.kind:
        raise InvalidArgumentError(f"manifold mismatch: {a.kind} vs {b.kind}")
    if len(a) != len(b):
        raise InvalidArgumentError(f"sample sizes differ: {len(a)} vs {len(b)}")
    if len(a) > MAX_ASSIGNMENT:
        raise InvalidArgumentError(f"at most {MAX_ASSIGNMENT} points per sample")
    C = cost_matrix(a, b)
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(len(a), dtype=int)
    perm[rows] = cols
    return W1Result(float(C[rows, cols].sum() / len(a)), perm)


# ---------------------------------------------------------------------------
# exact samplers


def _orthonormal_complement(x0: np.ndarray) -> np.ndarray:
    """Rows spanning the orthogonal complement of the unit vector ``x0``."""
    n = x0.size
    Q, _ = np.linalg.qr(np.column_stack([x0, np.eye(n)]))
    return Q[:, 1:n].T


def vmf_sphere_sample(x0: np.ndarray, c: float, m: int, n: int, rng, nodes: int = 4096) -> np.ndarray:
    """vMF draws on the unit sphere ``S^m`` by inverting the law of ``t = <x0, X>``.

    ``t`` has density proportional to ``exp(c t) (1 - t^2)^((m - 2) / 2)``. For
    ``m = 2`` the inverse CDF is explicit; otherwise the CDF is tabulated on
    ``nodes`` points in the angle ``theta = arccos(-t)`` with cumulative
    trapezoid weights and inverted by linear interpolation. The tangential
    direction is uniform on the unit sphere of the complement of ``x0``.
    """
    if m < 2:
        raise InvalidArgumentError("vMF sampler needs m >= 2")
    rng = as_rng(rng)
    x0 = np.asarray(x0, dtype=float)
    if m == 2:
        # the density of t is exp(c t): closed-form inverse
        u = rng.uniform(size=n)
        ts = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * c)) / c
    else:
        # t = -cos(theta) with theta on a uniform grid; dt = sin(theta) dtheta
        theta = np.linspace(0.0, np.pi, nodes)
        t = -np.cos(theta)
        s = np.sin(theta)
        with np.errstate(divide="ignore"):
            wts = np.exp(c * (t - 1.0)) * s ** (m - 1)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (wts[1:] + wts[:-1]) * np.diff(theta))])
        cdf /= cdf[-1]
        ts = np.interp(rng.uniform(size=n), cdf, t)
    ts = np.clip(ts, -1.0, 1.0)
    B = _orthonormal_complement(x0)
    g = rng.standard_normal((n, B.shape[0]))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    pts = ts[:, None] * x0 + np.sqrt(1.0 - ts**2)[:, None] * (dirs @ B)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def sample_uniform_rotations(n: int, rng) -> SampleSet:
    return SampleSet(Rotations(), Rotations.as_flat(haar_so3(as_rng(rng), (n,))), Provenance.EXACT_SAMPLER)


def _rejection(propose, log_accept, n, rng, batch=4096, max_rounds=10000):
    out, have = [], 0
    for _ in range(max_rounds):
        x = propose(batch)
        keep = np.log(rng.uniform(size=batch)) < log_accept(x)
        out.append(x[keep])
        have += int(keep.sum())
        if have >= n:
            return np.concatenate(out)[:n]
    raise RuntimeError("rejection sampler did not produce enough points")


def sample_exact(p: Potential, n: int, rng) -> SampleSet:
    """I.i.d. draws from ``exp(-phi)``.

    Supported: vMF on spheres (inverse CDF), the circle (rejection from
    uniform), Gaussians (Cholesky), and by rejection the SO(3) vMF law
    (Haar proposal) and Fisher-Watson (vMF proposal).
    """
    rng = as_rng(rng)
    M = p.manifold
    if isinstance(p, VmfSphere):
        X = vmf_sphere_sample(p.x0, p.c, M.dim, n, rng)
    elif isinstance(p, GaussianEuclidean):
        L = np.linalg.cholesky(np.linalg.inv(p.A))
        X = p.mean + rng.standard_normal((n, M.dim)) @ L.T
    elif isinstance(p, VonMisesCircle):
        X = _rejection(
            lambda k: rng.uniform(-np.pi, np.pi, (k, 1)),
            lambda x: p.c * (np.cos(x[:, 0] - p.x0) - 1.0),
            n, rng,
        )
        X = wrap_angle(X)
    elif isinstance(p, VmfRotations):
        # exp(c tr(S0 S)) <= exp(3c)
        X = _rejection(
            lambda k: Rotations.as_flat(haar_so3(rng, (k,))),
            lambda x: -p.value(x) - 3.0 * p.c,
            n, rng,
        )
    elif isinstance(p, FisherWatsonSphere):
        # proposal vMF(x1, c1); remaining factor exp(c2 <x2, x>^2) <= exp(c2)
        X = _rejection(
            lambda k: vmf_sphere_sample(p.x1, p.c1, M.dim, k, rng),
            lambda x: p.c2 * ((x @ p.x2) ** 2 - 1.0),
            n, rng,
        )
    else:
        raise InvalidArgumentError(f"no exact sampler for {type(p).__name__}; use sample_diffusion")
    return SampleSet(M, X, Provenance.EXACT_SAMPLER)


def sample_diffusion(p: Potential, n: int, kappa: Optional[float] = None, rng=None,
                     step: float = DEFAULT_STEP, n_chains: int = 1) -> SampleSet:
    """Thinned Langevin samples: burn-in ``20 / kappa``, one state every ``2 / kappa``.

    With ``n_chains > 1`` the draws are spread over independent parallel
    chains, each thinned the same way.
    """
    if kappa is None:
        kappa = a1_certificate(p).kappa
    if kappa is None or kappa <= 0:
        raise InvalidArgumentError("sample_diffusion needs a positive kappa")
    thin = max(int(round(2.0 / kappa / step)), 1)
    per_chain = -(-n // n_chains)
    chain = run_chains(p, per_chain * thin * step * n_chains, 20.0 / kappa, h=step,
                       n_chains=n_chains, rng=rng, thin=thin)
    X = chain[:per_chain].transpose(1, 0, 2).reshape(-1, p.manifold.ambient_dim)[:n]
    return SampleSet(p.manifold, p.manifold.project_point(X), Provenance.DIFFUSION_THINNED)
