"""Stein's method on Riemannian manifolds through coupled Langevin diffusions."""
from .geometry import (
    Circle,
    CutLocusError,
    Euclidean,
    GeometryError,
    Hyperbolic,
    InvalidArgumentError,
    Point,
    Rotations,
    Sphere,
    TangentVector,
    distance,
    exp_map,
    log_map,
    parallel_transport,
)
from .potentials import (
    FisherWatsonSphere,
    GaussianEuclidean,
    SqDistHyperbolic,
    VmfRotations,
    VmfSphere,
    VonMisesCircle,
    a1_certificate,
)

__version__ = "0.1.0"

__all__ = [
    "Circle",
    "CutLocusError",
    "Euclidean",
    "GeometryError",
    "Hyperbolic",
    "InvalidArgumentError",
    "Point",
    "Rotations",
    "Sphere",
    "TangentVector",
    "distance",
    "exp_map",
    "log_map",
    "parallel_transport",
    "FisherWatsonSphere",
    "GaussianEuclidean",
    "SqDistHyperbolic",
    "VmfRotations",
    "VmfSphere",
    "VonMisesCircle",
    "a1_certificate",
]
