"""Test functions with declared Lipschitz constants, and per-manifold registries.

A :class:`TestFunction` wraps a batch callable on ambient coordinates. The
declared ``C0, C1, C2`` bound the sup norms of the first three covariant
derivatives; they are derived by hand below and checked numerically in the
test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import Circle, Euclidean, Manifold, Point, Rotations, Sphere

__all__ = ["TestFunction", "registry", "lookup", "linear_combination"]


@dataclass(frozen=True, eq=False)
class TestFunction:
    """``func`` maps an array ``(..., ambient)`` to values ``(...)``."""

    func: Callable[[np.ndarray], np.ndarray]
    C0: Optional[float] = None
    C1: Optional[float] = None
    C2: Optional[float] = None
    name: str = "h"

    __test__ = False  # not a pytest class

    def __call__(self, x):
        if isinstance(x, Point):
            return float(self.func(x.coords[None, :])[0])
        x = np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=float)

    def scaled(self, a: float, shift: float = 0.0) -> "TestFunction":
        """``a * h + shift``; constants scale by ``|a|``."""
        def sc(c):
            return None if c is None else abs(a) * c

        return TestFunction(
            lambda x: a * self.func(x) + shift, sc(self.C0), sc(self.C1), sc(self.C2),
            f"{a:g}*{self.name}+{shift:g}",
        )


def linear_combination(terms: list[tuple[float, TestFunction]], name: str = "combo") -> TestFunction:
    def c(attr):
        vals = [getattr(t, attr) for _, t in terms]
        return None if any(v is None for v in vals) else sum(abs(a) * v for (a, _), v in zip(terms, vals))

    return TestFunction(lambda x: sum(a * t.func(x) for a, t in terms), c("C0"), c("C1"), c("C2"), name)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _sphere_registry(m: int) -> list[TestFunction]:
    n = m + 1
    out = []
    # coordinates: |grad| <= 1, Hess = -x_j g, D Hess = -dx_j (x) g
    for j in range(min(n, 3)):
        out.append(TestFunction(lambda x, j=j: x[..., j], 1.0, 1.0, 1.0, f"coord{j}"))
    poles = [_unit(np.r_[1.0, 1.0, np.zeros(n - 2)]),
             _unit(np.r_[0.0, 1.0, 1.0, np.zeros(n - 3)] if n >= 3 else np.r_[1.0, -1.0]),
             _unit(np.r_[1.0, 0.0, -1.0, np.zeros(n - 3)] if n >= 3 else np.r_[2.0, 1.0])]
    for k, q in enumerate(poles):
        # cos of the distance to q is the linear function <q, x>
        out.append(TestFunction(lambda x, q=q: x @ q, 1.0, 1.0, 1.0, f"cosdist{k}"))
    for k, q in enumerate(poles):
        # sin^2/4: |grad| = |sin 2r|/4, |Hess| <= 1/2, |D Hess| <= 2|s sin r| <= 1
        out.append(TestFunction(lambda x, q=q: 0.25 * (1.0 - (x @ q) ** 2), 0.25, 0.5, 1.0, f"sin2dist{k}"))
    for k, q in enumerate(poles):
        # smooth bump exp(<q,x> - 1)/8, peaked at q
        out.append(TestFunction(lambda x, q=q: 0.125 * np.exp(x @ q - 1.0), 0.125, 0.25, 1.0, f"bump{k}"))
    return out


def _circle_registry() -> list[TestFunction]:
    out = [
        TestFunction(lambda x: np.cos(x[..., 0]), 1.0, 1.0, 1.0, "cos"),
        TestFunction(lambda x: np.sin(x[..., 0]), 1.0, 1.0, 1.0, "sin"),
        TestFunction(lambda x: 0.25 * np.cos(2 * x[..., 0]), 0.5, 1.0, 2.0, "cos2"),
    ]
    for k, a in enumerate((0.5, 1.5, -2.0)):
        out.append(TestFunction(lambda x, a=a: np.cos(x[..., 0] - a), 1.0, 1.0, 1.0, f"cosdist{k}"))
    return out


def _euclidean_registry(m: int) -> list[TestFunction]:
    out = []
    for j in range(m):
        out.append(TestFunction(lambda x, j=j: np.sin(x[..., j]), 1.0, 1.0, 1.0, f"sin{j}"))
        out.append(TestFunction(lambda x, j=j: np.cos(x[..., j]), 1.0, 1.0, 1.0, f"cos{j}"))
    return out


def _rotations_registry() -> list[TestFunction]:
    # entries R_ij: |grad| <= 1 under the half-Frobenius metric, same for higher derivatives
    out = []
    for i, j in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)]:
        out.append(TestFunction(lambda x, k=3 * i + j: x[..., k], 1.0, 1.0, 1.0, f"R{i}{j}"))
    return out


def registry(kind: Manifold) -> list[TestFunction]:
    """Built-in test functions for ``kind``."""
    if isinstance(kind, Sphere):
        return _sphere_registry(kind.dim)
    if isinstance(kind, Circle):
        return _circle_registry()
    if isinstance(kind, Rotations):
        return _rotations_registry()
    if isinstance(kind, Euclidean):
        return _euclidean_registry(kind.dim)
    return []


def lookup(kind: Manifold, name: str) -> TestFunction:
    for tf in registry(kind):
        if tf.name == name:
            return tf
    raise KeyError(f"no test function {name!r} on {kind}")
