"""Geometry of the flat unit torus: points, the wrap-around metric, lattices
and geometric scale ladders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

SHIFTS = tuple((e1, e2) for e1 in (-1, 0, 1) for e2 in (-1, 0, 1))
MAX_DISTANCE = math.sqrt(0.5)


def _wrap(c: float) -> float:
    w = float(c) % 1.0
    # tiny negatives round up to exactly 1.0
    return 0.0 if w >= 1.0 else w


@dataclass(frozen=True)
class TorusPoint:
    """A point of [0,1)^2; coordinates are wrapped on construction."""

    u: float
    v: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", _wrap(self.u))
        object.__setattr__(self, "v", _wrap(self.v))

    def __add__(self, other) -> "TorusPoint":
        du, dv = other
        return TorusPoint(self.u + du, self.v + dv)

    def __sub__(self, other) -> "TorusPoint":
        du, dv = other
        return TorusPoint(self.u - du, self.v - dv)

    def __iter__(self) -> Iterator[float]:
        yield self.u
        yield self.v

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


def torus_distance(a, b) -> float:
    """Minimum over the nine unit shifts of the Euclidean distance."""
    au, av = a
    bu, bv = b
    return min(math.hypot(au - bu + e1, av - bv + e2) for e1, e2 in SHIFTS)


def torus_delta(a, b) -> tuple[float, float]:
    """Minimal-image displacement a - b, components in [-1/2, 1/2)."""
    au, av = a
    bu, bv = b
    du = (au - bu + 0.5) % 1.0 - 0.5
    dv = (av - bv + 0.5) % 1.0 - 0.5
    return du, dv


def torus_distance_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised torus metric for (..., 2) arrays."""
    d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return np.hypot(d[..., 0], d[..., 1])


@dataclass(frozen=True)
class Lattice:
    """Square lattice of mesh 1/ceil(1/eps), enumerated row-major."""

    eps: float
    side: int
    mesh: float
    points: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return self.side * self.side

    def index(self, a: int, b: int) -> int:
        return (a % self.side) * self.side + (b % self.side)

    def point(self, k: int) -> TorusPoint:
        return TorusPoint(*self.points[k])

    def nearest(self, p) -> int:
        a = int(round(p[0] / self.mesh)) % self.side
        b = int(round(p[1] / self.mesh)) % self.side
        return self.index(a, b)


def lattice_side(eps: float) -> int:
    # guard 1/eps landing a hair above an integer (e.g. 1/0.1)
    return math.ceil(round(1.0 / eps, 9))


def make_lattice(eps: float) -> Lattice:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    side = lattice_side(eps)
    mesh = 1.0 / side
    a, b = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    points = np.column_stack([a.ravel() * mesh, b.ravel() * mesh])
    points.setflags(write=False)
    return Lattice(eps=eps, side=side, mesh=mesh, points=points)


@dataclass(frozen=True)
class ScaleLadder:
    """Radii r_i = R (eps/R)^(i/K), i = 0..K, around a center."""

    R: float
    eps: float
    K: int
    radii: tuple[float, ...]

    @property
    def ratio(self) -> float:
        return (self.R / self.eps) ** (1.0 / self.K)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.radii, dtype=float)


def make_scale_ladder(R: float, eps: float, K: int) -> ScaleLadder:
    if not (0.0 < eps < R < 0.5):
        raise ValueError(f"need 0 < eps < R < 1/2, got R={R}, eps={eps}")
    if int(K) != K or K < 1:
        raise ValueError(f"K must be an integer >= 1, got {K}")
    K = int(K)
    radii = [R * (eps / R) ** (i / K) for i in range(K + 1)]
    radii[0], radii[K] = float(R), float(eps)
    return ScaleLadder(R=float(R), eps=float(eps), K=K, radii=tuple(radii))
