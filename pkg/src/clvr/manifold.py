"""Circle manifold with exact projection, score fields, and decomposition.

The circle is the one manifold where nearest-point projection, normal and
tangent directions, and the score-style field (pi(x) - x)/sigma^2 all have
closed forms, which makes the perturbation experiments in this package
exactly checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ToyManifold:
    """A circle of given radius and center in the plane."""

    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = "circle"

    def __post_init__(self):
        if self.kind != "circle":
            raise ValueError(f"unsupported manifold kind {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64)


def project(manifold: ToyManifold, x) -> np.ndarray:
    """Nearest point on the circle; undefined at the center."""
    x = np.asarray(x, dtype=np.float64)
    offset = x - manifold.center_array
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        raise ValueError("projection undefined at the circle center")
    return manifold.center_array + manifold.radius * offset / dist


def normal_score(manifold: ToyManifold, x, sigma: float) -> np.ndarray:
    """Score-style field (pi(x) - x)/sigma^2, normal to the circle at pi(x).

    Only defined in the tubular neighborhood where the distance to the
    circle is below the radius (which keeps the projection well-conditioned).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    dist_to_center = float(np.linalg.norm(x - manifold.center_array))
    if abs(dist_to_center - manifold.radius) >= manifold.radius:
        raise ValueError(
            f"point at distance {abs(dist_to_center - manifold.radius):.4g} "
            f"from the circle is outside the tubular neighborhood"
        )
    return (project(manifold, x) - x) / (sigma * sigma)


def decompose(manifold: ToyManifold, x, v) -> tuple[np.ndarray, np.ndarray]:
    """Split v into its normal and tangential parts at pi(x).

    The normal direction is radial at the projection; v_N + v_T = v with
    v_N parallel to it and v_T orthogonal, an exact direct sum.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    offset = x - manifold.center_array
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        raise ValueError("normal direction undefined at the circle center")
    normal = offset / dist
    v_n = float(np.dot(v, normal)) * normal
    return v_n, v - v_n
