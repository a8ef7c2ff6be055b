"""Importance densities and density-weighted quadrature over convex cells."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import GeometryError, polygon_area

# 6-point symmetric rule on the reference triangle, exact to degree 4
# (Dunavant 1985). Barycentric coordinates and weights summing to one.
_A1, _B1, _W1 = 0.108103018168070, 0.445948490915965, 0.223381589678011
_A2, _B2, _W2 = 0.816847572980459, 0.091576213509771, 0.109951743655322
_BARY = np.array(
    [
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
_W = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


@dataclass(frozen=True)
class GaussianDensity:
    """Axis-aligned bivariate normal density."""

    mean: tuple[float, float] = (1.75, 1.75)
    sigma: tuple[float, float] = (0.3, 0.3)

    def __post_init__(self):
        if len(self.sigma) != 2 or min(self.sigma) <= 0.0:
            raise ValueError(f"sigma must be two positive numbers, got {self.sigma}")
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "sigma", tuple(float(v) for v in self.sigma))

    def __call__(self, q) -> np.ndarray | float:
        q = np.asarray(q, dtype=float)
        sx, sy = self.sigma
        zx = (q[..., 0] - self.mean[0]) / sx
        zy = (q[..., 1] - self.mean[1]) / sy
        return np.exp(-0.5 * (zx * zx + zy * zy)) / (2.0 * np.pi * sx * sy)


@dataclass(frozen=True)
class UniformDensity:
    value: float = 1.0

    def __post_init__(self):
        if self.value <= 0.0:
            raise ValueError("uniform density must be positive")

    def __call__(self, q) -> np.ndarray | float:
        q = np.asarray(q, dtype=float)
        return np.full(q.shape[:-1], self.value) if q.ndim > 1 else self.value


def eval_density(density, q) -> float:
    return float(density(np.asarray(q, dtype=float)))


@lru_cache(maxsize=16)
def _reference_rule(resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on the reference triangle split into resolution**2 pieces.

    Returns barycentric nodes ``(m, 3)`` and weights ``(m,)`` summing to 1.
    """
    k = int(resolution)
    if k < 1:
        raise ValueError("quadrature resolution must be >= 1")
    subs = []
    for i in range(k):
        for j in range(k - i):
            # barycentric (l1, l2) grid; l0 = 1 - l1 - l2
            subs.append(((i, j), (i + 1, j), (i, j + 1)))
            if i + j + 1 < k:
                subs.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
    nodes = []
    for tri in subs:
        corners = np.array([[1.0 - (a + b) / k, a / k, b / k] for a, b in tri])
        nodes.append(_BARY @ corners)
    nodes = np.vstack(nodes)
    weights = np.tile(_W, len(subs)) / len(subs)
    return nodes, weights


def cell_nodes(cell, resolution: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and area weights for a convex polygon.

    The cell is fan-triangulated from its vertex average.
    """
    poly = np.asarray(cell, dtype=float).reshape(-1, 2)
    if len(poly) < 3 or polygon_area(poly) <= 0.0:
        raise GeometryError("cannot integrate over an empty cell")
    centre = poly.mean(axis=0)
    a = np.broadcast_to(centre, poly.shape)
    b = poly
    c = np.roll(poly, -1, axis=0)
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    bary, w = _reference_rule(resolution)
    # (tri, node, xy)
    pts = (
        bary[None, :, 0, None] * a[:, None, :]
        + bary[None, :, 1, None] * b[:, None, :]
        + bary[None, :, 2, None] * c[:, None, :]
    )
    wts = area[:, None] * w[None, :]
    return pts.reshape(-1, 2), wts.reshape(-1)


def cell_mass_centroid(cell, density, resolution: int = 4) -> tuple[float, np.ndarray]:
    """Mass and density-weighted centroid of a convex cell."""
    q, w = cell_nodes(cell, resolution)
    wf = w * density(q)
    mass = float(wf.sum())
    if not mass > 0.0:
        raise GeometryError("cell mass is not positive")
    return mass, (wf @ q) / mass


def cell_moments(cell, density, p, resolution: int = 4) -> tuple[float, np.ndarray, float]:
    """Mass, centroid and the cost integral of |q - p|^2 over one cell."""
    q, w = cell_nodes(cell, resolution)
    wf = w * density(q)
    mass = float(wf.sum())
    if not mass > 0.0:
        raise GeometryError("cell mass is not positive")
    d = q - np.asarray(p, dtype=float)
    cost = float(wf @ np.einsum("ij,ij->i", d, d))
    return mass, (wf @ q) / mass, cost


def locational_cost(cells, positions, density, resolution: int = 4) -> float:
    """Sum over cells of the density-weighted squared distance to each generator."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(cells) != len(pts):
        raise ValueError(f"{len(cells)} cells but {len(pts)} positions")
    return sum(cell_moments(c, density, p, resolution)[2] for c, p in zip(cells, pts))
