"""Convex polygon primitives and bounded Voronoi tessellation.

Polygons are ``(k, 2)`` float arrays of vertices in counter-clockwise
order. An empty polygon is a ``(0, 2)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERGE_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate polygons or generator sets."""


def _as_poly(poly) -> np.ndarray:
    arr = np.asarray(poly, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    return arr.reshape(-1, 2)


def signed_area(poly) -> float:
    p = _as_poly(poly)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    """Shoelace area of a CCW polygon; 0 for empty or degenerate input."""
    return max(signed_area(poly), 0.0)


def _merge_vertices(pts: list) -> np.ndarray:
    # drop consecutive duplicates (including wrap-around) and collinear middles
    out = []
    for q in pts:
        if out and abs(q[0] - out[-1][0]) <= MERGE_TOL and abs(q[1] - out[-1][1]) <= MERGE_TOL:
            continue
        out.append(q)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= MERGE_TOL and abs(out[0][1] - out[-1][1]) <= MERGE_TOL:
        out.pop()
    changed = True
    while changed and len(out) >= 3:
        changed = False
        for k in range(len(out)):
            a, b, c = out[k - 1], out[k], out[(k + 1) % len(out)]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(cross) <= MERGE_TOL:
                del out[k]
                changed = True
                break
    if len(out) < 3:
        return np.zeros((0, 2))
    return np.array(out, dtype=float)


def clip_halfplane(poly, normal, offset: float) -> np.ndarray:
    """Intersect a convex CCW polygon with ``{q : normal . q <= offset}``.

    Returns the clipped polygon (CCW, possibly empty). Raises GeometryError
    for a polygon with fewer than 3 vertices or a zero normal.
    """
    p = _as_poly(poly)
    if len(p) < 3:
        raise GeometryError(f"cannot clip a polygon with {len(p)} vertices")
    n = np.asarray(normal, dtype=float)
    if not np.any(n):
        raise GeometryError("half-plane normal must be non-zero")
    s = p @ n - offset
    if np.all(s <= 0.0):
        return p.copy()
    if np.all(s > 0.0):
        return np.zeros((0, 2))
    out = []
    k = len(p)
    for i in range(k):
        a, b = p[i], p[(i + 1) % k]
        sa, sb = s[i], s[(i + 1) % k]
        if sa <= 0.0:
            out.append((a[0], a[1]))
        if (sa <= 0.0) != (sb <= 0.0):
            t = sa / (sa - sb)
            q = a + t * (b - a)
            out.append((q[0], q[1]))
    return _merge_vertices(out)


def point_in_convex(poly, q, tol: float = 1e-12) -> bool:
    p = _as_poly(poly)
    if len(p) < 3:
        return False
    e = np.roll(p, -1, axis=0) - p
    r = np.asarray(q, dtype=float) - p
    cross = e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0]
    return bool(np.all(cross >= -tol))


def points_in_convex(poly, qs, tol: float = 1e-12) -> np.ndarray:
    """Vectorised membership test for an ``(m, 2)`` array of points."""
    p = _as_poly(poly)
    qs = np.asarray(qs, dtype=float)
    if len(p) < 3:
        return np.zeros(len(qs), dtype=bool)
    inside = np.ones(len(qs), dtype=bool)
    for a, b in zip(p, np.roll(p, -1, axis=0)):
        e = b - a
        cross = e[0] * (qs[:, 1] - a[1]) - e[1] * (qs[:, 0] - a[0])
        inside &= cross >= -tol
    return inside


@dataclass(frozen=True)
class DomainPolygon:
    """Convex coverage region with CCW vertices."""

    vertices: np.ndarray

    def __post_init__(self):
        v = _as_poly(self.vertices)
        if len(v) < 3:
            raise GeometryError("domain needs at least 3 vertices")
        d = np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1)
        if np.any(d <= MERGE_TOL):
            raise GeometryError("domain has repeated vertices")
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        cross = e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0]
        if signed_area(v) <= 0.0:
            raise GeometryError("domain vertices must be counter-clockwise with positive area")
        if np.any(cross <= MERGE_TOL):
            raise GeometryError("domain must be strictly convex")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "DomainPolygon":
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    def contains(self, q, tol: float = 1e-9) -> bool:
        return point_in_convex(self.vertices, q, tol)


@dataclass(frozen=True)
class CellSummary:
    polygon: np.ndarray
    mass: float
    centroid: np.ndarray


def check_generators(domain: DomainPolygon, positions, min_sep: float = 1e-9) -> np.ndarray:
    """Validate generator positions: inside the domain and pairwise distinct."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    for i, q in enumerate(pts):
        if not domain.contains(q):
            raise GeometryError(f"generator {i} at ({q[0]:.6g}, {q[1]:.6g}) lies outside the domain")
    if len(pts) > 1:
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] <= min_sep:
            i, j = sorted((int(i), int(j)))
            raise GeometryError(f"generators {i} and {j} coincide")
    return pts


def voronoi_cells(domain: DomainPolygon, positions) -> list[np.ndarray]:
    """Voronoi cells of ``positions`` restricted to ``domain``.

    Each cell is the domain clipped by the perpendicular-bisector half-plane
    against every other generator. O(n^2) clips.
    """
    pts = check_generators(domain, positions)
    cells = []
    for i, p in enumerate(pts):
        cell = domain.vertices
        for j, z in enumerate(pts):
            if i == j:
                continue
            # |q - p|^2 <= |q - z|^2  <=>  (z - p) . q <= (|z|^2 - |p|^2) / 2
            normal = z - p
            offset = 0.5 * (z @ z - p @ p)
            cell = clip_halfplane(cell, normal, offset)
            if len(cell) == 0:
                break
        cells.append(np.asarray(cell, dtype=float))
    return cells
