"""Polynomial-exact quadrature over polygons and edges, and scaled monomial bases.

Cell rules are built by fanning the polygon into triangles from its centroid
(falling back to ear clipping when the centroid does not see every edge) and
placing a collapsed Gauss-Jacobi x Gauss-Legendre tensor rule on each triangle.
All weights are positive and rules are exact up to the advertised degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class QuadratureError(Exception):
    """Raised when a rule cannot be constructed for a polygon."""


def polygon_area(verts: np.ndarray) -> float:
    """Signed area of a polygon given as an (n, 2) CCW vertex loop."""
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def polygon_diameter(verts: np.ndarray) -> float:
    """Maximum vertex-to-vertex distance."""
    d = verts[:, None, :] - verts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2).max()))


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a rule, with the degree it integrates exactly."""

    points: np.ndarray   # (n, 2) for cells, (n, 2) on the segment for edges
    weights: np.ndarray  # (n,)
    degree: int

    def integrate(self, f) -> float | np.ndarray:
        """Apply the rule to a callable f(points) -> (n,) or (n, m)."""
        vals = np.asarray(f(self.points))
        return np.tensordot(self.weights, vals, axes=(0, 0))


class ScaledMonomialBasis:
    """Monomials m_a = ((x - x_c)/h)^a, |a| <= degree, O(1) on the cell.

    For degree 1 the basis is [1, xi, eta] with xi = (x - x_c)/h and
    eta = (y - y_c)/h; gradients are constant.
    """

    def __init__(self, centroid: np.ndarray, diameter: float, degree: int = 1):
        if degree not in (1, 2):
            raise ValueError(f"unsupported basis degree {degree}")
        self.centroid = np.asarray(centroid, dtype=float)
        self.diameter = float(diameter)
        self.degree = degree
        # exponent table in graded lexicographic order
        self.exponents = [(0, 0), (1, 0), (0, 1)]
        if degree == 2:
            self.exponents += [(2, 0), (1, 1), (0, 2)]

    @property
    def n_funcs(self) -> int:
        return len(self.exponents)

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values at points, shape (npts, n_funcs)."""
        pts = np.atleast_2d(points)
        xi = (pts[:, 0] - self.centroid[0]) / self.diameter
        eta = (pts[:, 1] - self.centroid[1]) / self.diameter
        cols = [xi**ax * eta**ay for ax, ay in self.exponents]
        return np.column_stack(cols)

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Gradients at points, shape (npts, n_funcs, 2)."""
        pts = np.atleast_2d(points)
        xi = (pts[:, 0] - self.centroid[0]) / self.diameter
        eta = (pts[:, 1] - self.centroid[1]) / self.diameter
        out = np.zeros((pts.shape[0], self.n_funcs, 2))
        for a, (ax, ay) in enumerate(self.exponents):
            if ax > 0:
                out[:, a, 0] = ax * xi ** (ax - 1) * eta**ay / self.diameter
            if ay > 0:
                out[:, a, 1] = xi**ax * ay * eta ** (ay - 1) / self.diameter
        return out


def duffy_triangle_nodes(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference-triangle nodes/weights exact for polynomials up to `degree`.

    Collapsed tensor rule on {(r, s): r, s >= 0, r + s <= 1} via the Duffy map
    r = u, s = v(1 - u); the (1 - u) Jacobian is absorbed by a Gauss-Jacobi
    rule, so weights stay positive.  Reference weights sum to 1/2.
    """
    n = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(n, 1.0, 0.0)   # weight (1 - x) on [-1, 1]
    xl, wl = roots_legendre(n)
    u = 0.5 * (xj + 1.0)
    wu = 0.25 * wj                       # absorbs (1 - u) exactly
    v = 0.5 * (xl + 1.0)
    wv = 0.5 * wl
    r = np.repeat(u, n)
    s = np.tile(v, n) * (1.0 - r)
    w = np.repeat(wu, n) * np.tile(wv, n)
    return np.column_stack([r, s]), w


def triangle_rule(tri: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Map the reference Duffy rule onto a physical triangle (3, 2)."""
    ref, w = duffy_triangle_nodes(degree)
    a, b, c = tri
    pts = a + ref[:, :1] * (b - a) + ref[:, 1:] * (c - a)
    jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return pts, w * jac


def _fan_triangles(verts: np.ndarray, apex: np.ndarray) -> np.ndarray | None:
    """Fan triangulation from apex; None if any triangle is degenerate/flipped."""
    n = len(verts)
    tris = np.empty((n, 3, 2))
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        cross = (a[0] - apex[0]) * (b[1] - apex[1]) - (a[1] - apex[1]) * (b[0] - apex[0])
        if cross <= 0.0:
            return None
        tris[i] = (apex, a, b)
    return tris


def _ear_clip(verts: np.ndarray) -> np.ndarray:
    """Triangulate a simple CCW polygon by ear clipping."""
    idx = list(range(len(verts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10000:
            raise QuadratureError("ear clipping failed; polygon may be non-simple")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = verts[i0], verts[i1], verts[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0.0:
                continue
            # no other vertex may lie inside the candidate ear
            ear = np.array([a, b, c])
            others = [j for j in idx if j not in (i0, i1, i2)]
            if any(_point_in_triangle(verts[j], ear) for j in others):
                continue
            tris.append(ear)
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise QuadratureError("ear clipping failed; polygon may be non-simple")
    tris.append(verts[idx])
    return np.array(tris)


def _point_in_triangle(p: np.ndarray, tri: np.ndarray) -> bool:
    a, b, c = tri
    d1 = (p[0] - b[0]) * (a[1] - b[1]) - (a[0] - b[0]) * (p[1] - b[1])
    d2 = (p[0] - c[0]) * (b[1] - c[1]) - (b[0] - c[0]) * (p[1] - c[1])
    d3 = (p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])
    neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (neg and pos)


DEFAULT_CELL_DEGREE = 4


def polygon_rule(verts: np.ndarray, degree: int = DEFAULT_CELL_DEGREE) -> QuadratureRule:
    """Quadrature over a simple CCW polygon, exact up to `degree`.

    Fans from the centroid when the polygon is star-shaped with respect to
    it, otherwise falls back to ear clipping.
    """
    verts = np.asarray(verts, dtype=float)
    if polygon_area(verts) <= 0.0:
        raise QuadratureError("polygon has non-positive area (vertex loop must be CCW)")
    apex = polygon_centroid(verts)
    tris = _fan_triangles(verts, apex)
    if tris is None:
        tris = _ear_clip(verts)
    pts, wts = [], []
    for tri in tris:
        p, w = triangle_rule(tri, degree)
        pts.append(p)
        wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), degree)


def edge_rule(p0: np.ndarray, p1: np.ndarray, degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment p0 -> p1, exact up to `degree`."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    t = 0.5 * (x + 1.0)
    pts = p0 + t[:, None] * (p1 - p0)
    length = float(np.hypot(*(p1 - p0)))
    return QuadratureRule(pts, 0.5 * w * length, degree)


def monomial_moments(verts: np.ndarray, k: int = 1,
                     rule: QuadratureRule | None = None) -> np.ndarray:
    """Gram matrix of the scaled monomial basis on a polygon.

    Entry (a, b) is the integral over the cell of m_a * m_b; in particular
    entry (0, 0) is the cell area.  Symmetric positive definite.
    """
    if k != 1:
        raise ValueError("only the lowest-order basis (k=1) is built")
    verts = np.asarray(verts, dtype=float)
    basis = ScaledMonomialBasis(polygon_centroid(verts), polygon_diameter(verts), k)
    if rule is None:
        rule = polygon_rule(verts, max(2 * k, DEFAULT_CELL_DEGREE))
    vals = basis.eval(rule.points)
    return (vals * rule.weights[:, None]).T @ vals
