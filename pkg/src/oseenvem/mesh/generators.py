"""Mesh generators: square, trapezoidal, hexagonal, Voronoi, and L-shaped families.

All generators are pure functions of (N, bounds, seed); bounds are given as
(xmin, ymin, xmax, ymax).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Voronoi

from .core import MeshError, PolygonalMesh

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)
BIUNIT_SQUARE = (-1.0, -1.0, 1.0, 1.0)

TRAPEZOID_SHEAR = 0.3  # fraction of the horizontal pitch; keeps cells convex
DEFAULT_LLOYD_ITERS = 3


def _check_bounds(bounds):
    x0, y0, x1, y1 = map(float, bounds)
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate bounds {bounds}")
    return x0, y0, x1, y1


def generate_square_grid(n: int, bounds=BIUNIT_SQUARE) -> PolygonalMesh:
    """Uniform n x n quadrilateral grid."""
    if n < 1:
        raise MeshError("square grid requires N >= 1")
    x0, y0, x1, y1 = _check_bounds(bounds)
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    vid = lambda i, j: j * (n + 1) + i
    cells = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(n) for i in range(n)]
    return PolygonalMesh(verts, cells, refinement_label=n)


def generate_trapezoidal(n: int, bounds=BIUNIT_SQUARE) -> PolygonalMesh:
    """n x n trapezoid grid: interior vertical grid lines are sheared
    horizontally by TRAPEZOID_SHEAR of the pitch, sign alternating by row."""
    if n < 2:
        raise MeshError("trapezoidal grid requires N >= 2")
    x0, y0, x1, y1 = _check_bounds(bounds)
    dx = (x1 - x0) / n
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    verts = np.empty(((n + 1) * (n + 1), 2))
    for j in range(n + 1):
        for i in range(n + 1):
            x = xs[i]
            if 0 < i < n:
                x = x + TRAPEZOID_SHEAR * dx * (1.0 if j % 2 == 0 else -1.0)
            verts[j * (n + 1) + i] = (x, ys[j])
    vid = lambda i, j: j * (n + 1) + i
    cells = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
             for j in range(n) for i in range(n)]
    return PolygonalMesh(verts, cells, refinement_label=n)


# -- hexagonal ---------------------------------------------------------------

def _clip_lattice(poly, axis, bound, keep_ge):
    """Sutherland-Hodgman against an axis-aligned line, in integer lattice
    coordinates.  Hexagon edges have slope 0, inf, or +-1 on the lattice, so
    every intersection lands exactly on a lattice point."""
    out = []
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        ain = (a[axis] >= bound) if keep_ge else (a[axis] <= bound)
        bin_ = (b[axis] >= bound) if keep_ge else (b[axis] <= bound)
        if ain:
            out.append(a)
        if ain != bin_:
            da = b[axis] - a[axis]
            t_num = bound - a[axis]
            other = 1 - axis
            cut = [0, 0]
            cut[axis] = bound
            cut[other] = a[other] + (b[other] - a[other]) * t_num // da
            out.append((cut[0], cut[1]))
    dedup = []
    for p in out:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def generate_hexagonal(n: int, bounds=BIUNIT_SQUARE) -> PolygonalMesh:
    """Structured tiling by convex hexagons, with half cells clipped at the
    boundary.  Vertices live on an exact half-pitch lattice so shared edges
    match bitwise.
    """
    if n < 2:
        raise MeshError("hexagonal mesh requires N >= 2")
    x0, y0, x1, y1 = _check_bounds(bounds)
    w = (x1 - x0) / n                       # horizontal center pitch
    ideal_pitch = np.sqrt(3.0) / 2.0 * w    # regular-hexagon row pitch
    n_rows = max(2, round((y1 - y0) / ideal_pitch))
    p = (y1 - y0) / n_rows
    # lattice: x = x0 + m * w/2, y = y0 + j * p/3
    j_top = 3 * n_rows
    vert_ids: dict[tuple[int, int], int] = {}
    verts: list[tuple[float, float]] = []
    cells = []

    def vid(m, j):
        key = (m, j)
        if key not in vert_ids:
            vert_ids[key] = len(verts)
            verts.append((x0 + m * (w / 2.0), y0 + j * (p / 3.0)))
        return vert_ids[key]

    for k in range(n_rows + 1):
        if k % 2 == 0:
            centers = [2 * i for i in range(n + 1)]
        else:
            centers = [2 * i + 1 for i in range(n)]
        for mc in centers:
            jc = 3 * k
            hexagon = [(mc + 1, jc - 1), (mc + 1, jc + 1), (mc, jc + 2),
                       (mc - 1, jc + 1), (mc - 1, jc - 1), (mc, jc - 2)]
            poly = _clip_lattice(hexagon, 0, 0, True)
            poly = _clip_lattice(poly, 0, 2 * n, False)
            poly = _clip_lattice(poly, 1, 0, True)
            poly = _clip_lattice(poly, 1, j_top, False)
            if len(poly) >= 3:
                cells.append([vid(m, j) for m, j in poly])
    return PolygonalMesh(np.array(verts), cells, refinement_label=n)


# -- Voronoi -----------------------------------------------------------------

def _mirror_points(pts, bounds):
    x0, y0, x1, y1 = bounds
    left = pts.copy();   left[:, 0] = 2 * x0 - left[:, 0]
    right = pts.copy();  right[:, 0] = 2 * x1 - right[:, 0]
    down = pts.copy();   down[:, 1] = 2 * y0 - down[:, 1]
    up = pts.copy();     up[:, 1] = 2 * y1 - up[:, 1]
    return np.vstack([pts, left, right, down, up])


def _bounded_voronoi_cells(pts, bounds):
    """Voronoi cells of pts clipped exactly to the rectangle via mirroring.

    Returns a list of CCW (n_i, 2) arrays, one per input point.
    """
    vor = Voronoi(_mirror_points(pts, bounds))
    cells = []
    for i in range(len(pts)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi cell; seeds may be degenerate")
        poly = vor.vertices[region]
        center = poly.mean(axis=0)
        ang = np.arctan2(poly[:, 1] - center[1], poly[:, 0] - center[0])
        poly = poly[np.argsort(ang)]
        cells.append(poly)
    return cells


def _weld_cells(cell_polys, tol):
    """Merge near-identical vertices across cells and build index loops."""
    key_of: dict[tuple[int, int], int] = {}
    verts: list[np.ndarray] = []
    cells = []
    for poly in cell_polys:
        loop = []
        for pt in poly:
            key = (int(np.floor(pt[0] / tol + 0.5)), int(np.floor(pt[1] / tol + 0.5)))
            if key not in key_of:
                key_of[key] = len(verts)
                verts.append(pt)
            idx = key_of[key]
            if not loop or idx != loop[-1]:
                loop.append(idx)
        if len(loop) > 1 and loop[0] == loop[-1]:
            loop.pop()
        if len(loop) >= 3:
            cells.append(loop)
    return np.array(verts), cells


def _lloyd_step(pts, bounds):
    from ..quadrature import polygon_centroid
    return np.array([polygon_centroid(c) for c in _bounded_voronoi_cells(pts, bounds)])


def generate_voronoi(n: int, bounds=BIUNIT_SQUARE, seed: int = 0,
                     lloyd_iters: int = DEFAULT_LLOYD_ITERS) -> PolygonalMesh:
    """Clipped Voronoi mesh of ~n^2 generators after centroidal relaxation."""
    if n < 2:
        raise MeshError("Voronoi mesh requires N >= 2")
    if lloyd_iters < 0:
        raise MeshError("lloyd_iters must be >= 0")
    x0, y0, x1, y1 = _check_bounds(bounds)
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(x0, x1, n * n), rng.uniform(y0, y1, n * n)])
    for _ in range(lloyd_iters):
        pts = _lloyd_step(pts, (x0, y0, x1, y1))
    polys = _bounded_voronoi_cells(pts, (x0, y0, x1, y1))
    tol = 1e-9 * min(x1 - x0, y1 - y0) / n
    verts, cells = _weld_cells(polys, tol)
    if len(cells) != n * n:
        raise MeshError("degenerate Voronoi seeds produced empty cells; "
                        "change the seed or reduce lloyd_iters")
    return PolygonalMesh(verts, cells, refinement_label=n)


# -- L-shaped domain ---------------------------------------------------------

L_BOUNDS = (-1.0, -1.0, 1.0, 1.0)
L_QUADRANT_BOXES = ((-1.0, 0.0, 0.0, 1.0), (0.0, 0.0, 1.0, 1.0), (0.0, -1.0, 1.0, 0.0))


def _clip_box(poly, box):
    """Float Sutherland-Hodgman of a convex polygon against an axis box."""
    x0, y0, x1, y1 = box
    for axis, bound, keep_ge in ((0, x0, True), (0, x1, False),
                                 (1, y0, True), (1, y1, False)):
        out = []
        m = len(poly)
        for i in range(m):
            a, b = poly[i], poly[(i + 1) % m]
            ain = a[axis] >= bound if keep_ge else a[axis] <= bound
            bin_ = b[axis] >= bound if keep_ge else b[axis] <= bound
            if ain:
                out.append(a)
            if ain != bin_:
                t = (bound - a[axis]) / (b[axis] - a[axis])
                cut = a + t * (b - a)
                cut[axis] = bound
                out.append(cut)
        poly = out
        if not poly:
            return []
    return poly


def generate_lshape(n: int, family: str = "structured", seed: int = 0) -> PolygonalMesh:
    """Mesh of (-1,1)^2 minus the closed third quadrant.

    family="structured": square grid minus the third-quadrant cells (N even).
    family="voronoi": clipped Voronoi cells restricted to the L-shape.
    """
    if n < 2:
        raise MeshError("L-shaped mesh requires N >= 2")
    if family == "structured":
        if n % 2 != 0:
            raise MeshError("structured L-shaped mesh requires even N so no "
                            "cell crosses the re-entrant corner")
        full = generate_square_grid(n, L_BOUNDS)
        keep = [list(c) for k, c in enumerate(full.cells)
                if not (full.centroids[k, 0] < 0.0 and full.centroids[k, 1] < 0.0)]
        used = sorted({v for c in keep for v in c})
        remap = {v: i for i, v in enumerate(used)}
        cells = [[remap[v] for v in c] for c in keep]
        return PolygonalMesh(full.vertices[used], cells, refinement_label=n)
    if family == "voronoi":
        rng = np.random.default_rng(seed)
        target = int(np.ceil(0.75 * n * n))
        pts = []
        while len(pts) < target:
            cand = rng.uniform(-1.0, 1.0, size=2)
            if not (cand[0] < 0.0 and cand[1] < 0.0):
                pts.append(cand)
        pts = np.array(pts)
        for _ in range(DEFAULT_LLOYD_ITERS):
            # relax within the bounding square, re-rejecting the notch
            pts = _lloyd_step(pts, L_BOUNDS)
            inside = ~((pts[:, 0] < 0.0) & (pts[:, 1] < 0.0))
            pts = pts[inside]
        polys = _bounded_voronoi_cells(pts, L_BOUNDS)
        pieces = []
        for poly in polys:
            for box in L_QUADRANT_BOXES:
                piece = _clip_box([p.copy() for p in poly], box)
                if len(piece) >= 3:
                    area = 0.0
                    for i in range(len(piece)):
                        a, b = piece[i], piece[(i + 1) % len(piece)]
                        area += a[0] * b[1] - b[0] * a[1]
                    if area > 1e-14:
                        pieces.append(np.array(piece))
        verts, cells = _weld_cells(pieces, 1e-9 / n)
        return PolygonalMesh(verts, cells, refinement_label=n)
    raise MeshError(f"unknown L-shape family {family!r}")
