"""Polygonal mesh container, edge topology, and regularity reporting.

Edge orientation convention: every edge stores the unit tangent t_e along its
stored vertex order and the unit normal n_e = (t_2, -t_1).  Edges are stored
in the traversal order of the first cell that claims them, so n_e points from
that cell (the "left" cell K+) into its neighbour, or out of the domain for
boundary edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..quadrature import polygon_area, polygon_centroid, polygon_diameter

INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


@dataclass(frozen=True)
class CellGeometry:
    """Per-cell metric data: area, centroid, diameter, and edge lengths."""

    area: float
    centroid: np.ndarray
    diameter: float
    edge_lengths: np.ndarray


@dataclass(frozen=True)
class RegularityReport:
    """Computed mesh-regularity numbers (never assumed).

    m1: per-cell minimum edge-length / diameter ratio.
    m2: per-cell (kernel inscribed-ball radius) / diameter ratio.
    """

    m1: np.ndarray
    m2: np.ndarray
    sigma: float
    flagged: np.ndarray  # cell indices with min(m1, m2) below the threshold
    threshold: float


class PolygonalMesh:
    """Immutable polygonal mesh with full edge topology.

    Parameters
    ----------
    vertices : (nv, 2) float array
    cells : sequence of integer index loops, each counter-clockwise
    neumann_edges : optional set of vertex pairs marking Neumann boundary
        edges; all remaining boundary edges are Dirichlet.
    refinement_label : the generator's N (1 for imported meshes).
    """

    def __init__(self, vertices, cells, neumann_edges=None, refinement_label: int = 1):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        self.cells = tuple(np.asarray(c, dtype=np.int64) for c in cells)
        self.refinement_label = int(refinement_label)
        nv = len(self.vertices)
        for k, cell in enumerate(self.cells):
            if len(cell) < 3:
                raise MeshError(f"cell {k} has fewer than 3 vertices")
            if len(set(cell.tolist())) != len(cell):
                raise MeshError(f"cell {k} repeats a vertex")
            if cell.min() < 0 or cell.max() >= nv:
                raise MeshError(
                    f"cell {k} references vertex {int(cell.max())} of {nv}")

        self._build_edges()
        self._build_geometry()
        self._apply_tags(neumann_edges)
        for arr in (self.vertices, self.edges, self.edge_cells, self.edge_normals,
                    self.edge_tangents, self.edge_lengths, self.boundary_tags,
                    self.areas, self.centroids, self.diameters):
            arr.flags.writeable = False

    # -- construction -----------------------------------------------------

    def _build_edges(self):
        edge_index: dict[tuple[int, int], int] = {}
        edges, edge_cells = [], []
        cell_edges = []
        for k, cell in enumerate(self.cells):
            ids = np.empty(len(cell), dtype=np.int64)
            for l in range(len(cell)):
                a, b = int(cell[l]), int(cell[(l + 1) % len(cell)])
                key = (a, b) if a < b else (b, a)
                if key not in edge_index:
                    edge_index[key] = len(edges)
                    edges.append((a, b))
                    edge_cells.append([k, -1])
                else:
                    e = edge_index[key]
                    if edge_cells[e][1] != -1:
                        raise MeshError(
                            f"edge {key} shared by more than two cells (non-manifold)")
                    if edges[e] == (a, b):
                        raise MeshError(
                            f"edge {key} traversed twice in the same direction; "
                            "cells are not consistently counter-clockwise")
                    edge_cells[e][1] = k
                ids[l] = edge_index[key]
            cell_edges.append(ids)
        self.edges = np.asarray(edges, dtype=np.int64)
        self.edge_cells = np.asarray(edge_cells, dtype=np.int64)
        self.cell_edges = tuple(cell_edges)
        vec = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        self.edge_lengths = np.hypot(vec[:, 0], vec[:, 1])
        if np.any(self.edge_lengths <= 0.0):
            raise MeshError("zero-length edge")
        self.edge_tangents = vec / self.edge_lengths[:, None]
        self.edge_normals = np.column_stack(
            [self.edge_tangents[:, 1], -self.edge_tangents[:, 0]])

    def _build_geometry(self):
        nc = len(self.cells)
        self.areas = np.empty(nc)
        self.centroids = np.empty((nc, 2))
        self.diameters = np.empty(nc)
        for k, cell in enumerate(self.cells):
            verts = self.vertices[cell]
            area = polygon_area(verts)
            if area <= 0.0:
                raise MeshError(f"cell {k} is not counter-clockwise or degenerate")
            self.areas[k] = area
            self.centroids[k] = polygon_centroid(verts)
            self.diameters[k] = polygon_diameter(verts)

    def _apply_tags(self, neumann_edges):
        tags = np.where(self.edge_cells[:, 1] < 0, DIRICHLET, INTERIOR)
        if neumann_edges:
            wanted = {(min(a, b), max(a, b)) for a, b in neumann_edges}
            for e, (a, b) in enumerate(self.edges):
                key = (min(a, b), max(a, b))
                if key in wanted:
                    if tags[e] != DIRICHLET:
                        raise MeshError(f"edge {key} marked Neumann but is interior")
                    tags[e] = NEUMANN
                    wanted.discard(key)
            if wanted:
                raise MeshError(f"Neumann edges not found in mesh: {sorted(wanted)}")
        self.boundary_tags = tags.astype(np.int8)

    # -- queries -----------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edge_ids(self) -> np.ndarray:
        return np.nonzero(self.edge_cells[:, 1] < 0)[0]

    @property
    def interior_edge_ids(self) -> np.ndarray:
        return np.nonzero(self.edge_cells[:, 1] >= 0)[0]

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def cell_vertices(self, k: int) -> np.ndarray:
        return self.vertices[self.cells[k]]

    def cell_geometry(self, k: int) -> CellGeometry:
        lens = self.edge_lengths[self.cell_edges[k]]
        return CellGeometry(float(self.areas[k]), self.centroids[k].copy(),
                            float(self.diameters[k]), lens.copy())

    def with_neumann(self, predicate) -> "PolygonalMesh":
        """Copy of the mesh with boundary edges whose midpoints satisfy
        predicate(x, y) re-tagged as Neumann."""
        marked = []
        for e in self.boundary_edge_ids:
            a, b = self.edges[e]
            mid = 0.5 * (self.vertices[a] + self.vertices[b])
            if predicate(mid[0], mid[1]):
                marked.append((int(a), int(b)))
        return PolygonalMesh(self.vertices.copy(),
                             [c.copy() for c in self.cells],
                             neumann_edges=marked,
                             refinement_label=self.refinement_label)


def kernel_inradius(verts: np.ndarray) -> float:
    """Radius of the largest ball inscribed in the kernel of a polygon.

    The kernel is the intersection of the inner half-planes of all edges, so
    the Chebyshev center LP covers convex and star-shaped cells alike; a
    non-star-shaped polygon yields radius 0.
    """
    n = len(verts)
    normals = np.empty((n, 2))
    offsets = np.empty(n)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        t = (b - a) / np.hypot(*(b - a))
        nrm = np.array([t[1], -t[0]])  # outward for CCW loops
        normals[i] = nrm
        offsets[i] = nrm @ a
    # maximize r subject to n_i . c + r <= b_i
    res = linprog(c=[0.0, 0.0, -1.0],
                  A_ub=np.column_stack([normals, np.ones(n)]),
                  b_ub=offsets,
                  bounds=[(None, None), (None, None), (0.0, None)],
                  method="highs")
    if not res.success:
        return 0.0
    return float(res.x[2])


def check_regularity(mesh: PolygonalMesh, sigma_threshold: float = 0.0) -> RegularityReport:
    """Per-cell shape-regularity numbers and cells falling below a threshold."""
    nc = mesh.n_cells
    m1 = np.empty(nc)
    m2 = np.empty(nc)
    for k in range(nc):
        lens = mesh.edge_lengths[mesh.cell_edges[k]]
        m1[k] = lens.min() / mesh.diameters[k]
        m2[k] = kernel_inradius(mesh.cell_vertices(k)) / mesh.diameters[k]
    worst = np.minimum(m1, m2)
    flagged = np.nonzero(worst < sigma_threshold)[0]
    return RegularityReport(m1, m2, float(worst.min()), flagged, sigma_threshold)
