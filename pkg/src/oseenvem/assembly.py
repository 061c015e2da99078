"""Global DOF numbering, boundary conditions, and sparse assembly of the
generalized eigenpencil and source systems.

Velocity DOFs are shared edge means (two per edge), which is exactly the weak
inter-element continuity of the nonconforming space; Dirichlet edges are
eliminated.  The clamped problem carries a single Lagrange multiplier row
enforcing the zero-mean pressure constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .elements import Cell, build_pi_zero
from .mesh import DIRICHLET, NEUMANN, PolygonalMesh
from .quadrature import DEFAULT_CELL_DEGREE, edge_rule, polygon_rule


class AssemblyError(Exception):
    pass


@dataclass(frozen=True)
class OseenParameters:
    """Problem data: viscosity, steady flow field, stabilization, boundary type."""

    nu: float = 1.0
    beta: object = (1.0, 0.0)   # constant pair or callable (n,2) -> (n,2)
    alpha: float = 1.0          # velocity (dofi-dofi) stabilization
    beta_k: float = 0.0         # mass stabilization
    bc: str = "clamped"         # "clamped" | "mixed"
    quad_degree: int = DEFAULT_CELL_DEGREE

    def beta_at(self, points: np.ndarray) -> np.ndarray:
        if callable(self.beta):
            return np.asarray(self.beta(points), dtype=float)
        return np.broadcast_to(np.asarray(self.beta, dtype=float),
                               (len(points), 2)).copy()


@dataclass(frozen=True)
class DofNumbering:
    """Reduced global numbering after Dirichlet elimination."""

    n_edges: int
    reduced_of: np.ndarray      # (2 * n_edges,) reduced id or -1 if eliminated
    n_velocity: int
    n_pressure: int
    has_multiplier: bool

    @property
    def n_total(self) -> int:
        return self.n_velocity + self.n_pressure + (1 if self.has_multiplier else 0)

    def reduce(self, full_vec: np.ndarray) -> np.ndarray:
        return full_vec[self.reduced_of >= 0]

    def expand(self, reduced_vec: np.ndarray) -> np.ndarray:
        out = np.zeros(2 * self.n_edges, dtype=reduced_vec.dtype)
        keep = self.reduced_of >= 0
        out[keep] = reduced_vec
        return out


def number_dofs(mesh: PolygonalMesh, bc: str) -> DofNumbering:
    if bc not in ("clamped", "mixed"):
        raise AssemblyError(f"unknown boundary condition type {bc!r}")
    eliminated = np.zeros(2 * mesh.n_edges, dtype=bool)
    dirichlet = mesh.boundary_tags == DIRICHLET
    if bc == "clamped":
        if np.any(mesh.boundary_tags[mesh.boundary_edge_ids] != DIRICHLET):
            raise AssemblyError("clamped problem requires all boundary edges Dirichlet")
    else:
        if not dirichlet.any():
            raise AssemblyError("mixed problem requires a non-empty Dirichlet part")
    eliminated[2 * np.nonzero(dirichlet)[0]] = True
    eliminated[2 * np.nonzero(dirichlet)[0] + 1] = True
    reduced = np.full(2 * mesh.n_edges, -1, dtype=np.int64)
    keep = ~eliminated
    reduced[keep] = np.arange(keep.sum())
    return DofNumbering(mesh.n_edges, reduced, int(keep.sum()), mesh.n_cells,
                        has_multiplier=(bc == "clamped"))


@dataclass(frozen=True)
class GlobalPencil:
    """Sparse blocks of the generalized eigenproblem 𝒜 x = λ ℳ x."""

    a_sym: sp.csr_matrix
    a_skew: sp.csr_matrix
    b: sp.csr_matrix            # pressure x velocity divergence block
    m: sp.csr_matrix            # velocity mass
    areas: np.ndarray           # zero-mean pressure constraint row (clamped)
    numbering: DofNumbering
    mesh: PolygonalMesh
    params: OseenParameters
    is_adjoint: bool = False

    def lhs(self) -> sp.csr_matrix:
        a = self.a_sym + self.a_skew
        if self.numbering.has_multiplier:
            col = sp.csr_matrix(self.areas.reshape(-1, 1))
            blocks = [[a, self.b.T, None],
                      [self.b, None, col],
                      [None, col.T, None]]
        else:
            blocks = [[a, self.b.T], [self.b, None]]
        return sp.bmat(blocks, format="csr")

    def rhs(self) -> sp.csr_matrix:
        n = self.numbering.n_total
        out = sp.lil_matrix((n, n))
        nu_ = self.numbering.n_velocity
        out[:nu_, :nu_] = self.m
        return out.tocsr()

    def adjoint(self) -> "GlobalPencil":
        """Pencil of the adjoint problem: conjugate-transposed left matrix
        (the blocks keep their places; only the skew part flips sign)."""
        return replace(self, a_skew=(-self.a_skew).tocsr(),
                       is_adjoint=not self.is_adjoint)

    def split(self, x: np.ndarray):
        """Split a solution vector into velocity / pressure (/ multiplier)."""
        nu_ = self.numbering.n_velocity
        np_ = self.numbering.n_pressure
        u, p = x[:nu_], x[nu_:nu_ + np_]
        mult = x[nu_ + np_] if self.numbering.has_multiplier else None
        return u, p, mult


def assemble_adjoint(pencil: GlobalPencil) -> GlobalPencil:
    return pencil.adjoint()


def _local_batch(mesh: PolygonalMesh, params: OseenParameters):
    from ._kernels import batch_local_matrices
    return batch_local_matrices(mesh, params)


def _neumann_convective_correction(mesh, params, numbering) -> sp.csr_matrix:
    """Hermitian boundary term (1/2) int_{Gamma_N} (beta . n) (w . v).

    The skew-symmetrized convective form equals the plain one only up to this
    boundary integral, so it must be added back for the stated zero-traction
    condition to be the natural one.  Velocity traces enter through their edge
    means, which is exact at this order for the DOF content of the space.
    """
    nu_ = numbering.n_velocity
    rows, vals = [], []
    for e in np.nonzero(mesh.boundary_tags == NEUMANN)[0]:
        a, b = mesh.vertices[mesh.edges[e]]
        rule = edge_rule(a, b, max(params.quad_degree, 2))
        flux = float(rule.weights @ (params.beta_at(rule.points) @ mesh.edge_normals[e]))
        for c in (0, 1):
            rid = numbering.reduced_of[2 * e + c]
            if rid >= 0:
                rows.append(rid)
                vals.append(0.5 * flux)
    return sp.coo_matrix((vals, (rows, rows)), shape=(nu_, nu_)).tocsr()


def assemble(mesh: PolygonalMesh, params: OseenParameters) -> GlobalPencil:
    """Scatter-add the local matrices into the global sparse blocks."""
    numbering = number_dofs(mesh, params.bc)
    asym_loc, askew_loc, mass_loc, brow_loc = _local_batch(mesh, params)

    rows_a, cols_a = [], []
    vals_sym, vals_skew, vals_mass = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    for k in range(mesh.n_cells):
        edges = mesh.cell_edges[k]
        nd = 2 * len(edges)
        gdof = np.empty(nd, dtype=np.int64)
        gdof[0::2] = 2 * edges
        gdof[1::2] = 2 * edges + 1
        red = numbering.reduced_of[gdof]
        keep = red >= 0
        r = red[keep]
        ii = np.repeat(r, len(r))
        jj = np.tile(r, len(r))
        rows_a.append(ii)
        cols_a.append(jj)
        block = np.ix_(keep, keep)
        vals_sym.append(asym_loc[k][:nd, :nd][block].ravel())
        vals_skew.append(askew_loc[k][:nd, :nd][block].ravel())
        vals_mass.append(mass_loc[k][:nd, :nd][block].ravel())
        rows_b.append(np.full(len(r), k, dtype=np.int64))
        cols_b.append(r)
        vals_b.append(brow_loc[k][:nd][keep])

    nu_ = numbering.n_velocity
    shape_a = (nu_, nu_)
    rows_a = np.concatenate(rows_a)
    cols_a = np.concatenate(cols_a)
    a_sym = sp.coo_matrix((np.concatenate(vals_sym), (rows_a, cols_a)), shape=shape_a).tocsr()
    a_skew = sp.coo_matrix((np.concatenate(vals_skew), (rows_a, cols_a)), shape=shape_a).tocsr()
    m = sp.coo_matrix((np.concatenate(vals_mass), (rows_a, cols_a)), shape=shape_a).tocsr()
    b = sp.coo_matrix((np.concatenate(vals_b),
                       (np.concatenate(rows_b), np.concatenate(cols_b))),
                      shape=(mesh.n_cells, nu_)).tocsr()
    if params.bc == "mixed":
        a_sym = (a_sym + _neumann_convective_correction(mesh, params, numbering)).tocsr()
    return GlobalPencil(a_sym, a_skew, b, m, mesh.areas.copy(), numbering, mesh, params)


def interpolate(mesh: PolygonalMesh, field, degree: int = 9) -> np.ndarray:
    """Full-space DOF vector of a smooth field: exact edge means per component."""
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    ref = edge_rule(np.zeros(2), np.array([1.0, 0.0]), degree)
    t = ref.points[:, 0]
    w = ref.weights  # sums to 1 on the unit segment
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    vals = np.asarray(field(pts.reshape(-1, 2))).reshape(len(a), len(t), 2)
    means = np.einsum("q,eqc->ec", w, vals)
    out = np.empty(2 * mesh.n_edges)
    out[0::2] = means[:, 0]
    out[1::2] = means[:, 1]
    return out


def load_vector(pencil: GlobalPencil, f_field) -> np.ndarray:
    """Right-hand side of the source problem: rhs_i = c_h(f, phi_i), computed
    through the L2 projection of f on each cell."""
    mesh = pencil.mesh
    numbering = pencil.numbering
    rhs = np.zeros(numbering.n_total)
    for k in range(mesh.n_cells):
        cell = Cell.from_mesh(mesh, k)
        rule = polygon_rule(cell.verts, max(pencil.params.quad_degree, 6))
        fv = np.asarray(f_field(rule.points))
        mv = cell.basis.eval(rule.points)
        t = np.empty(6)
        t[0:3] = (rule.weights[:, None] * mv).T @ fv[:, 0]
        t[3:6] = (rule.weights[:, None] * mv).T @ fv[:, 1]
        loc = build_pi_zero(cell).T @ t
        edges = mesh.cell_edges[k]
        gdof = np.empty(2 * len(edges), dtype=np.int64)
        gdof[0::2] = 2 * edges
        gdof[1::2] = 2 * edges + 1
        red = numbering.reduced_of[gdof]
        keep = red >= 0
        np.add.at(rhs, red[keep], loc[keep])
    return rhs


def export_triplets(matrix: sp.spmatrix, path) -> None:
    """Text dump `i j value` per line (row-major order) for external checks."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v!r}\n")
