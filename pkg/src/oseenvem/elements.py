"""Per-cell DOF layout, computable projectors, and local element matrices
for the lowest-order nonconforming velocity space.

Velocity DOFs on a cell with n edges are the per-edge mean values of the two
velocity components, in edge loop order with (x-mean, y-mean) interleaved:
dof[2*l + c] = (1/|e_l|) \\int_{e_l} v_c.  The pressure carries one constant
per cell.

Vector polynomials are expanded in the scaled monomial basis [1, xi, eta]
per component, x-component coefficients first: coefficient index a in 0..5
means component a // 3, monomial a % 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .quadrature import (DEFAULT_CELL_DEGREE, QuadratureRule, ScaledMonomialBasis,
                         edge_rule, monomial_moments, polygon_area,
                         polygon_centroid, polygon_diameter, polygon_rule)


@dataclass(frozen=True)
class LocalDofMap:
    """Velocity DOF layout of one cell: two edge means per edge."""

    n_edges: int

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_edges

    def edge_of(self, i: int) -> int:
        return i // 2

    def component_of(self, i: int) -> int:
        return i % 2


class Cell:
    """Geometry view of one polygonal cell, edges in loop order."""

    def __init__(self, verts: np.ndarray):
        self.verts = np.asarray(verts, dtype=float)
        self.area = polygon_area(self.verts)
        if self.area <= 0.0:
            raise ValueError("cell vertex loop must be counter-clockwise")
        self.centroid = polygon_centroid(self.verts)
        self.diameter = polygon_diameter(self.verts)
        nxt = np.roll(self.verts, -1, axis=0)
        vec = nxt - self.verts
        self.edge_lengths = np.hypot(vec[:, 0], vec[:, 1])
        tangents = vec / self.edge_lengths[:, None]
        self.edge_normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
        self.edge_midpoints = 0.5 * (self.verts + nxt)
        self.n_edges = len(self.verts)
        self.dof_map = LocalDofMap(self.n_edges)
        self.basis = ScaledMonomialBasis(self.centroid, self.diameter, 1)

    @classmethod
    def from_mesh(cls, mesh, k: int) -> "Cell":
        return cls(mesh.cell_vertices(k))

    def rule(self, degree: int = DEFAULT_CELL_DEGREE) -> QuadratureRule:
        return polygon_rule(self.verts, degree)

    def interpolation_dofs(self, field, degree: int = 9) -> np.ndarray:
        """Edge-mean DOFs of a smooth vector field on this cell."""
        dofs = np.empty(2 * self.n_edges)
        for l in range(self.n_edges):
            a, b = self.verts[l], self.verts[(l + 1) % self.n_edges]
            r = edge_rule(a, b, degree)
            vals = np.asarray(field(r.points))
            mean = r.weights @ vals / self.edge_lengths[l]
            dofs[2 * l:2 * l + 2] = mean
        return dofs


def dof_of_polynomials(cell: Cell) -> np.ndarray:
    """DOF matrix D (2n x 6): edge means of the six basis vector polynomials.

    Exact because the basis is linear, so each edge mean is the midpoint value.
    """
    mid_vals = cell.basis.eval(cell.edge_midpoints)  # (n, 3)
    n = cell.n_edges
    D = np.zeros((2 * n, 6))
    D[0::2, 0:3] = mid_vals
    D[1::2, 3:6] = mid_vals
    return D


def gradient_gram(cell: Cell) -> np.ndarray:
    """Gram matrix of basis gradients: integral of grad(phi_a) : grad(phi_b)."""
    g = cell.area / cell.diameter**2
    return np.diag([0.0, g, g, 0.0, g, g])


def vector_mass_gram(cell: Cell, rule: QuadratureRule | None = None) -> np.ndarray:
    """Gram matrix H (6 x 6) of the vector basis: block diag of scalar moments."""
    Hs = monomial_moments(cell.verts, 1, rule=rule)
    H = np.zeros((6, 6))
    H[0:3, 0:3] = Hs
    H[3:6, 3:6] = Hs
    return H


def build_pi_nabla(cell: Cell) -> np.ndarray:
    """Energy-projector matrix P (6 x 2n): DOFs -> coefficients.

    For linears the defining equations reduce to boundary data: gradients of
    test polynomials are constant, so only edge means of the function enter,
    and the constant part is fixed by matching the boundary mean.
    """
    n = cell.n_edges
    h = cell.diameter
    lens = cell.edge_lengths
    nx, ny = cell.edge_normals[:, 0], cell.edge_normals[:, 1]
    G = gradient_gram(cell)
    R = np.zeros((6, 2 * n))
    R[1, 0::2] = lens * nx / h
    R[2, 0::2] = lens * ny / h
    R[4, 1::2] = lens * nx / h
    R[5, 1::2] = lens * ny / h
    # rows 0 and 3: boundary-mean condition per component
    mid_vals = cell.basis.eval(cell.edge_midpoints)
    bnd = lens @ mid_vals   # integral over the cell boundary of each monomial
    G[0, 0:3] = bnd
    G[3, 3:6] = bnd
    R[0, 0::2] = lens
    R[3, 1::2] = lens
    try:
        return np.linalg.solve(G, R)
    except np.linalg.LinAlgError as err:
        raise ValueError(f"singular projector system on cell at "
                         f"{cell.centroid}: {err}") from None


def build_pi_zero(cell: Cell, p_nabla: np.ndarray | None = None,
                  gram: np.ndarray | None = None) -> np.ndarray:
    """L2-projector matrix (6 x 2n) onto vector linears.

    The cell moments of a virtual function are not DOFs at this order; they
    are replaced by the moments of its energy projection, which makes the
    matrix the solution of H s = H P_nabla.
    """
    if p_nabla is None:
        p_nabla = build_pi_nabla(cell)
    if gram is None:
        gram = vector_mass_gram(cell)
    return np.linalg.solve(gram, gram @ p_nabla)


def build_pi_zero_grad(cell: Cell) -> np.ndarray:
    """Cell-mean-of-gradient matrix (4 x 2n): DOFs -> flattened 2x2 tensor.

    Row 2c + j holds d u_c / d x_j averaged over the cell, assembled from the
    boundary identity  |K| mean(grad u) = sum_e |e| mean_e(u) (x) n_e.
    """
    n = cell.n_edges
    lens = cell.edge_lengths
    nrm = cell.edge_normals
    Gz = np.zeros((4, 2 * n))
    for c in range(2):
        for j in range(2):
            Gz[2 * c + j, c::2] = lens * nrm[:, j] / cell.area
    return Gz


def stab_projector_complement(cell: Cell, proj: np.ndarray) -> np.ndarray:
    """(I - dof(proj .)) in DOF coordinates; vanishes on polynomial DOFs."""
    D = dof_of_polynomials(cell)
    return np.eye(2 * cell.n_edges) - D @ proj


def local_sym(cell: Cell, nu: float, alpha: float,
              p_nabla: np.ndarray | None = None) -> np.ndarray:
    """Symmetric local matrix: projected viscous energy plus dofi-dofi
    stabilization scaled by nu * alpha (the h_K power is 1 in 2D)."""
    if nu <= 0.0:
        raise ValueError("viscosity must be positive")
    if alpha < 0.0:
        raise ValueError("stabilization parameter must be non-negative")
    if p_nabla is None:
        p_nabla = build_pi_nabla(cell)
    G = gradient_gram(cell)
    cons = p_nabla.T @ G @ p_nabla
    S = stab_projector_complement(cell, p_nabla)
    A = nu * (cons + alpha * (S.T @ S))
    return 0.5 * (A + A.T)


def local_skew(cell: Cell, beta_field, p_zero: np.ndarray | None = None,
               g_zero: np.ndarray | None = None,
               rule: QuadratureRule | None = None) -> np.ndarray:
    """Skew local matrix of the projected convective form.

    beta_field maps (nq, 2) points to (nq, 2) values (or a constant pair);
    the projected gradient is a constant tensor per cell while beta is
    evaluated pointwise at the quadrature nodes.
    """
    if p_zero is None:
        p_zero = build_pi_zero(cell)
    if g_zero is None:
        g_zero = build_pi_zero_grad(cell)
    if rule is None:
        rule = cell.rule()
    beta = beta_field(rule.points) if callable(beta_field) else \
        np.broadcast_to(np.asarray(beta_field, dtype=float), (len(rule.points), 2))
    mvals = cell.basis.eval(rule.points)          # (nq, 3)
    polyx = mvals @ p_zero[0:3, :]                # (nq, 2n)
    polyy = mvals @ p_zero[3:6, :]
    sx = np.outer(beta[:, 0], g_zero[0]) + np.outer(beta[:, 1], g_zero[1])
    sy = np.outer(beta[:, 0], g_zero[2]) + np.outer(beta[:, 1], g_zero[3])
    w = rule.weights[:, None]
    T1 = (w * polyx).T @ sx + (w * polyy).T @ sy  # T1[i, j] = int (G_j beta) . poly_i
    return 0.5 * (T1 - T1.T)


def local_div(cell: Cell) -> np.ndarray:
    """Divergence row (2n,): exact pairing of the cell pressure constant with
    the velocity DOFs, b(v, 1) = -int_K div v = -sum_e |e| n_e . mean_e(v)."""
    row = np.empty(2 * cell.n_edges)
    row[0::2] = -cell.edge_lengths * cell.edge_normals[:, 0]
    row[1::2] = -cell.edge_lengths * cell.edge_normals[:, 1]
    return row


def local_mass(cell: Cell, beta_k: float = 0.0,
               p_zero: np.ndarray | None = None,
               gram: np.ndarray | None = None) -> np.ndarray:
    """Mass local matrix: projected L2 product, plus the optional dofi-dofi
    mass stabilizer scaled by beta_k * h_K^2 (default off)."""
    if beta_k < 0.0:
        raise ValueError("mass stabilization parameter must be non-negative")
    if p_zero is None:
        p_zero = build_pi_zero(cell)
    if gram is None:
        gram = vector_mass_gram(cell)
    M = p_zero.T @ gram @ p_zero
    if beta_k > 0.0:
        S = stab_projector_complement(cell, p_zero)
        M = M + beta_k * cell.diameter**2 * (S.T @ S)
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class LocalMatrices:
    """All element matrices of one cell plus the projectors used to build them."""

    a_sym: np.ndarray
    a_skew: np.ndarray
    b_row: np.ndarray
    mass: np.ndarray
    p_nabla: np.ndarray
    p_zero: np.ndarray
    g_zero: np.ndarray


def build_local(cell: Cell, nu: float, beta_field, alpha: float,
                beta_k: float = 0.0,
                quad_degree: int = DEFAULT_CELL_DEGREE) -> LocalMatrices:
    """Build the four local matrices of one cell."""
    rule = cell.rule(quad_degree)
    p_nabla = build_pi_nabla(cell)
    gram = vector_mass_gram(cell, rule=rule)
    p_zero = build_pi_zero(cell, p_nabla=p_nabla, gram=gram)
    g_zero = build_pi_zero_grad(cell)
    return LocalMatrices(
        a_sym=local_sym(cell, nu, alpha, p_nabla=p_nabla),
        a_skew=local_skew(cell, beta_field, p_zero=p_zero, g_zero=g_zero, rule=rule),
        b_row=local_div(cell),
        mass=local_mass(cell, beta_k, p_zero=p_zero, gram=gram),
        p_nabla=p_nabla,
        p_zero=p_zero,
        g_zero=g_zero,
    )


def dump_local_matrices(mesh, nu, beta_field, alpha, beta_k, path) -> None:
    """Write every cell's matrices to JSON for external cross-checking."""
    out = []
    for k in range(mesh.n_cells):
        loc = build_local(Cell.from_mesh(mesh, k), nu, beta_field, alpha, beta_k)
        out.append({
            "cell": k,
            "a_sym": loc.a_sym.tolist(),
            "a_skew": loc.a_skew.tolist(),
            "b_row": loc.b_row.tolist(),
            "mass": loc.mass.tolist(),
        })
    with open(path, "w") as fh:
        json.dump(out, fh)
