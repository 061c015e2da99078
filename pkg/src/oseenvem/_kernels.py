"""Batched per-cell matrix kernels: numba-jitted hot path with a pure-numpy
fallback.

The backend is chosen once at import: set OSEENVEM_BACKEND=numpy to force the
fallback (e.g. for debugging or when numba is unavailable); anything else
selects numba when it imports cleanly.  Both paths produce the same padded
arrays; `benchmarks/bench_local_assembly.py` compares them head to head.
"""

from __future__ import annotations

import os

import numpy as np

from .quadrature import duffy_triangle_nodes

_REQUESTED = os.environ.get("OSEENVEM_BACKEND", "numba").strip().lower()
_njit = None
if _REQUESTED != "numpy":
    try:
        from numba import njit as _njit
    except ImportError:
        _njit = None

BACKEND = "numba" if _njit is not None else "numpy"


def _cell_kernel(verts, n, qpts, qwts, nq, beta_vals, nu, alpha, beta_k,
                 asym, askew, mass, brow):
    """Local matrices of one cell, written into the padded output blocks.

    Mirrors the reference construction in elements.py: energy projector from
    boundary data, L2 projector through the projected moments, mean-gradient
    tensor from the boundary, dofi-dofi stabilization.
    """
    # geometry: shoelace area, centroid, diameter
    area = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        j = (i + 1) % n
        cross = verts[i, 0] * verts[j, 1] - verts[j, 0] * verts[i, 1]
        area += cross
        cx += (verts[i, 0] + verts[j, 0]) * cross
        cy += (verts[i, 1] + verts[j, 1]) * cross
    area *= 0.5
    cx /= 6.0 * area
    cy /= 6.0 * area
    diam = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = verts[i, 0] - verts[j, 0]
            dy = verts[i, 1] - verts[j, 1]
            d = np.sqrt(dx * dx + dy * dy)
            if d > diam:
                diam = d

    lens = np.empty(n)
    nrmx = np.empty(n)
    nrmy = np.empty(n)
    midm = np.empty((n, 3))
    for i in range(n):
        j = (i + 1) % n
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        L = np.sqrt(ex * ex + ey * ey)
        lens[i] = L
        nrmx[i] = ey / L
        nrmy[i] = -ex / L
        mx = 0.5 * (verts[i, 0] + verts[j, 0])
        my = 0.5 * (verts[i, 1] + verts[j, 1])
        midm[i, 0] = 1.0
        midm[i, 1] = (mx - cx) / diam
        midm[i, 2] = (my - cy) / diam

    nd = 2 * n
    # DOF matrix of the polynomial basis
    D = np.zeros((nd, 6))
    for i in range(n):
        for a in range(3):
            D[2 * i, a] = midm[i, a]
            D[2 * i + 1, 3 + a] = midm[i, a]

    # energy projector: gradient rows plus boundary-mean rows
    G = np.zeros((6, 6))
    g = area / (diam * diam)
    G[1, 1] = g
    G[2, 2] = g
    G[4, 4] = g
    G[5, 5] = g
    for a in range(3):
        bnd = 0.0
        for i in range(n):
            bnd += lens[i] * midm[i, a]
        G[0, a] = bnd
        G[3, 3 + a] = bnd
    R = np.zeros((6, nd))
    for i in range(n):
        R[0, 2 * i] = lens[i]
        R[1, 2 * i] = lens[i] * nrmx[i] / diam
        R[2, 2 * i] = lens[i] * nrmy[i] / diam
        R[3, 2 * i + 1] = lens[i]
        R[4, 2 * i + 1] = lens[i] * nrmx[i] / diam
        R[5, 2 * i + 1] = lens[i] * nrmy[i] / diam
    P = np.linalg.solve(G, R)

    # scalar monomial moments from the cell quadrature
    Hs = np.zeros((3, 3))
    for q in range(nq):
        xi = (qpts[q, 0] - cx) / diam
        eta = (qpts[q, 1] - cy) / diam
        m0 = qwts[q]
        Hs[0, 0] += m0
        Hs[0, 1] += m0 * xi
        Hs[0, 2] += m0 * eta
        Hs[1, 1] += m0 * xi * xi
        Hs[1, 2] += m0 * xi * eta
        Hs[2, 2] += m0 * eta * eta
    Hs[1, 0] = Hs[0, 1]
    Hs[2, 0] = Hs[0, 2]
    Hs[2, 1] = Hs[1, 2]
    H = np.zeros((6, 6))
    H[0:3, 0:3] = Hs
    H[3:6, 3:6] = Hs
    P0 = np.linalg.solve(H, H @ P)

    # mean-of-gradient tensor rows (2c + j)
    Gz = np.zeros((4, nd))
    for i in range(n):
        Gz[0, 2 * i] = lens[i] * nrmx[i] / area
        Gz[1, 2 * i] = lens[i] * nrmy[i] / area
        Gz[2, 2 * i + 1] = lens[i] * nrmx[i] / area
        Gz[3, 2 * i + 1] = lens[i] * nrmy[i] / area

    # A_sym = nu (P^T G P + alpha (I - D P)^T (I - D P))
    Ghat = np.zeros((6, 6))
    Ghat[1, 1] = g
    Ghat[2, 2] = g
    Ghat[4, 4] = g
    Ghat[5, 5] = g
    cons = P.T @ (Ghat @ P)
    S = np.eye(nd) - D @ P
    A = nu * (cons + alpha * (S.T @ S))
    for i in range(nd):
        for j in range(nd):
            asym[i, j] = 0.5 * (A[i, j] + A[j, i])

    # A_skew through the beta-weighted monomial moments (factorized quadrature)
    bm0 = np.zeros(3)
    bm1 = np.zeros(3)
    for q in range(nq):
        xi = (qpts[q, 0] - cx) / diam
        eta = (qpts[q, 1] - cy) / diam
        w0 = qwts[q] * beta_vals[q, 0]
        w1 = qwts[q] * beta_vals[q, 1]
        bm0[0] += w0
        bm0[1] += w0 * xi
        bm0[2] += w0 * eta
        bm1[0] += w1
        bm1[1] += w1 * xi
        bm1[2] += w1 * eta
    Wx = np.outer(bm0, Gz[0]) + np.outer(bm1, Gz[1])
    Wy = np.outer(bm0, Gz[2]) + np.outer(bm1, Gz[3])
    T1 = P0[0:3, :].T @ Wx + P0[3:6, :].T @ Wy
    for i in range(nd):
        for j in range(nd):
            askew[i, j] = 0.5 * (T1[i, j] - T1[j, i])

    # mass and divergence row
    Mm = P0.T @ (H @ P0)
    if beta_k > 0.0:
        S0 = np.eye(nd) - D @ P0
        Mm = Mm + beta_k * diam * diam * (S0.T @ S0)
    for i in range(nd):
        for j in range(nd):
            mass[i, j] = 0.5 * (Mm[i, j] + Mm[j, i])
    for i in range(n):
        brow[2 * i] = -lens[i] * nrmx[i]
        brow[2 * i + 1] = -lens[i] * nrmy[i]


def _batch_driver(ne, verts_pad, qn, qpts_pad, qwts_pad, beta_pad,
                  nu, alpha, beta_k, asym, askew, mass, brow):
    for c in range(len(ne)):
        _cell_kernel(verts_pad[c], ne[c], qpts_pad[c], qwts_pad[c], qn[c],
                     beta_pad[c], nu, alpha, beta_k,
                     asym[c], askew[c], mass[c], brow[c])


if BACKEND == "numba":
    _cell_kernel = _njit(cache=True)(_cell_kernel)
    _batch_driver = _njit(cache=True)(_batch_driver)


def cell_quadrature_batch(mesh, degree: int):
    """Padded cell quadrature (same centroid-fan rules as polygon_rule),
    vectorized over groups of cells with equal edge counts.

    Returns (qn, qpts_pad, qwts_pad); padding entries carry zero weight.
    Cells whose centroid fan degenerates fall back to the generic rule.
    """
    from .quadrature import polygon_rule
    ref, refw = duffy_triangle_nodes(degree)
    nq_tri = len(refw)
    ne = np.array([len(c) for c in mesh.cells], dtype=np.int64)
    max_q = int(ne.max()) * nq_tri
    nc = mesh.n_cells
    qn = ne * nq_tri
    qpts = np.zeros((nc, max_q, 2))
    qwts = np.zeros((nc, max_q))
    r, s = ref[:, 0], ref[:, 1]
    for n in np.unique(ne):
        ids = np.nonzero(ne == n)[0]
        verts = np.stack([mesh.cell_vertices(k) for k in ids])       # (g, n, 2)
        apex = mesh.centroids[ids][:, None, :]                       # (g, 1, 2)
        a = verts - apex
        b = np.roll(verts, -1, axis=1) - apex
        jac = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]          # (g, n)
        ok = np.all(jac > 0.0, axis=1)
        pts = (apex[:, :, None, :] + a[:, :, None, :] * r[:, None]
               + b[:, :, None, :] * s[:, None])                      # (g, n, nq, 2)
        wts = jac[:, :, None] * refw                                 # (g, n, nq)
        qpts[ids, :n * nq_tri] = pts.reshape(len(ids), -1, 2)
        qwts[ids, :n * nq_tri] = wts.reshape(len(ids), -1)
        for k in ids[~ok]:
            rule = polygon_rule(mesh.cell_vertices(k), degree)
            qn[k] = len(rule.weights)
            qpts[k] = 0.0
            qwts[k] = 0.0
            qpts[k, :qn[k]] = rule.points
            qwts[k, :qn[k]] = rule.weights
    return qn, qpts, qwts


def batch_local_matrices(mesh, params):
    """All local matrices, padded to the largest cell.

    Returns (a_sym, a_skew, mass, b_row) with shapes (nc, 2m, 2m) and
    (nc, 2m) where m is the max edge count.
    """
    if BACKEND == "numba":
        return _batch_numba(mesh, params)
    return _batch_numpy(mesh, params)


def _pad_inputs(mesh, params):
    ne = np.array([len(c) for c in mesh.cells], dtype=np.int64)
    max_ne = int(ne.max())
    nc = mesh.n_cells
    verts_pad = np.zeros((nc, max_ne, 2))
    for k in range(nc):
        verts_pad[k, :ne[k]] = mesh.cell_vertices(k)
    qn, qpts, qwts = cell_quadrature_batch(mesh, params.quad_degree)
    beta_pad = params.beta_at(qpts.reshape(-1, 2)).reshape(qpts.shape)
    return ne, max_ne, verts_pad, qn, qpts, qwts, beta_pad


def _batch_numba(mesh, params):
    ne, max_ne, verts_pad, qn, qpts, qwts, beta_pad = _pad_inputs(mesh, params)
    nc = mesh.n_cells
    nd = 2 * max_ne
    asym = np.zeros((nc, nd, nd))
    askew = np.zeros((nc, nd, nd))
    mass = np.zeros((nc, nd, nd))
    brow = np.zeros((nc, nd))
    _batch_driver(ne, verts_pad, qn, qpts, qwts, beta_pad,
                  float(params.nu), float(params.alpha), float(params.beta_k),
                  asym, askew, mass, brow)
    return asym, askew, mass, brow


def _batch_numpy(mesh, params):
    from .elements import Cell, build_local
    ne = np.array([len(c) for c in mesh.cells], dtype=np.int64)
    nd = 2 * int(ne.max())
    nc = mesh.n_cells
    asym = np.zeros((nc, nd, nd))
    askew = np.zeros((nc, nd, nd))
    mass = np.zeros((nc, nd, nd))
    brow = np.zeros((nc, nd))
    for k in range(nc):
        loc = build_local(Cell.from_mesh(mesh, k), params.nu, params.beta_at,
                          params.alpha, params.beta_k, params.quad_degree)
        m = 2 * ne[k]
        asym[k, :m, :m] = loc.a_sym
        askew[k, :m, :m] = loc.a_skew
        mass[k, :m, :m] = loc.mass
        brow[k, :m] = loc.b_row
    return asym, askew, mass, brow
