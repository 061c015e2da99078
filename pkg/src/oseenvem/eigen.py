"""Solvers for the nonsymmetric generalized eigenproblem and the saddle-point
source systems.

The pencil's right matrix is singular (pressure and multiplier rows carry no
mass), so its spectrum mixes finite physical eigenvalues with infinite
constraint modes.  The shift-invert transform maps the finite ones near the
shift to the dominant Ritz values and the infinite ones to zero, after which
they are filtered explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GlobalPencil, load_vector

INFINITE_EIGENVALUE_CUTOFF = 1e8
MASS_KERNEL_CUTOFF = 1e-12
DENSE_THRESHOLD = 600


class EigenSolverError(Exception):
    pass


@dataclass(frozen=True)
class EigenResult:
    """Finite eigenpairs sorted by ascending modulus, with diagnostics."""

    eigenvalues: np.ndarray        # (m,) complex
    vectors_u: np.ndarray          # (n_velocity, m) complex
    vectors_p: np.ndarray          # (n_pressure, m) complex
    residuals: np.ndarray          # ||A x - lambda M x|| / ||M x||
    div_residuals: np.ndarray      # ||B u|| / ||u||
    method: str                    # "qz" or "shift-invert"
    shift: complex

    @property
    def n_found(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "residuals": [float(r) for r in self.residuals],
            "div_residuals": [float(r) for r in self.div_residuals],
            "method": self.method,
            "shift": [float(np.real(self.shift)), float(np.imag(self.shift))],
        }


def _postprocess(pencil: GlobalPencil, lam: np.ndarray, vecs: np.ndarray,
                 m: int, shift, method: str) -> EigenResult:
    lhs = pencil.lhs()
    rhs = pencil.rhs()
    finite = np.isfinite(lam) & (np.abs(lam) < INFINITE_EIGENVALUE_CUTOFF)
    mx = rhs @ vecs
    mx_norm = np.linalg.norm(mx, axis=0)
    x_norm = np.linalg.norm(vecs, axis=0)
    finite &= mx_norm > MASS_KERNEL_CUTOFF * np.maximum(x_norm, 1e-300)
    lam, vecs = lam[finite], vecs[:, finite]
    mx = mx[:, finite]
    order = np.lexsort((-lam.imag, np.abs(lam)))
    lam, vecs, mx = lam[order], vecs[:, order], mx[:, order]
    # keep m eigenvalues but never split a conjugate pair
    keep = min(m, len(lam))
    while keep < len(lam) and abs(lam[keep].imag) > 0 and \
            abs(lam[keep] - lam[keep - 1].conjugate()) <= 1e-8 * max(1.0, abs(lam[keep])):
        keep += 1
    lam, vecs, mx = lam[:keep], vecs[:, :keep], mx[:, :keep]
    res = np.array([np.linalg.norm(lhs @ vecs[:, i] - lam[i] * mx[:, i])
                    / max(np.linalg.norm(mx[:, i]), 1e-300)
                    for i in range(len(lam))])
    us, ps = [], []
    divres = np.empty(len(lam))
    for i in range(len(lam)):
        u, p, _ = pencil.split(vecs[:, i])
        us.append(u)
        ps.append(p)
        divres[i] = np.linalg.norm(pencil.b @ u) / max(np.linalg.norm(u), 1e-300)
    vu = np.column_stack(us) if us else np.zeros((pencil.numbering.n_velocity, 0))
    vp = np.column_stack(ps) if ps else np.zeros((pencil.numbering.n_pressure, 0))
    return EigenResult(lam, vu, vp, res, divres, method, shift)


def solve_gevp(pencil: GlobalPencil, m: int = 10, shift: float = 1.0,
               tol: float = 1e-8, dense_threshold: int = DENSE_THRESHOLD,
               force_dense: bool = False) -> EigenResult:
    """The m finite eigenvalues nearest the shift.

    Uses dense QZ below `dense_threshold` unknowns, otherwise shift-invert
    Arnoldi on (A - shift M)^-1 M with a sparse factorization; the shift is
    perturbed and the factorization retried up to three times.
    """
    lhs = pencil.lhs().tocsc()
    rhs = pencil.rhs().tocsc()
    n = lhs.shape[0]
    if force_dense or n <= dense_threshold:
        lam, vecs = sla.eig(lhs.toarray(), rhs.toarray())
        result = _postprocess(pencil, lam, vecs, m, shift, "qz")
    else:
        result = _shift_invert(pencil, lhs, rhs, m, shift, tol)
    bad = result.residuals > tol
    if np.any(bad):
        raise EigenSolverError(
            f"eigensolver did not converge: residuals {result.residuals[bad]}")
    return result


def _shift_invert(pencil, lhs, rhs, m, shift, tol) -> EigenResult:
    n = lhs.shape[0]
    k = min(m + 8, n - 2)
    ncv = min(n, max(3 * k, k + 20))
    sigma = shift
    last_err = None
    for attempt in range(3):
        try:
            lu = spla.splu((lhs - sigma * rhs).tocsc())
        except RuntimeError as err:
            last_err = err
            sigma = sigma * 1.07 + 0.013
            continue
        op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(rhs @ x),
                                 dtype=np.float64)
        try:
            w, v = spla.eigs(op, k=k, which="LM", ncv=ncv, tol=0,
                             maxiter=3000 * k)
        except spla.ArpackNoConvergence as err:
            if len(err.eigenvalues) >= m:
                w, v = err.eigenvalues, err.eigenvectors
            else:
                last_err = err
                sigma = sigma * 1.07 + 0.013
                continue
        good = np.abs(w) > 1e-14
        lam = np.full(len(w), np.inf, dtype=complex)
        lam[good] = sigma + 1.0 / w[good]
        return _postprocess(pencil, lam, v, m, sigma, "shift-invert")
    raise EigenSolverError(f"shift-invert failed after 3 shifts: {last_err}")


@dataclass(frozen=True)
class SourceSolution:
    u: np.ndarray
    p: np.ndarray
    multiplier: float | None
    div_residual: float


def solve_source(pencil: GlobalPencil, f_field) -> SourceSolution:
    """Direct sparse solve of the saddle-point source problem for a load
    field f; the load enters through its cellwise L2 projection."""
    rhs = load_vector(pencil, f_field)
    lhs = pencil.lhs().tocsc()
    try:
        x = spla.spsolve(lhs, rhs)
    except RuntimeError as err:
        raise EigenSolverError(
            f"singular saddle-point system (missing pressure constraint?): {err}"
        ) from None
    if not np.all(np.isfinite(x)):
        raise EigenSolverError(
            "singular saddle-point system (missing pressure constraint?)")
    u, p, mult = pencil.split(x)
    div = float(np.linalg.norm(pencil.b @ u) / max(np.linalg.norm(u), 1e-300))
    return SourceSolution(u, p, None if mult is None else float(mult), div)
