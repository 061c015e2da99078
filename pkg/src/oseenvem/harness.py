"""Experiment drivers: convergence tables with rate fitting, stabilization
sweeps, manufactured-solution rate checks, and CSV/JSON report emission.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import OseenParameters, assemble, interpolate
from .eigen import EigenResult, solve_gevp, solve_source
from .elements import Cell, build_pi_nabla, build_pi_zero
from .mesh import (PolygonalMesh, generate_hexagonal, generate_lshape,
                   generate_square_grid, generate_trapezoidal, generate_voronoi)
from .quadrature import polygon_rule

UNIT = (0.0, 0.0, 1.0, 1.0)
BIUNIT = (-1.0, -1.0, 1.0, 1.0)

TABLE1_REFERENCES = (13.6096, 23.1297, 23.4230, 32.2981)
TABLE2_REFERENCES = (33.0306, 37.1106, 42.4023, 49.2552)

DEFAULT_ALPHA_SWEEP = (1 / 32, 1 / 16, 1 / 4, 1.0, 4.0, 16.0, 32.0)
DEFAULT_BETA_K_SWEEP = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)

NEAR_REAL = 1e-8


class HarnessError(Exception):
    pass


# -- rate fitting -------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of lambda(h) ~ lambda_extr + C h^alpha."""

    lambda_extr: float
    c: float
    alpha: float
    residual: float
    alpha_reliable: bool
    monotone: bool


def _fit_at(alpha: float, h: np.ndarray, lam: np.ndarray):
    X = np.column_stack([np.ones_like(h), h**alpha])
    coef, *_ = np.linalg.lstsq(X, lam, rcond=None)
    r = lam - X @ coef
    return float(r @ r), coef


def fit_rate(h_list, lam_list, alpha_range=(0.5, 4.0), grid: int = 176) -> RateFit:
    """Fit the extrapolation model by scanning the rate exponent and solving
    the linear subproblem exactly at each candidate, then refining the best
    bracket by golden section."""
    h = np.asarray(h_list, dtype=float)
    lam = np.asarray(lam_list)
    if len(h) != len(lam):
        raise HarnessError("h and lambda lists differ in length")
    if len(h) < 3:
        raise HarnessError("rate fitting needs at least 3 mesh levels")
    if np.iscomplexobj(lam):
        lam = np.where(np.abs(lam.imag) < NEAR_REAL, lam.real, np.abs(lam))
        lam = lam.real.astype(float)

    alphas = np.linspace(alpha_range[0], alpha_range[1], grid)
    ssrs = np.array([_fit_at(a, h, lam)[0] for a in alphas])
    i = int(np.argmin(ssrs))
    lo = alphas[max(i - 1, 0)]
    hi = alphas[min(i + 1, len(alphas) - 1)]
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1, _ = _fit_at(c1, h, lam)
    f2, _ = _fit_at(c2, h, lam)
    for _ in range(80):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1, _ = _fit_at(c1, h, lam)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2, _ = _fit_at(c2, h, lam)
        if b - a < 1e-12:
            break
    alpha = 0.5 * (a + b)
    ssr, coef = _fit_at(alpha, h, lam)
    diffs = np.diff(lam)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    spread = float(lam.max() - lam.min())
    scale = max(1.0, float(np.abs(lam).max()))
    reliable = spread > 1e-10 * scale
    if not reliable:
        return RateFit(float(np.mean(lam)), 0.0, float(alpha), ssr, False, monotone)
    return RateFit(float(coef[0]), float(coef[1]), float(alpha), ssr, True, monotone)


def fit_error_rate(h_list, err_list) -> float:
    """Log-log slope for quantities converging to zero."""
    h = np.asarray(h_list, dtype=float)
    e = np.asarray(err_list, dtype=float)
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


# -- configuration ------------------------------------------------------------

SIDE_PREDICATES = {
    "left": lambda b: (lambda x, y: abs(x - b[0]) < 1e-12),
    "bottom": lambda b: (lambda x, y: abs(y - b[1]) < 1e-12),
    "right": lambda b: (lambda x, y: abs(x - b[2]) < 1e-12),
    "top": lambda b: (lambda x, y: abs(y - b[3]) < 1e-12),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully pinned description of one experiment run."""

    experiment: str
    mesh_family: str = "quad"
    n_list: tuple = (8, 16, 32, 64)
    nu: float = 1.0
    beta: object = (1.0, 0.0)
    alpha: float = 1.0
    beta_k: float = 0.0
    alpha_list: tuple = DEFAULT_ALPHA_SWEEP
    beta_k_list: tuple = DEFAULT_BETA_K_SWEEP
    bc: str = "clamped"
    domain: tuple = BIUNIT
    dirichlet_sides: tuple = ("bottom",)   # mixed case only
    nev: int = 10
    track: int = 4
    seed: int = 0
    shift: float = 1.0
    references: tuple | None = None
    adjoint_check: bool = True
    out_dir: str | None = None

    def __post_init__(self):
        if len(self.n_list) == 0:
            raise HarnessError("n_list must be non-empty")
        if any(b >= a for a, b in zip(self.n_list[1:], self.n_list)):
            raise HarnessError("n_list must be strictly increasing")
        if self.experiment == "spurious" and len(self.alpha_list) == 0:
            raise HarnessError("alpha_list must be non-empty")
        if self.experiment == "mass-stab" and len(self.beta_k_list) == 0:
            raise HarnessError("beta_k_list must be non-empty")

    @classmethod
    def for_experiment(cls, name: str, **overrides) -> "ExperimentConfig":
        defaults = {
            "table1": dict(mesh_family="quad", n_list=(8, 16, 32, 64),
                           domain=BIUNIT, bc="clamped",
                           references=TABLE1_REFERENCES),
            "table2": dict(mesh_family="lshape5", n_list=(16, 32, 64),
                           bc="clamped", references=TABLE2_REFERENCES),
            "spurious": dict(mesh_family="trap", n_list=(16,), domain=UNIT,
                             bc="mixed"),
            "mass-stab": dict(mesh_family="quad", n_list=(32, 64),
                              domain=BIUNIT, bc="clamped"),
            "source": dict(mesh_family="quad", n_list=(8, 16, 32, 64),
                           domain=UNIT, bc="clamped"),
        }
        if name not in defaults:
            raise HarnessError(f"unknown experiment {name!r}")
        kw = defaults[name] | overrides
        return cls(experiment=name, **kw)


def make_mesh(config: ExperimentConfig, n: int) -> PolygonalMesh:
    fam = config.mesh_family
    if fam == "quad":
        mesh = generate_square_grid(n, config.domain)
    elif fam == "trap":
        mesh = generate_trapezoidal(n, config.domain)
    elif fam == "hex":
        mesh = generate_hexagonal(n, config.domain)
    elif fam == "voronoi":
        mesh = generate_voronoi(n, config.domain, seed=config.seed)
    elif fam == "lshape5":
        mesh = generate_lshape(n, "structured")
    elif fam == "lshape6":
        mesh = generate_lshape(n, "voronoi", seed=config.seed)
    else:
        raise HarnessError(f"unknown mesh family {fam!r}")
    if config.bc == "mixed":
        preds = [SIDE_PREDICATES[s](config.domain) for s in config.dirichlet_sides]
        mesh = mesh.with_neumann(lambda x, y: not any(p(x, y) for p in preds))
    return mesh


def _params(config: ExperimentConfig, alpha=None, beta_k=None) -> OseenParameters:
    return OseenParameters(nu=config.nu, beta=config.beta,
                           alpha=config.alpha if alpha is None else alpha,
                           beta_k=config.beta_k if beta_k is None else beta_k,
                           bc=config.bc)


def _representative(lam: np.ndarray) -> np.ndarray:
    """Collapse conjugate pairs (keep the non-negative imaginary member) and
    report real parts for near-real eigenvalues, moduli otherwise."""
    keep = []
    for z in lam:
        if z.imag < -NEAR_REAL * max(1.0, abs(z)):
            if any(abs(np.conjugate(z) - w) <= 1e-7 * max(1.0, abs(z)) for w in keep):
                continue
        keep.append(z)
    return np.array([z.real if abs(z.imag) < NEAR_REAL * max(1.0, abs(z)) else abs(z)
                     for z in keep])


def _conjugate_match_error(lam_a: np.ndarray, lam_b: np.ndarray) -> float:
    """Greedy match of one spectrum against the conjugate of another."""
    avail = list(np.conjugate(lam_b))
    worst = 0.0
    for z in lam_a:
        j = int(np.argmin([abs(z - w) for w in avail]))
        worst = max(worst, abs(z - avail[j]) / max(1.0, abs(z)))
        avail.pop(j)
    return worst


# -- convergence studies ------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    experiment: str
    mesh_family: str
    n_list: tuple
    tracked: np.ndarray          # (track, len(n_list)) representative values
    fits: tuple                  # RateFit per tracked eigenvalue
    references: tuple | None
    adjoint_errors: tuple        # per mesh level (empty if check disabled)
    max_div_residual: float
    max_solver_residual: float

    def to_dict(self) -> dict:
        rows = []
        for i, fit in enumerate(self.fits):
            row = {
                "eigenvalue": i + 1,
                "values": [float(v) for v in self.tracked[i]],
                "order": fit.alpha if fit.alpha_reliable else None,
                "extr": fit.lambda_extr,
                "fit_residual": fit.residual,
                "monotone": fit.monotone,
                "reference": (None if self.references is None or
                              i >= len(self.references) else self.references[i]),
            }
            rows.append(row)
        return {
            "experiment": self.experiment,
            "mesh_family": self.mesh_family,
            "n_list": list(self.n_list),
            "rows": rows,
            "adjoint_errors": [float(e) for e in self.adjoint_errors],
            "max_div_residual": self.max_div_residual,
            "max_solver_residual": self.max_solver_residual,
        }

    def csv_lines(self) -> list[str]:
        header = ["lambda_i"] + [f"N{n}" for n in self.n_list] + \
                 ["order", "extr", "reference"]
        lines = [",".join(header)]
        for i, fit in enumerate(self.fits):
            ref = ("" if self.references is None or i >= len(self.references)
                   else _fmt(self.references[i]))
            order = _fmt(fit.alpha) if fit.alpha_reliable else "n/a"
            vals = [_fmt(v) for v in self.tracked[i]]
            lines.append(",".join([f"lambda_{i+1}"] + vals +
                                  [order, _fmt(fit.lambda_extr), ref]))
        return lines


def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Eigenvalue table over the mesh sequence with per-eigenvalue rate fits."""
    nev = max(config.nev, config.track + 2)
    values = []
    adjoint_errors = []
    max_div = 0.0
    max_res = 0.0
    for n in config.n_list:
        mesh = make_mesh(config, n)
        pencil = assemble(mesh, _params(config))
        res = solve_gevp(pencil, m=nev, shift=config.shift)
        if res.n_found < config.track:
            raise HarnessError(f"only {res.n_found} eigenvalues found at N={n}")
        reps = _representative(res.eigenvalues)
        values.append(reps[:config.track])
        max_div = max(max_div, float(res.div_residuals.max()))
        max_res = max(max_res, float(res.residuals.max()))
        if config.adjoint_check:
            adj = solve_gevp(pencil.adjoint(), m=nev, shift=config.shift)
            k = min(res.n_found, adj.n_found)
            adjoint_errors.append(
                _conjugate_match_error(res.eigenvalues[:k], adj.eigenvalues[:k]))
    tracked = np.array(values).T   # (track, levels)
    h = 1.0 / np.asarray(config.n_list, dtype=float)
    fits = tuple(fit_rate(h, tracked[i]) for i in range(config.track))
    return ConvergenceReport(config.experiment, config.mesh_family, tuple(config.n_list),
                             tracked, fits, config.references,
                             tuple(adjoint_errors), max_div, max_res)


# -- stabilization sweeps -----------------------------------------------------

@dataclass(frozen=True)
class SpuriousSweepReport:
    mesh_family: str
    alpha_list: tuple
    n_list: tuple
    eigenvalues: dict            # (n, alpha) -> list of representative values
    floors: dict                 # n -> 0.8 * lambda_1(alpha=1)
    flagged: dict                # (n, alpha) -> count below floor

    def counts_below(self, threshold: float) -> dict:
        return {key: int(np.sum(np.asarray(vals) < threshold))
                for key, vals in self.eigenvalues.items()}

    def to_dict(self) -> dict:
        return {
            "mesh_family": self.mesh_family,
            "alpha_list": list(self.alpha_list),
            "n_list": list(self.n_list),
            "floors": {str(n): self.floors[n] for n in self.n_list},
            "tables": {
                str(n): {_alpha_label(a): [float(v) for v in self.eigenvalues[(n, a)]]
                         for a in self.alpha_list}
                for n in self.n_list
            },
            "flagged": {str(n): {_alpha_label(a): self.flagged[(n, a)]
                                 for a in self.alpha_list}
                        for n in self.n_list},
        }

    def csv_lines(self, n: int) -> list[str]:
        header = ["i"] + [f"alpha={_alpha_label(a)}" for a in self.alpha_list]
        lines = [",".join(header)]
        depth = max(len(self.eigenvalues[(n, a)]) for a in self.alpha_list)
        for i in range(depth):
            row = [str(i + 1)]
            for a in self.alpha_list:
                vals = self.eigenvalues[(n, a)]
                row.append(_fmt(vals[i]) if i < len(vals) else "")
            lines.append(",".join(row))
        return lines


def _alpha_label(a: float) -> str:
    if a < 1.0 and abs(round(1.0 / a) - 1.0 / a) < 1e-12:
        return f"1/{round(1.0/a)}"
    return f"{a:g}"


def run_spurious_sweep(config: ExperimentConfig) -> SpuriousSweepReport:
    """First nev eigenvalues per stabilization parameter, with eigenvalues
    below the physical floor flagged as spurious.

    The floor is 0.8 times the first eigenvalue computed at alpha = 1 on the
    same mesh (the alpha = 1 spectrum is stable, so it anchors the scale).
    """
    if config.bc != "mixed":
        raise HarnessError("the spurious study is a mixed-boundary experiment")
    eigenvalues = {}
    floors = {}
    flagged = {}
    for n in config.n_list:
        mesh = make_mesh(config, n)
        anchor = solve_gevp(assemble(mesh, _params(config, alpha=1.0)),
                            m=config.nev, shift=config.shift)
        lam1 = float(_representative(anchor.eigenvalues)[0])
        floors[n] = 0.8 * lam1
        for a in config.alpha_list:
            if a == 1.0:
                res = anchor
            else:
                res = solve_gevp(assemble(mesh, _params(config, alpha=a)),
                                 m=config.nev, shift=config.shift)
            reps = _representative(res.eigenvalues)[:config.nev]
            eigenvalues[(n, a)] = reps
            flagged[(n, a)] = int(np.sum(reps < floors[n]))
    return SpuriousSweepReport(config.mesh_family, tuple(config.alpha_list),
                               tuple(config.n_list), eigenvalues, floors, flagged)


@dataclass(frozen=True)
class MassStabReport:
    mesh_family: str
    beta_k_list: tuple
    n_list: tuple
    eigenvalues: dict            # (n, beta_k) -> representative values

    def to_dict(self) -> dict:
        return {
            "mesh_family": self.mesh_family,
            "beta_k_list": [float(b) for b in self.beta_k_list],
            "n_list": list(self.n_list),
            "tables": {
                str(n): {f"{b:g}": [float(v) for v in self.eigenvalues[(n, b)]]
                         for b in self.beta_k_list}
                for n in self.n_list
            },
        }

    def csv_lines(self, n: int) -> list[str]:
        header = ["i"] + [f"beta_k={b:g}" for b in self.beta_k_list]
        lines = [",".join(header)]
        depth = max(len(self.eigenvalues[(n, b)]) for b in self.beta_k_list)
        for i in range(depth):
            row = [str(i + 1)]
            for b in self.beta_k_list:
                vals = self.eigenvalues[(n, b)]
                row.append(_fmt(vals[i]) if i < len(vals) else "")
            lines.append(",".join(row))
        return lines


def run_mass_stab_sweep(config: ExperimentConfig) -> MassStabReport:
    """First nev eigenvalues per right-hand-side stabilization weight."""
    eigenvalues = {}
    for n in config.n_list:
        mesh = make_mesh(config, n)
        for b in config.beta_k_list:
            res = solve_gevp(assemble(mesh, _params(config, beta_k=b)),
                             m=config.nev, shift=config.shift)
            eigenvalues[(n, b)] = _representative(res.eigenvalues)[:config.nev]
    return MassStabReport(config.mesh_family, tuple(config.beta_k_list),
                          tuple(config.n_list), eigenvalues)


# -- manufactured source study ------------------------------------------------

def _bubble(t):
    return t * t * (1.0 - t) ** 2


def _bubble1(t):
    return 2.0 * t - 6.0 * t**2 + 4.0 * t**3


def _bubble2(t):
    return 2.0 - 12.0 * t + 12.0 * t**2


def _bubble3(t):
    return -12.0 + 24.0 * t


def manufactured_velocity(pts: np.ndarray) -> np.ndarray:
    """Divergence-free field curl(g(x) g(y)) with g the quartic edge bubble."""
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([_bubble(x) * _bubble1(y), -_bubble1(x) * _bubble(y)])


def manufactured_velocity_grad(pts: np.ndarray) -> np.ndarray:
    """(n, 2, 2) gradient tensors, rows = components."""
    x, y = pts[:, 0], pts[:, 1]
    out = np.empty((len(pts), 2, 2))
    out[:, 0, 0] = _bubble1(x) * _bubble1(y)
    out[:, 0, 1] = _bubble(x) * _bubble2(y)
    out[:, 1, 0] = -_bubble2(x) * _bubble(y)
    out[:, 1, 1] = -_bubble1(x) * _bubble1(y)
    return out


def manufactured_pressure(pts: np.ndarray) -> np.ndarray:
    return pts[:, 0] - 0.5


def manufactured_load(pts: np.ndarray) -> np.ndarray:
    """-laplace(u) + du/dx + grad(p) for the manufactured pair (nu=1, beta=(1,0))."""
    x, y = pts[:, 0], pts[:, 1]
    f1 = (-_bubble2(x) * _bubble1(y) - _bubble(x) * _bubble3(y)
          + _bubble1(x) * _bubble1(y) + 1.0)
    f2 = (_bubble3(x) * _bubble(y) + _bubble1(x) * _bubble2(y)
          - _bubble2(x) * _bubble(y))
    return np.column_stack([f1, f2])


@dataclass(frozen=True)
class SourceReport:
    n_list: tuple
    err_h1: tuple
    err_l2: tuple
    err_p: tuple
    rate_h1: float
    rate_l2: float
    rate_p: float

    def to_dict(self) -> dict:
        return {
            "n_list": list(self.n_list),
            "err_h1": [float(e) for e in self.err_h1],
            "err_l2": [float(e) for e in self.err_l2],
            "err_p": [float(e) for e in self.err_p],
            "rate_h1": self.rate_h1,
            "rate_l2": self.rate_l2,
            "rate_p": self.rate_p,
        }

    def csv_lines(self) -> list[str]:
        lines = ["N,h,err_h1,err_l2,err_p"]
        for i, n in enumerate(self.n_list):
            lines.append(",".join([str(n), _fmt(1.0 / n), _fmt(self.err_h1[i]),
                                   _fmt(self.err_l2[i]), _fmt(self.err_p[i])]))
        lines.append(",".join(["rate", "", _fmt(self.rate_h1),
                               _fmt(self.rate_l2), _fmt(self.rate_p)]))
        return lines


def projection_errors(mesh: PolygonalMesh, pencil, u_red: np.ndarray,
                      p_vec: np.ndarray, degree: int = 14):
    """Broken-H1, L2, and pressure errors of a discrete solution, measured
    through the computable projections of the virtual velocity."""
    numbering = pencil.numbering
    u_full = numbering.expand(u_red)
    err_h1 = 0.0
    err_l2 = 0.0
    err_p = 0.0
    for k in range(mesh.n_cells):
        cell = Cell.from_mesh(mesh, k)
        edges = mesh.cell_edges[k]
        dofs = np.empty(2 * len(edges))
        dofs[0::2] = u_full[2 * edges]
        dofs[1::2] = u_full[2 * edges + 1]
        p_nabla = build_pi_nabla(cell)
        s = p_nabla @ dofs
        s0 = build_pi_zero(cell, p_nabla=p_nabla) @ dofs
        grad_proj = np.array([[s[1], s[2]], [s[4], s[5]]]) / cell.diameter
        rule = polygon_rule(cell.verts, degree)
        gexact = manufactured_velocity_grad(rule.points)
        err_h1 += rule.weights @ ((gexact - grad_proj) ** 2).sum(axis=(1, 2))
        mv = cell.basis.eval(rule.points)
        uproj = np.column_stack([mv @ s0[0:3], mv @ s0[3:6]])
        uexact = manufactured_velocity(rule.points)
        err_l2 += rule.weights @ ((uexact - uproj) ** 2).sum(axis=1)
        perr = manufactured_pressure(rule.points) - p_vec[k]
        err_p += rule.weights @ perr**2
    return np.sqrt(err_h1), np.sqrt(err_l2), np.sqrt(err_p)


def run_source_convergence(config: ExperimentConfig) -> SourceReport:
    """Manufactured-solution study for the discrete source problem."""
    errs_h1, errs_l2, errs_p = [], [], []
    for n in config.n_list:
        mesh = make_mesh(config, n)
        pencil = assemble(mesh, _params(config))
        sol = solve_source(pencil, manufactured_load)
        e1, e2, e3 = projection_errors(mesh, pencil, sol.u, sol.p)
        errs_h1.append(e1)
        errs_l2.append(e2)
        errs_p.append(e3)
    h = [1.0 / n for n in config.n_list]
    return SourceReport(tuple(config.n_list), tuple(errs_h1), tuple(errs_l2),
                        tuple(errs_p), fit_error_rate(h, errs_h1),
                        fit_error_rate(h, errs_l2), fit_error_rate(h, errs_p))


# -- emission -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_report(report, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write a report to disk; returns the created paths (deterministic)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = {
        ConvergenceReport: "convergence",
        SpuriousSweepReport: "spurious",
        MassStabReport: "mass_stab",
        SourceReport: "source",
    }[type(report)]
    created = []
    if "json" in formats:
        path = out / f"{stem}.json"
        path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True))
        created.append(path)
    if "csv" in formats:
        if isinstance(report, (SpuriousSweepReport, MassStabReport)):
            for n in report.n_list:
                path = out / f"{stem}_N{n}.csv"
                path.write_text("\n".join(report.csv_lines(n)) + "\n")
                created.append(path)
        else:
            path = out / f"{stem}.csv"
            path.write_text("\n".join(report.csv_lines()) + "\n")
            created.append(path)
    return created


def run_experiment(config: ExperimentConfig):
    """Dispatch a configured experiment and optionally emit its report."""
    runners = {
        "table1": run_convergence,
        "table2": run_convergence,
        "spurious": run_spurious_sweep,
        "mass-stab": run_mass_stab_sweep,
        "source": run_source_convergence,
    }
    if config.experiment not in runners:
        raise HarnessError(f"unknown experiment {config.experiment!r}")
    report = runners[config.experiment](config)
    if config.out_dir:
        emit_report(report, config.out_dir)
    return report
