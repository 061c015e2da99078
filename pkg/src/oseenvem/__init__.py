"""Nonconforming virtual element solver for the 2D Oseen eigenvalue problem."""

from .assembly import (AssemblyError, DofNumbering, GlobalPencil,
                       OseenParameters, assemble, assemble_adjoint,
                       export_triplets, interpolate, load_vector)
from .eigen import (EigenResult, EigenSolverError, SourceSolution, solve_gevp,
                    solve_source)
from .elements import (Cell, LocalDofMap, LocalMatrices, build_local,
                       build_pi_nabla, build_pi_zero, build_pi_zero_grad,
                       local_div, local_mass, local_skew, local_sym)
from .harness import (ConvergenceReport, ExperimentConfig, MassStabReport,
                      RateFit, SourceReport, SpuriousSweepReport, emit_report,
                      fit_rate, run_convergence, run_experiment,
                      run_mass_stab_sweep, run_source_convergence,
                      run_spurious_sweep)
from .mesh import (CellGeometry, MeshError, PolygonalMesh, RegularityReport,
                   check_regularity, export_mesh, generate_hexagonal,
                   generate_lshape, generate_square_grid, generate_trapezoidal,
                   generate_voronoi, import_mesh)
from .quadrature import (QuadratureRule, ScaledMonomialBasis, edge_rule,
                         monomial_moments, polygon_rule)

__version__ = "0.1.0"
