from .core import (CellGeometry, DIRICHLET, INTERIOR, MeshError, NEUMANN,
                   PolygonalMesh, RegularityReport, check_regularity,
                   kernel_inradius)
from .generators import (BIUNIT_SQUARE, UNIT_SQUARE, generate_hexagonal,
                         generate_lshape, generate_square_grid,
                         generate_trapezoidal, generate_voronoi)
from .io import export_mesh, import_mesh

__all__ = [
    "CellGeometry", "DIRICHLET", "INTERIOR", "MeshError", "NEUMANN",
    "PolygonalMesh", "RegularityReport", "check_regularity", "kernel_inradius",
    "BIUNIT_SQUARE", "UNIT_SQUARE", "generate_hexagonal", "generate_lshape",
    "generate_square_grid", "generate_trapezoidal", "generate_voronoi",
    "export_mesh", "import_mesh",
]
