"""Mesh import/export: JSON (canonical) and OFF-style polygon lists."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import NEUMANN, MeshError, PolygonalMesh


def export_mesh(mesh: PolygonalMesh, path, fmt: str = "json") -> None:
    """Write a mesh to disk.  JSON is the round-trippable format."""
    path = Path(path)
    if fmt == "json":
        neumann = [[int(a), int(b)] for e, (a, b) in enumerate(mesh.edges)
                   if mesh.boundary_tags[e] == NEUMANN]
        doc = {
            "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
            "cells": [[int(v) for v in c] for c in mesh.cells],
            "boundary": {"neumann_edges": neumann},
            "refinement_label": mesh.refinement_label,
        }
        path.write_text(json.dumps(doc, indent=1))
    elif fmt == "off":
        lines = ["OFF", f"{len(mesh.vertices)} {mesh.n_cells} {mesh.n_edges}"]
        lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices]
        lines += [f"{len(c)} " + " ".join(str(int(v)) for v in c) for c in mesh.cells]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise MeshError(f"unknown mesh format {fmt!r}")


def import_mesh(path, fmt: str | None = None) -> PolygonalMesh:
    """Read a mesh written by export_mesh (or a plain OFF polygon list)."""
    path = Path(path)
    if fmt is None:
        fmt = "off" if path.suffix.lower() == ".off" else "json"
    if fmt == "json":
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise MeshError(f"{path}:{err.lineno}: {err.msg}") from None
        for key in ("vertices", "cells"):
            if key not in doc:
                raise MeshError(f"{path}: missing '{key}'")
        neumann = doc.get("boundary", {}).get("neumann_edges", [])
        return PolygonalMesh(np.asarray(doc["vertices"], dtype=float),
                             doc["cells"], neumann_edges=neumann,
                             refinement_label=doc.get("refinement_label", 1))
    if fmt == "off":
        return _import_off(path)
    raise MeshError(f"unknown mesh format {fmt!r}")


def _import_off(path: Path) -> PolygonalMesh:
    lines = path.read_text().splitlines()
    rows = [(i + 1, ln.split("#")[0].strip()) for i, ln in enumerate(lines)]
    rows = [(no, ln) for no, ln in rows if ln]
    if not rows or rows[0][1].upper() != "OFF":
        lineno = rows[0][0] if rows else 1
        raise MeshError(f"{path}:{lineno}: expected OFF header")
    try:
        counts = rows[1][1].split()
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise MeshError(f"{path}:{rows[1][0]}: malformed count line") from None
    if len(rows) < 2 + nv + nf:
        raise MeshError(f"{path}: truncated file ({len(rows) - 2} rows for "
                        f"{nv} vertices + {nf} cells)")
    verts = np.empty((nv, 2))
    for i in range(nv):
        no, ln = rows[2 + i]
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise MeshError(f"{path}:{no}: expected 2 or 3 coordinates")
        try:
            verts[i] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise MeshError(f"{path}:{no}: bad coordinate") from None
    cells = []
    for i in range(nf):
        no, ln = rows[2 + nv + i]
        parts = ln.split()
        try:
            count = int(parts[0])
            cell = [int(p) for p in parts[1:1 + count]]
        except (IndexError, ValueError):
            raise MeshError(f"{path}:{no}: malformed cell row") from None
        if len(cell) != count:
            raise MeshError(f"{path}:{no}: cell row promises {count} vertices")
        cells.append(cell)
    return PolygonalMesh(verts, cells)
