"""Set metrics and plain-text tables for designs."""

from __future__ import annotations

import numpy as np

from .errors import RpiSynthError
from .polyhedra import HPolyhedron, enumerate_vertices, hull_volume, polygon, project, volume

TABLE_COLUMNS = ("Λ Volume", "Λ Projection Area", "Λ⁰ Volume", "Λ⁰ Projection Area", "[K K̄ K̂]")


def _safe(fn):
    try:
        return float(fn())
    except RpiSynthError:
        return None


def projection_polygon(poly, dims=(0, 1)):
    """Counter-clockwise vertices of the projection of ``poly`` onto ``dims``."""
    if poly.dim == 2 and tuple(dims) == (0, 1):
        return polygon(poly)
    return polygon(project(poly, list(dims)))


def set_metrics(L, rho):
    """Volumes and ``(x1, x2)`` projection areas of the outer and inner sets.

    Entries are ``None`` where the geometry routines do not apply
    (dimension above four, or more than two coordinates to eliminate).
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    rho = np.asarray(rho, dtype=float).ravel()
    outer = HPolyhedron(L)
    out = {"lambda_volume": _safe(lambda: volume(outer))}
    out["lambda_projection_area"] = _safe(lambda: hull_volume(projection_polygon(outer)))
    if np.all(rho > 1e-12):
        inner = HPolyhedron(L, rho)
        out["lambda0_volume"] = _safe(lambda: volume(inner))
        out["lambda0_projection_area"] = _safe(lambda: hull_volume(projection_polygon(inner)))
    else:
        out["lambda0_volume"] = 0.0
        out["lambda0_projection_area"] = 0.0
    return out


def boundary_files(L, rho):
    """Text contents of vertex-list files for external plotting (by file name)."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    rho = np.asarray(rho, dtype=float).ravel()
    sets = {"lambda": HPolyhedron(L)}
    if np.all(rho > 1e-12):
        sets["lambda0"] = HPolyhedron(L, rho)
    files = {}
    for name, poly in sets.items():
        try:
            files[f"{name}_vertices.txt"] = _rows(enumerate_vertices(poly))
        except RpiSynthError:
            pass
        try:
            files[f"{name}_projection_x1x2.txt"] = _rows(projection_polygon(poly))
        except RpiSynthError:
            pass
    return files


def _rows(points):
    return "".join(" ".join(f"{v:.17g}" for v in p) + "\n" for p in points)


def _fmt(v, width):
    if v is None:
        return "n/a".rjust(width)
    return f"{v:.4f}".rjust(width)


def gains_text(gains):
    rows = []
    for i in range(gains.n_v):
        vals = np.concatenate([gains.K[i].ravel(), gains.Kbar[i].ravel(), gains.Khat[i].ravel()])
        rows.append("[" + " ".join(f"{v:.5f}" for v in vals) + "]")
    return " ".join(rows)


def design_table(metrics, gains):
    """One-row table with the published column headings."""
    widths = [max(len(c), 10) for c in TABLE_COLUMNS[:4]]
    head = " | ".join(c.rjust(w) for c, w in zip(TABLE_COLUMNS[:4], widths)) + " | " + TABLE_COLUMNS[4]
    keys = ("lambda_volume", "lambda_projection_area", "lambda0_volume", "lambda0_projection_area")
    row = " | ".join(_fmt(metrics[k], w) for k, w in zip(keys, widths)) + " | " + gains_text(gains)
    return head + "\n" + "-" * len(head) + "\n" + row


def residual_table(residual, tol):
    width = max(len(k) for k in residual) if residual else 10
    lines = [f"{'condition'.ljust(width)}  {'worst violation':>16}  status"]
    for key in residual:
        val = residual[key]
        status = "ok" if val <= tol else "FAIL"
        lines.append(f"{key.ljust(width)}  {val:16.3e}  {status}")
    return "\n".join(lines)
