"""Field, profile and plot-script output."""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .diagnostics import Profile
from .errors import IoError
from .mesh import Mesh
from .rheology import ModelKind, stress
from .state import PhysParams, PrimitiveState, conserved_to_primitive, free_energy, primitive_to_conserved

FIELD_COLUMNS = ("x", "y", "h", "u", "v", "cxx", "cyy", "cxy", "czz", "sxx", "syy", "sxy", "szz", "energy")


def _num(x: float) -> str:
    return f"{x:.17g}"


def _cell_table(q: np.ndarray, mesh: Mesh, params: PhysParams, model) -> dict:
    p = conserved_to_primitive(q)
    (sxx, syy, sxy), szz = stress(p, params.G, ModelKind.parse(model))
    x, y = mesh.centers()
    return {
        "x": x, "y": y, "h": p.h, "u": p.u, "v": p.v, "cxx": p.cxx, "cyy": p.cyy, "cxy": p.cxy,
        "czz": p.czz, "sxx": sxx, "syy": syy, "sxy": sxy, "szz": szz, "energy": free_energy(p, params),
    }


def write_fields(state, mesh: Mesh, fmt: str, path, params: PhysParams | None = None, model="svtm") -> None:
    """Write cell fields as CSV or legacy VTK.

    CSV rows follow the array order (``i`` slow, ``j`` fast), one row per
    cell, 17 significant digits. VTK is ASCII ``STRUCTURED_POINTS`` with
    ``CELL_DATA`` (``x`` fastest, as VTK requires).

    Args:
        state: Field state or conserved array of shape ``(nx, ny, 7)``.
        mesh: Mesh.
        fmt: ``"csv"`` or ``"vtk"``.
        path: Destination file.
        params: Physical parameters for stresses and energy.
        model: Model kind for the stress sign.

    Raises:
        IoError: On unknown format or write failure.
    """
    q = getattr(state, "q", state)
    params = params or PhysParams()
    table = _cell_table(np.asarray(q), mesh, params, model)
    try:
        if fmt == "csv":
            _write_csv(table, path)
        elif fmt == "vtk":
            _write_vtk(table, mesh, path)
        else:
            raise IoError(f"unknown field format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_csv(table: dict, path) -> None:
    cols = [np.asarray(table[c]).ravel() for c in FIELD_COLUMNS]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FIELD_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_num(v) for v in row) + "\n")


def _write_vtk(table: dict, mesh: Mesh, path) -> None:
    def flat(a):
        return np.asarray(a).T.ravel()  # x fastest

    lines = [
        "# vtk DataFile Version 3.0",
        "cell fields",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_num(mesh.dx)} {_num(mesh.dy)} 1",
        f"CELL_DATA {mesh.n_cells}",
    ]
    for name in ("h", "czz", "energy"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in flat(table[name])]
    u, v = flat(table["u"]), flat(table["v"])
    lines.append("VECTORS velocity double")
    lines += [f"{_num(a)} {_num(b)} 0" for a, b in zip(u, v)]
    cxx, cyy, cxy, czz = (flat(table[k]) for k in ("cxx", "cyy", "cxy", "czz"))
    lines.append("TENSORS conformation double")
    for a, b, c, d in zip(cxx, cyy, cxy, czz):
        lines += [f"{_num(a)} {_num(c)} 0", f"{_num(c)} {_num(b)} 0", f"0 0 {_num(d)}", ""]
    for name in ("sxx", "syy", "sxy", "szz"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_num(v) for v in flat(table[name])]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_fields_csv(path) -> dict:
    """Read a field or profile CSV into a dict of column arrays.

    Raises:
        IoError: If the file is missing or malformed.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in r] for r in reader if r]
    except (OSError, StopIteration, ValueError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def fields_to_conserved(columns: dict, mesh: Mesh) -> np.ndarray:
    """Conserved field of shape ``(nx, ny, 7)`` from :func:`read_fields_csv` output."""
    shape = (mesh.nx, mesh.ny)
    p = PrimitiveState(*(columns[k].reshape(shape) for k in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")))
    return primitive_to_conserved(p)


def write_profile(profile: Profile, path) -> None:
    """Write a cross-section as CSV with columns ``s, x, y`` then the fields.

    Raises:
        IoError: On write failure.
    """
    names = list(profile.fields)
    cols = [profile.s, profile.x, profile.y] + [profile.fields[k] for k in names]
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["s", "x", "y"] + names) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_num(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_profile_1d(s, fields: dict, path) -> None:
    """Write 1D profiles with a coordinate column ``s``."""
    zeros = np.zeros_like(np.asarray(s, dtype=float))
    write_profile(Profile(np.asarray(s), np.asarray(s), zeros, dict(fields)), path)


def emit_plot_script(profiles, quantities, path, image: str | None = None) -> None:
    """Write a gnuplot script with one panel per quantity, overlaying all runs.

    Args:
        profiles: Paths of profile CSVs, or ``(label, path)`` pairs.
        quantities: Column names to plot; each must exist in every CSV.
        path: Script destination.
        image: Optional PNG file the script renders to.

    Raises:
        IoError: If a CSV is missing or lacks a requested column.
    """
    runs = [(Path(p).stem, str(p)) if isinstance(p, (str, Path)) else (str(p[0]), str(p[1])) for p in profiles]
    quantities = list(quantities)
    if not runs or not quantities:
        raise IoError("need at least one profile and one quantity")
    headers = {}
    for label, p in runs:
        try:
            with open(p, newline="") as fh:
                headers[p] = next(csv.reader(fh))
        except (OSError, StopIteration) as exc:
            raise IoError(f"cannot read {p}: {exc}") from exc
        missing = [q for q in quantities if q not in headers[p]]
        if missing:
            raise IoError(f"{p} lacks columns {missing}")
    base = Path(path).resolve().parent
    rel = {p: os.path.relpath(Path(p).resolve(), base) for _, p in runs}
    n = len(quantities)
    rows = 1 if n == 1 else 2 if n <= 4 else (n + 1) // 2
    cols = 1 if n == 1 else 2
    out = ["# data paths are relative to this script's directory", "set datafile separator ','",
           "set key top right", "set grid"]
    if image:
        out += [f"set terminal pngcairo size {600 * cols},{400 * rows}", f"set output '{image}'"]
    if n > 1:
        out.append(f"set multiplot layout {rows},{cols}")
    for q in quantities:
        out.append(f"set title '{q}'")
        parts = []
        for label, p in runs:
            hdr = headers[p]
            xcol = hdr.index("s") + 1 if "s" in hdr else hdr.index("x") + 1
            parts.append(f"'{rel[p]}' every ::1 using {xcol}:{hdr.index(q) + 1} with lines title '{label}'")
        out.append("plot " + ", \\\n     ".join(parts))
    if n > 1:
        out.append("unset multiplot")
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
