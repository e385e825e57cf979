"""Artifact writers and readers: legacy-VTK snapshots and energy CSV series.

Both formats are plain text with full double precision (17 significant
digits), so identical runs produce byte-identical artifacts and snapshots
round-trip exactly through the reader.
"""

from __future__ import annotations

import numpy as np

from . import operators as ops
from .energy import CSV_FIELDS, EnergyBreakdown
from .grid import Grid, VectorField, zeros_vector

CSV_HEADER = "step,time," + ",".join(CSV_FIELDS)

_SNAPSHOT_SCALARS = ("phi", "q", "sigma_xx", "sigma_xy", "sigma_yy", "pressure")


def _fmt(x: float) -> str:
    return "%.17g" % x


def energy_row(step: int, time: float, bd: EnergyBreakdown) -> str:
    parts = [str(step), _fmt(time)]
    parts.extend(_fmt(getattr(bd, name)) for name in CSV_FIELDS)
    return ",".join(parts)


class EnergyWriter:
    """Incremental energy-series writer; every row is flushed so aborted
    runs leave a readable partial file."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(CSV_HEADER + "\n")
        self._fh.flush()

    def write(self, step: int, time: float, bd: EnergyBreakdown) -> None:
        self._fh.write(energy_row(step, time, bd) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_energy_csv(path: str) -> dict[str, np.ndarray]:
    """Columns of an energy series keyed by header name."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        return {name: np.empty(0) for name in names}
    data = np.array([[float(v) for v in row] for row in rows])
    return {name: data[:, k] for k, name in enumerate(names)}


def validate_energy_csv(path: str, rel_tol: float = 1e-10
                        ) -> tuple[bool, str]:
    """Check header conformance and that the total energy is nonincreasing
    within ``rel_tol`` relative to max(1, |E|) at each recorded step."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != CSV_HEADER:
                return False, f"bad header: {header!r}"
            e_tot = []
            col = CSV_HEADER.split(",").index("e_tot")
            n_cols = len(CSV_HEADER.split(","))
            for lineno, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                parts = line.strip().split(",")
                if len(parts) != n_cols:
                    return False, f"line {lineno}: expected {n_cols} columns"
                try:
                    values = [float(v) for v in parts]
                except ValueError:
                    return False, f"line {lineno}: non-numeric value"
                if not all(np.isfinite(values)):
                    return False, f"line {lineno}: non-finite value"
                e_tot.append(values[col])
    except OSError as exc:
        return False, f"cannot read {path}: {exc}"
    if len(e_tot) < 1:
        return False, "no data rows"
    for k in range(1, len(e_tot)):
        bound = e_tot[k - 1] + rel_tol * max(1.0, abs(e_tot[k - 1]))
        if e_tot[k] > bound:
            return False, (f"total energy increases at row {k}: "
                           f"{e_tot[k - 1]:.17g} -> {e_tot[k]:.17g}")
    return True, f"ok ({len(e_tot)} rows, nonincreasing within {rel_tol:g})"


# ---------------------------------------------------------------------------
# legacy-VTK snapshots
# ---------------------------------------------------------------------------

def _cell_scalar_lines(out: list[str], name: str, arr: np.ndarray) -> None:
    out.append(f"SCALARS {name} double 1")
    out.append("LOOKUP_TABLE default")
    # VTK cell data runs x fastest; arrays are (nx, ny) with i the x index
    out.extend(_fmt(v) for v in arr.T.ravel())


def write_snapshot(state, path: str) -> None:
    """Write one state as legacy-VTK structured points with cell data.

    Works for both state flavours; fields a model does not carry are
    written as zeros so the file layout is uniform.
    """
    grid: Grid = state.grid
    zero = grid.zeros()
    sigma = getattr(state, "sigma", None)
    fields = {
        "phi": state.phi,
        "q": state.q,
        "sigma_xx": sigma.xx if sigma is not None else zero,
        "sigma_xy": sigma.xy if sigma is not None else zero,
        "sigma_yy": sigma.yy if sigma is not None else zero,
        "pressure": getattr(state, "p", zero),
    }
    u = getattr(state, "u", None)
    if u is None:
        u = zeros_vector(grid)
    ucx, ucy = ops.velocity_at_cells(grid, u)

    out = [
        "# vtk DataFile Version 3.0",
        "phase separation snapshot",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_fmt(grid.hx)} {_fmt(grid.hy)} 1",
        f"CELL_DATA {grid.n_cells}",
    ]
    for name in _SNAPSHOT_SCALARS:
        _cell_scalar_lines(out, name, fields[name])
    out.append("VECTORS velocity double")
    for vx, vy in zip(ucx.T.ravel(), ucy.T.ravel()):
        out.append(f"{_fmt(vx)} {_fmt(vy)} 0")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path: str) -> dict[str, np.ndarray]:
    """Parse a snapshot back into (nx, ny) arrays (plus 'velocity_x'/'_y')."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    dims = None
    for line in lines:
        if line.startswith("DIMENSIONS"):
            parts = line.split()
            dims = (int(parts[1]) - 1, int(parts[2]) - 1)
            break
    if dims is None:
        raise ValueError(f"{path}: missing DIMENSIONS record")
    nx, ny = dims
    n = nx * ny

    def to_grid(flat: np.ndarray) -> np.ndarray:
        return flat.reshape(ny, nx).T

    fields: dict[str, np.ndarray] = {}
    k = 0
    while k < len(lines):
        line = lines[k]
        if line.startswith("SCALARS"):
            name = line.split()[1]
            k += 2  # skip LOOKUP_TABLE
            vals = np.array([float(lines[k + i]) for i in range(n)])
            fields[name] = to_grid(vals)
            k += n
        elif line.startswith("VECTORS"):
            k += 1
            triples = np.array([[float(v) for v in lines[k + i].split()]
                                for i in range(n)])
            fields["velocity_x"] = to_grid(triples[:, 0])
            fields["velocity_y"] = to_grid(triples[:, 1])
            k += n
        else:
            k += 1
    return fields
