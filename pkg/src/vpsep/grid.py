"""Uniform periodic staggered (MAC) grid in two dimensions.

Scalar fields live at cell centers and are stored as (nx, ny) arrays with
C-order flattening (index = i*ny + j, i the x index).  Velocity components
live at face centers: ux[i, j] sits on the vertical face between cells
(i, j) and (i+1, j), uy[i, j] on the horizontal face between (i, j) and
(i, j+1).  Symmetric 2x2 tensors are stored componentwise at cell centers.
Everything wraps periodically, so all arrays share the (nx, ny) shape.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.ny}")
        if not (self.lx > 0.0 and self.ly > 0.0):
            raise ValueError(f"domain lengths must be positive, got {self.lx}, {self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X, Y) of cell-center coordinates, shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def face_x_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of vertical-face centers, where ux lives."""
        x = (np.arange(self.nx) + 1.0) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def face_y_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of horizontal-face centers, where uy lives."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 1.0) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def corner_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of cell corners; corner [i, j] is at ((i+1)hx, (j+1)hy)."""
        x = (np.arange(self.nx) + 1.0) * self.hx
        y = (np.arange(self.ny) + 1.0) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


class VectorField(NamedTuple):
    """Staggered vector field: ux on vertical faces, uy on horizontal faces."""
    ux: np.ndarray
    uy: np.ndarray


class TensorField(NamedTuple):
    """Symmetric 2x2 tensor field at cell centers."""
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray


def zeros_vector(grid: Grid) -> VectorField:
    return VectorField(grid.zeros(), grid.zeros())


def zeros_tensor(grid: Grid) -> TensorField:
    return TensorField(grid.zeros(), grid.zeros(), grid.zeros())


def check_field(grid: Grid, w: np.ndarray, name: str = "field") -> None:
    """Validate shape and finiteness of a field array."""
    if w.shape != grid.shape:
        raise ValueError(f"{name} has shape {w.shape}, expected {grid.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{name} contains non-finite entries")


def all_finite(*arrays: np.ndarray) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)
