"""Initial fields: seeded uniform perturbations, smooth sine products, and
the stress initialisation choices.

The random perturbation uses a SplitMix64 counter generator consumed in
row-major cell order, so a fixed seed reproduces the same field bitwise on
any platform.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, TensorField, VectorField, zeros_tensor, zeros_vector
from .materials import ModelParams, safe_phi_sq
from .state import FullState, SimplifiedState

SIGMA_INIT_ZERO = "zero"
SIGMA_INIT_B2_IDENTITY = "b2_sqrt2_identity"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """First ``count`` SplitMix64 outputs for ``seed``, scaled to [0, 1)."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & _U64_MASK) + idx * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def phi_random_uniform(grid: Grid, mean: float, amplitude: float,
                       seed: int) -> np.ndarray:
    """Per-cell iid uniform values in [mean - amplitude, mean + amplitude]."""
    u = splitmix64_uniform(seed, grid.n_cells)
    return (mean + amplitude * (2.0 * u - 1.0)).reshape(grid.shape)


def phi_smooth_sine(grid: Grid) -> np.ndarray:
    """0.5 + 0.5 sin(2 pi x) sin(2 pi y) sampled at cell centres."""
    xc, yc = grid.cell_centers()
    return 0.5 + 0.5 * np.sin(2.0 * np.pi * xc) * np.sin(2.0 * np.pi * yc)


def initial_sigma(grid: Grid, params: ModelParams, phi: np.ndarray,
                  kind: str) -> TensorField:
    """Stress initialisation: zero, or the positive-definite diagonal
    B2(phi) (sqrt(2) - 1) on each cell."""
    if kind == SIGMA_INIT_ZERO:
        return zeros_tensor(grid)
    if kind == SIGMA_INIT_B2_IDENTITY:
        b2 = params.ms0 * safe_phi_sq(params, phi)
        diag = b2 * (np.sqrt(2.0) - 1.0)
        return TensorField(diag.copy(), grid.zeros(), diag.copy())
    raise ValueError(f"unknown stress initialisation: {kind!r}")


def make_simplified_state(grid: Grid, phi: np.ndarray) -> SimplifiedState:
    return SimplifiedState(grid=grid, phi=phi, q=grid.zeros())


def make_full_state(grid: Grid, params: ModelParams, phi: np.ndarray,
                    sigma_init: str = SIGMA_INIT_ZERO) -> FullState:
    return FullState(grid=grid, phi=phi, q=grid.zeros(),
                     sigma=initial_sigma(grid, params, phi, sigma_init),
                     u=zeros_vector(grid), p=grid.zeros())
