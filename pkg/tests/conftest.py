"""Shared fixtures, smooth-field builders, and the acceptance-criteria report.

Every acceptance test records one line through :func:`record_criterion`; the
`pytest_terminal_summary` hook prints them in a dedicated section so the
pass/fail status of each numbered criterion is visible in any pytest run,
with or without output capture.
"""

from __future__ import annotations

import numpy as np
import pytest

from vpsep.grid import Grid
from vpsep.materials import ModelParams
from vpsep.operators import divfree_from_stream
from vpsep.state import TensorField, VectorField

# ---------------------------------------------------------------------------
# acceptance-criteria reporting
# ---------------------------------------------------------------------------

_CRITERION_LINES: dict[int, str] = {}


def record_criterion(num: int, passed: bool, detail: str = "") -> None:
    """Store one summary line for acceptance criterion ``num``."""
    tag = "PASS" if passed else "FAIL"
    line = f"criterion {num:2d}: {tag}"
    if detail:
        line += f"  -- {detail}"
    _CRITERION_LINES[num] = line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[num])


# ---------------------------------------------------------------------------
# deterministic smooth fields
# ---------------------------------------------------------------------------

def band_limited(grid: Grid, seed: int, where: str = "cell",
                 kmax: int = 2) -> np.ndarray:
    """Smooth periodic field with max-norm 1 from a few random Fourier modes.

    Deterministic in ``seed``; ``where`` selects the staggering location so
    the same recipe can seed scalars, stream functions, and tensor entries.
    """
    coords = {
        "cell": grid.cell_centers,
        "corner": grid.corner_centers,
        "face_x": grid.face_x_centers,
        "face_y": grid.face_y_centers,
    }[where]()
    x, y = coords
    rng = np.random.default_rng(seed)
    out = np.zeros(grid.shape)
    for kx in range(kmax + 1):
        for ky in range(kmax + 1):
            if kx == 0 and ky == 0:
                continue
            amp_s, amp_c = rng.normal(size=2)
            arg = 2.0 * np.pi * (kx * x / grid.lx + ky * y / grid.ly)
            out += amp_s * np.sin(arg) + amp_c * np.cos(arg)
    return out / np.abs(out).max()


def stream_velocity(grid: Grid, seed: int, max_speed: float) -> VectorField:
    """Discretely divergence-free velocity with given maximum face speed."""
    psi = band_limited(grid, seed, where="corner")
    u = divfree_from_stream(grid, psi)
    speed = max(np.abs(u.ux).max(), np.abs(u.uy).max())
    scale = max_speed / speed
    return VectorField(u.ux * scale, u.uy * scale)


def smooth_phase(grid: Grid, seed: int, mean: float = 0.4,
                 amp: float = 0.15) -> np.ndarray:
    return mean + amp * band_limited(grid, seed)


def smooth_tensor(grid: Grid, seed: int, diag_mean: float = 0.05,
                  diag_amp: float = 0.02, shear_amp: float = 0.01
                  ) -> TensorField:
    """Smooth symmetric tensor kept close to a small positive multiple of
    the identity so conformation-style positivity checks stay meaningful."""
    return TensorField(
        xx=diag_mean + diag_amp * band_limited(grid, seed),
        xy=shear_amp * band_limited(grid, seed + 1),
        yy=diag_mean + diag_amp * band_limited(grid, seed + 2),
    )


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

@pytest.fixture
def grid32() -> Grid:
    return Grid(32, 32)


@pytest.fixture
def grid16() -> Grid:
    return Grid(16, 16)


@pytest.fixture
def grid_aniso() -> Grid:
    """Unequal resolution and spacing in x and y to expose axis mix-ups."""
    return Grid(24, 16, 1.2, 1.0)


@pytest.fixture
def params() -> ModelParams:
    return ModelParams()
