"""Sparse-matrix realizations of the periodic staggered operators.

The scheme modules assemble implicit systems by composing these matrices
with coefficient diagonals.  Flattening is C-order (index = i*ny + j), the
same layout as np.ndarray.ravel(), so matrix action agrees with the array
operators in operators.py up to floating-point associativity.
"""
from __future__ import annotations

from functools import lru_cache
from types import SimpleNamespace

import numpy as np
import scipy.sparse as sp

from .grid import Grid


def _shift(n: int, k: int) -> sp.csr_matrix:
    """Permutation matrix: (S w)[i] = w[(i+k) mod n]."""
    rows = np.arange(n)
    cols = (rows + k) % n
    return sp.csr_matrix((np.ones(n), (rows, cols)), shape=(n, n))


@lru_cache(maxsize=8)
def operator_mats(grid: Grid) -> SimpleNamespace:
    """Cached bundle of base operator matrices for one grid."""
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    ix = sp.identity(nx, format="csr")
    iy = sp.identity(ny, format="csr")
    n = nx * ny

    sxp = sp.kron(_shift(nx, 1), iy, format="csr")   # w[i+1, j]
    sxm = sp.kron(_shift(nx, -1), iy, format="csr")  # w[i-1, j]
    syp = sp.kron(ix, _shift(ny, 1), format="csr")   # w[i, j+1]
    sym = sp.kron(ix, _shift(ny, -1), format="csr")  # w[i, j-1]
    eye = sp.identity(n, format="csr")

    gx = (sxp - eye) / hx        # cell -> x-face forward difference
    gy = (syp - eye) / hy
    dx = (eye - sxm) / hx        # x-face -> cell divergence piece
    dy = (eye - sym) / hy
    axf = 0.5 * (sxp + eye)      # cell -> x-face mean
    ayf = 0.5 * (syp + eye)
    bxc = 0.5 * (eye + sxm)      # x-face -> cell mean (adjoint of axf)
    byc = 0.5 * (eye + sym)
    lap = (dx @ gx + dy @ gy).tocsr()

    # corner averaging: cell -> corner and its adjoint
    ck = 0.25 * (eye + sxp + syp + sxp @ syp)
    kc = 0.25 * (eye + sxm + sym + sxm @ sym)

    return SimpleNamespace(
        n=n, eye=eye,
        sxp=sxp, sxm=sxm, syp=syp, sym=sym,
        gx=gx, gy=gy, dx=dx, dy=dy,
        axf=axf, ayf=ayf, bxc=bxc, byc=byc,
        lap=lap, cell_to_corner=ck, corner_to_cell=kc,
    )


def diag(values: np.ndarray) -> sp.csr_matrix:
    """Diagonal matrix from a (nx, ny) field or flat vector."""
    return sp.diags(np.asarray(values).ravel()).tocsr()


def weighted_div_grad(grid: Grid, cx: np.ndarray, cy: np.ndarray) -> sp.csr_matrix:
    """div_face(c * grad_cc(w)) as a matrix, c given per face component."""
    m = operator_mats(grid)
    return (m.dx @ diag(cx) @ m.gx + m.dy @ diag(cy) @ m.gy).tocsr()


def viscous_matrix(grid: Grid, eta_cell: np.ndarray) -> tuple[sp.csr_matrix, ...]:
    """Blocks (axx, axy, ayx, ayy) of div(eta*(grad u + grad u^T)) on faces.

    Mirrors operators.viscous_force: cell eta for diagonal stresses, corner
    mean of eta for the shear stress.
    """
    m = operator_mats(grid)
    hx, hy = grid.hx, grid.hy
    eta_k = m.cell_to_corner @ eta_cell.ravel()

    # face -> cell / corner strain pieces
    dxx_of_ux = (m.eye - m.sxm) / hx          # x-face -> cell
    dyy_of_uy = (m.eye - m.sym) / hy
    dy_ux = (m.syp - m.eye) / hy              # x-face -> corner
    dx_uy = (m.sxp - m.eye) / hx              # y-face -> corner

    # stress -> force pieces
    cell_to_xface = (m.sxp - m.eye) / hx
    cell_to_yface = (m.syp - m.eye) / hy
    corner_to_xface = (m.eye - m.sym) / hy
    corner_to_yface = (m.eye - m.sxm) / hx

    two_eta_c = diag(2.0 * eta_cell)
    eta_kd = sp.diags(eta_k).tocsr()

    axx = cell_to_xface @ two_eta_c @ dxx_of_ux + corner_to_xface @ eta_kd @ dy_ux
    axy = corner_to_xface @ eta_kd @ dx_uy
    ayx = corner_to_yface @ eta_kd @ dy_ux
    ayy = cell_to_yface @ two_eta_c @ dyy_of_uy + corner_to_yface @ eta_kd @ dx_uy
    return axx.tocsr(), axy.tocsr(), ayx.tocsr(), ayy.tocsr()


def convection_matrix(grid: Grid, v_adv) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(conv on ux, conv on uy) blocks of convect_velocity for fixed v_adv."""
    m = operator_mats(grid)
    hx, hy = grid.hx, grid.hy
    ax, ay = v_adv.ux, v_adv.uy

    u_e = 0.5 * (ax + np.roll(ax, -1, axis=0))
    v_n = 0.5 * (ay + np.roll(ay, -1, axis=0))
    interp_e = 0.5 * (m.eye + m.sxp)
    interp_n = 0.5 * (m.eye + m.syp)
    flux_e = diag(u_e) @ interp_e
    flux_n = diag(v_n) @ interp_n
    conv_x = (flux_e - m.sxm @ flux_e) / hx + (flux_n - m.sym @ flux_n) / hy

    u_e2 = 0.5 * (ax + np.roll(ax, -1, axis=1))
    v_n2 = 0.5 * (ay + np.roll(ay, -1, axis=1))
    flux_e2 = diag(u_e2) @ interp_e
    flux_n2 = diag(v_n2) @ interp_n
    conv_y = (flux_e2 - m.sxm @ flux_e2) / hx + (flux_n2 - m.sym @ flux_n2) / hy

    return conv_x.tocsr(), conv_y.tocsr()
