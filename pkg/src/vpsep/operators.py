"""Discrete difference, interpolation and advection operators.

All operators act on (nx, ny) arrays with periodic wraparound (np.roll).
The central pair div_face / grad_cc is an exact negative-adjoint pair under
the uniform cell measure hx*hy; every discrete energy identity in the scheme
modules reduces to that adjointness plus the interpolation/averaging
adjointness (arithmetic two-point mean both ways).  Tests pin these
identities to round-off.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid, TensorField, VectorField


# ---------------------------------------------------------------------------
# first-order building blocks
# ---------------------------------------------------------------------------

def grad_cc(grid: Grid, w: np.ndarray) -> VectorField:
    """Forward-difference gradient of a cell field, located on faces.

    gx[i, j] lives on the face between cells (i, j) and (i+1, j).
    """
    gx = (np.roll(w, -1, axis=0) - w) / grid.hx
    gy = (np.roll(w, -1, axis=1) - w) / grid.hy
    return VectorField(gx, gy)


def div_face(grid: Grid, v: VectorField) -> np.ndarray:
    """Divergence of a face vector field, located at cell centers."""
    dx = (v.ux - np.roll(v.ux, 1, axis=0)) / grid.hx
    dy = (v.uy - np.roll(v.uy, 1, axis=1)) / grid.hy
    return dx + dy


def laplacian_cc(grid: Grid, w: np.ndarray) -> np.ndarray:
    """Five-point Laplacian; by construction identical to div_face(grad_cc(w))."""
    return div_face(grid, grad_cc(grid, w))


def interp_cc_to_face(grid: Grid, w: np.ndarray) -> VectorField:
    """Arithmetic mean of the two adjacent cells on each face."""
    fx = 0.5 * (w + np.roll(w, -1, axis=0))
    fy = 0.5 * (w + np.roll(w, -1, axis=1))
    return VectorField(fx, fy)


def avg_facex_to_cc(f: np.ndarray) -> np.ndarray:
    """Mean of the two x-faces of each cell (adjoint of x-face interpolation)."""
    return 0.5 * (f + np.roll(f, 1, axis=0))


def avg_facey_to_cc(f: np.ndarray) -> np.ndarray:
    return 0.5 * (f + np.roll(f, 1, axis=1))


def avg_cc_to_corner(c: np.ndarray) -> np.ndarray:
    """Four-point mean at corners; corner [i, j] touches cells (i..i+1, j..j+1)."""
    return 0.25 * (
        c
        + np.roll(c, -1, axis=0)
        + np.roll(c, -1, axis=1)
        + np.roll(np.roll(c, -1, axis=0), -1, axis=1)
    )


def avg_corner_to_cc(k: np.ndarray) -> np.ndarray:
    """Adjoint of avg_cc_to_corner: mean of the four corners of each cell."""
    return 0.25 * (
        k
        + np.roll(k, 1, axis=0)
        + np.roll(k, 1, axis=1)
        + np.roll(np.roll(k, 1, axis=0), 1, axis=1)
    )


def integrate(grid: Grid, w: np.ndarray) -> float:
    """Cell-measure integral hx*hy*sum(w); also used for face/corner sums."""
    return grid.cell_volume * float(np.sum(w))


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def advect_conservative_upwind(grid: Grid, v: VectorField, w: np.ndarray) -> np.ndarray:
    """Donor-cell upwind approximation of div(v*w).

    Face flux is v_face times the upstream cell value; the returned cell
    field is the flux divergence, so its integral telescopes to zero.
    """
    fx = v.ux * np.where(v.ux > 0.0, w, np.roll(w, -1, axis=0))
    fy = v.uy * np.where(v.uy > 0.0, w, np.roll(w, -1, axis=1))
    return div_face(grid, VectorField(fx, fy))


def advect_conservative_central(grid: Grid, v: VectorField, w: np.ndarray) -> np.ndarray:
    """div(v*w) with arithmetic face interpolation of w.

    Pairing against w telescopes to (1/2)*integral(div(v)*w^2), which vanishes
    for discretely divergence-free v; this is the form the energy identities
    need for conformation-number transport.
    """
    wf = interp_cc_to_face(grid, w)
    return div_face(grid, VectorField(v.ux * wf.ux, v.uy * wf.uy))


def advect_face_pair(grid: Grid, v: VectorField, w: np.ndarray) -> np.ndarray:
    """Advective form v . grad(w) at cells, face values averaged back.

    Built so that sum(m * advect_face_pair(v, w)) equals the face sum of
    interp(m) * v * grad(w) exactly; pairing it against the face Korteweg
    force -interp(mu)*grad(phi) cancels without remainder.
    """
    g = grad_cc(grid, w)
    return avg_facex_to_cc(v.ux * g.ux) + avg_facey_to_cc(v.uy * g.uy)


def convect_velocity(grid: Grid, v_adv: VectorField, v: VectorField) -> VectorField:
    """Central conservative transport of a face velocity by a face velocity.

    Each component is transported on its own staggered control volume with
    two-point averaged advecting fluxes, whose control-volume divergence is
    the mean of adjacent cell divergences.  For discretely divergence-free
    v_adv the pairing against v vanishes (skew form).
    """
    hx, hy = grid.hx, grid.hy
    ax, ay = v_adv.ux, v_adv.uy
    ux, uy = v.ux, v.uy

    # x-component: CV centered on the vertical face
    u_e = 0.5 * (ax + np.roll(ax, -1, axis=0))          # at cell east of face
    v_n = 0.5 * (ay + np.roll(ay, -1, axis=0))          # at corner north of face
    fe = u_e * 0.5 * (ux + np.roll(ux, -1, axis=0))
    fn = v_n * 0.5 * (ux + np.roll(ux, -1, axis=1))
    conv_x = (fe - np.roll(fe, 1, axis=0)) / hx + (fn - np.roll(fn, 1, axis=1)) / hy

    # y-component: CV centered on the horizontal face
    u_e2 = 0.5 * (ax + np.roll(ax, -1, axis=1))         # at corner east of face
    v_n2 = 0.5 * (ay + np.roll(ay, -1, axis=1))         # at cell north of face
    fe2 = u_e2 * 0.5 * (uy + np.roll(uy, -1, axis=0))
    fn2 = v_n2 * 0.5 * (uy + np.roll(uy, -1, axis=1))
    conv_y = (fe2 - np.roll(fe2, 1, axis=0)) / hx + (fn2 - np.roll(fn2, 1, axis=1)) / hy

    return VectorField(conv_x, conv_y)


# ---------------------------------------------------------------------------
# velocity gradients, strains, tensor divergence
# ---------------------------------------------------------------------------

def grad_velocity_cc(grid: Grid, v: VectorField) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Velocity gradient (gxx, gxy, gyx, gyy) at cell centers.

    Diagonal entries come from each cell's own faces; cross derivatives are
    corner differences averaged to the center, the exact adjoint of the
    corner averaging inside div_tensor_to_faces.
    """
    gxx = (v.ux - np.roll(v.ux, 1, axis=0)) / grid.hx
    gyy = (v.uy - np.roll(v.uy, 1, axis=1)) / grid.hy
    dyux = (np.roll(v.ux, -1, axis=1) - v.ux) / grid.hy   # at corners
    dxuy = (np.roll(v.uy, -1, axis=0) - v.uy) / grid.hx   # at corners
    gxy = avg_corner_to_cc(dyux)
    gyx = avg_corner_to_cc(dxuy)
    return gxx, gxy, gyx, gyy


def strain_components(grid: Grid, v: VectorField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dxx at cells, dyy at cells, exy at corners) of the symmetric strain."""
    dxx = (v.ux - np.roll(v.ux, 1, axis=0)) / grid.hx
    dyy = (v.uy - np.roll(v.uy, 1, axis=1)) / grid.hy
    exy = 0.5 * (
        (np.roll(v.ux, -1, axis=1) - v.ux) / grid.hy
        + (np.roll(v.uy, -1, axis=0) - v.uy) / grid.hx
    )
    return dxx, dyy, exy


def viscous_force(grid: Grid, eta_cell: np.ndarray, v: VectorField) -> VectorField:
    """div(eta*(grad u + grad u^T)) on faces, variable viscosity.

    Diagonal stresses use cell eta, shear stress uses the four-point corner
    mean of eta; the quadratic form of this operator is exactly the mixed
    cell/corner strain dissipation used by the energy diagnostics.
    """
    dxx, dyy, exy = strain_components(grid, v)
    eta_k = avg_cc_to_corner(eta_cell)
    txx = 2.0 * eta_cell * dxx
    tyy = 2.0 * eta_cell * dyy
    txy = 2.0 * eta_k * exy
    fx = (np.roll(txx, -1, axis=0) - txx) / grid.hx + (txy - np.roll(txy, 1, axis=1)) / grid.hy
    fy = (np.roll(tyy, -1, axis=1) - tyy) / grid.hy + (txy - np.roll(txy, 1, axis=0)) / grid.hx
    return VectorField(fx, fy)


def div_tensor_to_faces(grid: Grid, t: TensorField) -> VectorField:
    """Divergence of a symmetric cell tensor, landing on velocity faces.

    Diagonal entries are differenced between adjacent cells; the shear entry
    is averaged to corners first.  For t = b*identity this reduces exactly to
    grad_cc(b).
    """
    k = avg_cc_to_corner(t.xy)
    fx = (np.roll(t.xx, -1, axis=0) - t.xx) / grid.hx + (k - np.roll(k, 1, axis=1)) / grid.hy
    fy = (np.roll(t.yy, -1, axis=1) - t.yy) / grid.hy + (k - np.roll(k, 1, axis=0)) / grid.hx
    return VectorField(fx, fy)


def tensor_contract_gradu(t: TensorField, grad_u: tuple[np.ndarray, ...]) -> np.ndarray:
    """Cellwise t : grad(u) for symmetric t and a cell velocity gradient."""
    gxx, gxy, gyx, gyy = grad_u
    return t.xx * gxx + t.yy * gyy + t.xy * (gxy + gyx)


# ---------------------------------------------------------------------------
# misc helpers
# ---------------------------------------------------------------------------

def velocity_at_cells(grid: Grid, v: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Average the two faces of each cell per component (for output only)."""
    ucx = 0.5 * (v.ux + np.roll(v.ux, 1, axis=0))
    ucy = 0.5 * (v.uy + np.roll(v.uy, 1, axis=1))
    return ucx, ucy


def divfree_from_stream(grid: Grid, psi_corner: np.ndarray) -> VectorField:
    """Exactly divergence-free face velocity from a corner stream function."""
    ux = (psi_corner - np.roll(psi_corner, 1, axis=1)) / grid.hy
    uy = -(psi_corner - np.roll(psi_corner, 1, axis=0)) / grid.hx
    return VectorField(ux, uy)
