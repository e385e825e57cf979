"""Linear energy-stable steppers for the diffusive (velocity-free) model.

One implicit solve per step for the stacked unknown [phi, q]. The midpoint
chemical potential couples the rows; the composite face flux
M [ b grad(mu) - grad(A1 q) ] drives both equations so the discrete energy
identity closes exactly (up to solver tolerance).

The same assembler provides the phase-field/bulk-stress blocks for the
flow-coupled schemes, with optional advection hooks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grid import Grid, VectorField
from .linalg import SolveResult, SolverConfig, solve
from .materials import ModelParams, clamp_phi, coeff_a1, f_approx_affine
from .matrices import diag, operator_mats, weighted_div_grad
from . import operators as ops
from .energy import composite_flux, inv_tau_b
from .state import SimplifiedState, StepAux, extrapolated_level


@dataclass
class PhaseBlocks:
    """2x2 block system for [phi, q] plus the pieces coupled schemes reuse.

    Matrices act on flat (C-order) vectors; right-hand sides are flat.
    """
    m_pp: sp.spmatrix
    m_pq: sp.spmatrix
    m_qp: sp.spmatrix
    m_qq: sp.spmatrix
    rhs_phi: np.ndarray
    rhs_q: np.ndarray
    a_mu: sp.spmatrix            # implicit part of the midpoint potential
    mu_known: np.ndarray         # explicit part of the midpoint potential
    d1: sp.spmatrix              # div( M b^2 grad(.) )
    d3: sp.spmatrix              # div( M b grad(.) )
    a1: np.ndarray               # relaxation-weight coefficient, flat
    c_mu: float                  # dt-proportional extra diffusion coefficient
    c_tilde: float               # effective gradient-energy coefficient


def phase_blocks(grid: Grid, params: ModelParams, phi_n: np.ndarray,
                 q_n: np.ndarray, phi_coef: np.ndarray, dt: float,
                 u_adv: VectorField | None = None,
                 phase_field_forcing: bool = False) -> PhaseBlocks:
    """Assemble the implicit [phi, q] system of the midpoint scheme.

    Fields come in with grid shape. ``phi_coef`` is the explicit level for
    mobility/relaxation coefficients. ``u_adv`` adds the conservative
    central advection of q at its midpoint value. ``phase_field_forcing``
    folds the dt-implicit part of the phase-field-forced tentative-velocity
    flux into the phi row (the explicit advective part stays with the
    caller, which owns the velocity).
    """
    mats = operator_mats(grid)
    m = params.mobility
    phi_flat = phi_n.ravel()
    q_flat = q_n.ravel()

    a_aff, b_aff, c_mu = f_approx_affine(params, phi_flat, dt)
    c_tilde = params.c0 + c_mu

    phi_c = clamp_phi(params, phi_coef)
    b_cell = phi_c * (1.0 - phi_c)
    b_f = ops.interp_cc_to_face(grid, b_cell)
    a1 = coeff_a1(params, phi_coef).ravel()
    itb = inv_tau_b(params, phi_coef).ravel()

    bfx = b_f.ux.ravel()
    bfy = b_f.uy.ravel()
    d1 = weighted_div_grad(grid, m * bfx * bfx, m * bfy * bfy)
    d3 = weighted_div_grad(grid, m * bfx, m * bfy)
    a_mu = (-0.5 * c_tilde) * mats.lap + diag(a_aff)
    mu_known = -0.5 * c_tilde * (mats.lap @ phi_flat) + b_aff
    a1d = diag(a1)

    flux_op = d1
    if phase_field_forcing:
        phi_f = ops.interp_cc_to_face(grid, phi_n)
        pfx = phi_f.ux.ravel()
        pfy = phi_f.uy.ravel()
        d4 = weighted_div_grad(grid, pfx * pfx, pfy * pfy)
        flux_op = d1 + dt * d4

    m_pp = mats.eye / dt - flux_op @ a_mu
    m_pq = 0.5 * (d3 @ a1d)
    m_qp = a1d @ (d3 @ a_mu)
    m_qq = (mats.eye / dt + diag(0.5 * itb)
            - 0.5 * m * (a1d @ (mats.lap @ a1d)))

    rhs_phi = phi_flat / dt + flux_op @ mu_known - d3 @ (0.5 * a1 * q_flat)
    rhs_q = (q_flat / dt - 0.5 * itb * q_flat - a1 * (d3 @ mu_known)
             + 0.5 * m * (a1 * (mats.lap @ (a1 * q_flat))))

    if u_adv is not None:
        advc = (mats.dx @ diag(u_adv.ux) @ mats.axf
                + mats.dy @ diag(u_adv.uy) @ mats.ayf)
        m_qq = m_qq + 0.5 * advc
        rhs_q = rhs_q - 0.5 * (advc @ q_flat)

    return PhaseBlocks(m_pp.tocsr(), m_pq.tocsr(), m_qp.tocsr(), m_qq.tocsr(),
                       rhs_phi, rhs_q, a_mu.tocsr(), mu_known,
                       d1, d3, a1, c_mu, c_tilde)


def midpoint_potential(grid: Grid, params: ModelParams, phi_new: np.ndarray,
                       phi_old: np.ndarray, c_tilde: float, dt: float) -> np.ndarray:
    """Recompute the midpoint chemical potential from the solved states with
    the stencil operators (same discretisation as the assembled system)."""
    a_aff, b_aff, _ = f_approx_affine(params, phi_old, dt)
    phi_half = 0.5 * (phi_old + phi_new)
    return -c_tilde * ops.laplacian_cc(grid, phi_half) + a_aff * phi_new + b_aff


def finish_phase_aux(grid: Grid, params: ModelParams, blocks: PhaseBlocks,
                     phi_old: np.ndarray, q_old: np.ndarray,
                     phi_new: np.ndarray, q_new: np.ndarray,
                     phi_coef: np.ndarray, dt: float) -> StepAux:
    """Build the diagnostics record shared by all schemes' phase subsystem."""
    mu_half = midpoint_potential(grid, params, phi_new, phi_old,
                                 blocks.c_tilde, dt)
    q_half = 0.5 * (q_old + q_new)
    flux = composite_flux(grid, params, phi_coef, mu_half, q_half)
    return StepAux(mu_half=mu_half, q_half=q_half, phi_coef=phi_coef,
                   c_mu=blocks.c_mu, flux=flux)


def step_simplified(state: SimplifiedState, params: ModelParams, dt: float,
                    two_step: bool = False,
                    config: SolverConfig | None = None
                    ) -> tuple[SimplifiedState, StepAux]:
    """Advance the diffusive model by one step.

    ``two_step=False`` evaluates coefficients at the current phase field
    (first-order); ``two_step=True`` extrapolates them half a step back in
    time (second-order), falling back to the current value on the very
    first step.
    """
    grid = state.grid
    n = grid.n_cells
    phi_coef = extrapolated_level(
        state.phi, state.phi_prev if two_step else None)

    blocks = phase_blocks(grid, params, state.phi, state.q, phi_coef, dt)
    mat = sp.bmat([[blocks.m_pp, blocks.m_pq],
                   [blocks.m_qp, blocks.m_qq]], format="csr")
    rhs = np.concatenate([blocks.rhs_phi, blocks.rhs_q])
    x0 = np.concatenate([state.phi.ravel(), state.q.ravel()])

    result: SolveResult = solve(mat, rhs, x0=x0, config=config)
    phi_new = result.x[:n].reshape(grid.shape)
    q_new = result.x[n:].reshape(grid.shape)

    aux = finish_phase_aux(grid, params, blocks, state.phi, state.q,
                           phi_new, q_new, phi_coef, dt)
    new_state = SimplifiedState(
        grid=grid, phi=phi_new, q=q_new,
        phi_prev=state.phi if two_step else None,
        t=state.t + dt, step=state.step + 1)
    return new_state, aux


def step_o1(state: SimplifiedState, params: ModelParams, dt: float,
            config: SolverConfig | None = None) -> tuple[SimplifiedState, StepAux]:
    return step_simplified(state, params, dt, two_step=False, config=config)


def step_o2(state: SimplifiedState, params: ModelParams, dt: float,
            config: SolverConfig | None = None) -> tuple[SimplifiedState, StepAux]:
    return step_simplified(state, params, dt, two_step=True, config=config)
