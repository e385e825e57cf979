"""Flow-coupled time steppers on the staggered periodic grid.

Variants: a backward-Euler monolithic scheme, two midpoint monolithic
schemes (one-step and two-step), a stress-implicit monolithic fixpoint,
a three-substep splitting (with either a monolithic Stokes solve or a
Chorin projection for the fluid substep), and a stress-implicit
splitting fixpoint. All flow solves keep the velocity divergence-free
through a pressure multiplier with a zero-mean gauge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .energy import inv_tau_s
from .grid import Grid, TensorField, VectorField
from .linalg import (SolverConfig, SolverError, mean_augmented, solve,
                     solve_cg_zero_mean)
from .materials import ModelParams, coefficients, safe_phi_sq
from .matrices import convection_matrix, diag, operator_mats, viscous_matrix
from .simplified import PhaseBlocks, finish_phase_aux, phase_blocks
from .state import (FullState, StepAux, extrapolated_level,
                    extrapolated_tensor, extrapolated_vector)

MODE_MONOLITHIC = "monolithic_stokes"
MODE_CHORIN = "chorin"


class FixpointError(SolverError):
    """Stress/velocity fixpoint failed to contract within the iteration cap."""

    def __init__(self, message: str, last_change: float, iterations: int):
        super().__init__(message)
        self.last_change = last_change
        self.iterations = iterations


@dataclass(frozen=True)
class FixpointConfig:
    """Stop rule for the stress-implicit iterations: relative change of
    each of (stress, velocity, pressure) at most ``delta``, checked
    non-strictly so an exact fixpoint stops immediately."""
    delta: float = 1e-8
    max_l: int = 50

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("fixpoint delta must be positive")
        if self.max_l < 1:
            raise ValueError("fixpoint iteration cap must be at least 1")


# ---------------------------------------------------------------------------
# shear-stress updates
# ---------------------------------------------------------------------------

def stretch_tensor(sigma: TensorField, grad_u) -> TensorField:
    """(grad u) sigma + sigma (grad u)^T with the cell-centred gradient."""
    gxx, gxy, gyx, gyy = grad_u
    return TensorField(
        2.0 * (gxx * sigma.xx + gxy * sigma.xy),
        gyx * sigma.xx + (gxx + gyy) * sigma.xy + gxy * sigma.yy,
        2.0 * (gyx * sigma.xy + gyy * sigma.yy))


def strain_rate_cc(grad_u) -> TensorField:
    """Twice the symmetric velocity gradient, collocated at cell centres."""
    gxx, gxy, gyx, gyy = grad_u
    return TensorField(2.0 * gxx, gxy + gyx, 2.0 * gyy)


def advect_tensor(grid: Grid, v: VectorField, sigma: TensorField) -> TensorField:
    """Conservative upwind transport of each stress component."""
    return TensorField(
        ops.advect_conservative_upwind(grid, v, sigma.xx),
        ops.advect_conservative_upwind(grid, v, sigma.xy),
        ops.advect_conservative_upwind(grid, v, sigma.yy))


def sigma_step_explicit(grid: Grid, params: ModelParams, dt: float,
                        sigma_time: TensorField, sigma_expl: TensorField,
                        u_adv: VectorField, u_grad: VectorField,
                        phi_tau: np.ndarray, phi_b2: np.ndarray) -> TensorField:
    """One explicit stress update.

    ``sigma_time`` is the level in the time difference, ``sigma_expl`` the
    level that is transported, stretched and relaxed (they differ only in
    the two-step scheme). Transport uses ``u_adv``, stretching and the
    strain forcing use ``u_grad``.
    """
    grad_u = ops.grad_velocity_cc(grid, u_grad)
    k = stretch_tensor(sigma_expl, grad_u)
    twod = strain_rate_cc(grad_u)
    adv = advect_tensor(grid, u_adv, sigma_expl)
    its = inv_tau_s(params, phi_tau)
    b2 = params.ms0 * safe_phi_sq(params, phi_b2)
    return TensorField(
        sigma_time.xx + dt * (-adv.xx + k.xx - its * sigma_expl.xx + b2 * twod.xx),
        sigma_time.xy + dt * (-adv.xy + k.xy - its * sigma_expl.xy + b2 * twod.xy),
        sigma_time.yy + dt * (-adv.yy + k.yy - its * sigma_expl.yy + b2 * twod.yy))


def sigma_step_implicit(grid: Grid, params: ModelParams, dt: float,
                        sigma_time: TensorField, sigma_lag: TensorField,
                        u_vel: VectorField, phi_tau: np.ndarray,
                        phi_b2: np.ndarray) -> TensorField:
    """Per-cell linear stress update implicit in relaxation and stretching.

    Transport stays explicit on the lagged stress (it is the only term
    coupling neighbouring cells), so each cell yields a 3x3 system in
    (xx, xy, yy), solved as one batched dense solve.
    """
    grad_u = ops.grad_velocity_cc(grid, u_vel)
    gxx, gxy, gyx, gyy = grad_u
    twod = strain_rate_cc(grad_u)
    adv = advect_tensor(grid, u_vel, sigma_lag)
    its = inv_tau_s(params, phi_tau)
    b2 = params.ms0 * safe_phi_sq(params, phi_b2)
    beta = 1.0 / dt + its

    n = grid.n_cells
    mat = np.zeros((n, 3, 3))
    mat[:, 0, 0] = (beta - 2.0 * gxx).ravel()
    mat[:, 0, 1] = (-2.0 * gxy).ravel()
    mat[:, 1, 0] = (-gyx).ravel()
    mat[:, 1, 1] = (beta - (gxx + gyy)).ravel()
    mat[:, 1, 2] = (-gxy).ravel()
    mat[:, 2, 1] = (-2.0 * gyx).ravel()
    mat[:, 2, 2] = (beta - 2.0 * gyy).ravel()

    rhs = np.stack([
        (sigma_time.xx / dt + b2 * twod.xx - adv.xx).ravel(),
        (sigma_time.xy / dt + b2 * twod.xy - adv.xy).ravel(),
        (sigma_time.yy / dt + b2 * twod.yy - adv.yy).ravel()], axis=1)
    try:
        sol = np.linalg.solve(mat, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular per-cell stress system: {exc}") from exc
    shape = grid.shape
    return TensorField(sol[:, 0].reshape(shape), sol[:, 1].reshape(shape),
                       sol[:, 2].reshape(shape))


# ---------------------------------------------------------------------------
# monolithic (phi, q, u, p) system
# ---------------------------------------------------------------------------

@dataclass
class _CoupledSystem:
    """Assembled 5-block system; the stress force only enters the right-hand
    side, so fixpoint iterations reuse the matrix."""
    grid: Grid
    n: int
    dt: float
    mat: sp.csr_matrix          # row-scaled square system
    op: object                  # pressure-mean augmented operator
    rhs_base: np.ndarray        # scaled rhs without the stress force
    blocks: PhaseBlocks


def _assemble_coupled(grid: Grid, params: ModelParams, dt: float,
                      phi_n: np.ndarray, q_n: np.ndarray, u_n: VectorField,
                      phi_coef: np.ndarray, u_adv_q: VectorField,
                      u_conv: VectorField, eta_phi: np.ndarray,
                      time_coef: float) -> _CoupledSystem:
    """Build the implicit system coupling the phase pair with momentum and
    the divergence constraint.

    ``phi_coef`` is both the coefficient level and the phase-field level
    that the unknown velocity advects (and that the capillary force pairs
    with); ``u_adv_q`` advects the bulk-stress midpoint; ``u_conv`` is the
    explicit convecting velocity; ``time_coef`` is 1/dt when the velocity
    unknown is the end-of-step value and 2/dt when it is the midpoint.
    """
    n = grid.n_cells
    mats = operator_mats(grid)
    blocks = phase_blocks(grid, params, phi_n, q_n, phi_coef, dt,
                          u_adv=u_adv_q)

    grad_pk = ops.grad_cc(grid, phi_coef)
    gpx = grad_pk.ux.ravel()
    gpy = grad_pk.uy.ravel()
    # phase-field transport by the unknown velocity (face-pair average)
    adv_px = mats.bxc @ diag(gpx)
    adv_py = mats.byc @ diag(gpy)
    # capillary force: face-interpolated midpoint potential times grad(phi)
    kort_x = -(diag(gpx) @ (mats.axf @ blocks.a_mu))
    kort_y = -(diag(gpy) @ (mats.ayf @ blocks.a_mu))
    kort_rhs_x = gpx * (mats.axf @ blocks.mu_known)
    kort_rhs_y = gpy * (mats.ayf @ blocks.mu_known)

    eta = coefficients(params, eta_phi).eta
    axx, axy, ayx, ayy = viscous_matrix(grid, eta)
    cx, cy = convection_matrix(grid, u_conv)
    mom_xx = time_coef * mats.eye + cx - axx
    mom_yy = time_coef * mats.eye + cy - ayy

    mat = sp.bmat([
        [blocks.m_pp, blocks.m_pq, adv_px, adv_py, None],
        [blocks.m_qp, blocks.m_qq, None, None, None],
        [kort_x, None, mom_xx, -axy, mats.gx],
        [kort_y, None, -ayx, mom_yy, mats.gy],
        [None, None, mats.dx, mats.dy, None]], format="csr")

    rhs = np.concatenate([
        blocks.rhs_phi,
        blocks.rhs_q,
        time_coef * u_n.ux.ravel() + kort_rhs_x,
        time_coef * u_n.uy.ravel() + kort_rhs_y,
        np.zeros(n)])

    # scale the evolution rows by dt (the constraint rows stay as they are)
    row_scale = np.concatenate([np.full(4 * n, dt), np.ones(n)])
    mat_s = (sp.diags(row_scale) @ mat).tocsr()
    rhs_s = rhs * row_scale

    op = mean_augmented(mat_s, 4 * n, n)
    return _CoupledSystem(grid=grid, n=n, dt=dt, mat=mat_s, op=op,
                          rhs_base=rhs_s, blocks=blocks)


def _coupled_rhs(sys: _CoupledSystem, sigma_force: TensorField) -> np.ndarray:
    force = ops.div_tensor_to_faces(sys.grid, sigma_force)
    rhs = sys.rhs_base.copy()
    n = sys.n
    rhs[2 * n:3 * n] += sys.dt * force.ux.ravel()
    rhs[3 * n:4 * n] += sys.dt * force.uy.ravel()
    return rhs


def _solve_coupled(sys: _CoupledSystem, rhs: np.ndarray, x0: np.ndarray,
                   config: SolverConfig | None):
    result = solve(sys.op, rhs, x0=x0, config=config, precond_from=sys.mat)
    x = result.x
    n = sys.n
    shape = sys.grid.shape
    phi_new = x[:n].reshape(shape)
    q_new = x[n:2 * n].reshape(shape)
    u_sol = VectorField(x[2 * n:3 * n].reshape(shape),
                        x[3 * n:4 * n].reshape(shape))
    p_flat = x[4 * n:]
    p_new = (p_flat - p_flat.mean()).reshape(shape)
    return phi_new, q_new, u_sol, p_new, x


def _coupled_x0(state: FullState) -> np.ndarray:
    return np.concatenate([state.phi.ravel(), state.q.ravel(),
                           state.u.ux.ravel(), state.u.uy.ravel(),
                           state.p.ravel()])


# ---------------------------------------------------------------------------
# monolithic steppers
# ---------------------------------------------------------------------------

def _check_dt(dt: float) -> None:
    if not dt > 0.0:
        raise ValueError("time step must be positive")


def step_coupled(state: FullState, params: ModelParams, dt: float,
                 config: SolverConfig | None = None
                 ) -> tuple[FullState, StepAux]:
    """Backward-Euler coupled step: the new velocity advects the old phase
    field and receives the capillary force at the midpoint potential; the
    stress updates explicitly afterwards."""
    _check_dt(dt)
    grid = state.grid
    sys = _assemble_coupled(grid, params, dt, state.phi, state.q, state.u,
                            phi_coef=state.phi, u_adv_q=state.u,
                            u_conv=state.u, eta_phi=state.phi,
                            time_coef=1.0 / dt)
    phi_new, q_new, u_new, p_new, _ = _solve_coupled(
        sys, _coupled_rhs(sys, state.sigma), _coupled_x0(state), config)

    phi_half = 0.5 * (state.phi + phi_new)
    sigma_new = sigma_step_explicit(grid, params, dt, state.sigma, state.sigma,
                                    u_adv=state.u, u_grad=u_new,
                                    phi_tau=phi_half, phi_b2=phi_half)
    aux = finish_phase_aux(grid, params, sys.blocks, state.phi, state.q,
                           phi_new, q_new, state.phi, dt)
    aux.visc_u = u_new
    aux.eta_phi = state.phi
    aux.trace_sigma = state.sigma
    aux.trace_phi = phi_half
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_new,
                          u=u_new, p=p_new, t=state.t + dt,
                          step=state.step + 1)
    return new_state, aux


def _reconstruct_end(u_mid: VectorField, u_old: VectorField) -> VectorField:
    return VectorField(2.0 * u_mid.ux - u_old.ux, 2.0 * u_mid.uy - u_old.uy)


def step_coupled_cn(state: FullState, params: ModelParams, dt: float,
                    config: SolverConfig | None = None
                    ) -> tuple[FullState, StepAux]:
    """Midpoint coupled step: the velocity unknown is the half-step value
    (end value reconstructed by reflection), which removes the kinetic
    increment from the energy balance."""
    _check_dt(dt)
    grid = state.grid
    sys = _assemble_coupled(grid, params, dt, state.phi, state.q, state.u,
                            phi_coef=state.phi, u_adv_q=state.u,
                            u_conv=state.u, eta_phi=state.phi,
                            time_coef=2.0 / dt)
    phi_new, q_new, u_mid, p_new, _ = _solve_coupled(
        sys, _coupled_rhs(sys, state.sigma), _coupled_x0(state), config)
    u_new = _reconstruct_end(u_mid, state.u)

    phi_half = 0.5 * (state.phi + phi_new)
    sigma_new = sigma_step_explicit(grid, params, dt, state.sigma, state.sigma,
                                    u_adv=u_mid, u_grad=u_mid,
                                    phi_tau=phi_half, phi_b2=phi_half)
    aux = finish_phase_aux(grid, params, sys.blocks, state.phi, state.q,
                           phi_new, q_new, state.phi, dt)
    aux.u_mid = u_mid
    aux.visc_u = u_mid
    aux.eta_phi = state.phi
    aux.trace_sigma = state.sigma
    aux.trace_phi = phi_half
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_new,
                          u=u_new, p=p_new, t=state.t + dt,
                          step=state.step + 1)
    return new_state, aux


def step_coupled_o2(state: FullState, params: ModelParams, dt: float,
                    config: SolverConfig | None = None
                    ) -> tuple[FullState, StepAux]:
    """Two-step midpoint coupled step: every explicit level is the
    half-step-back extrapolation of the stored history (collapsing to the
    current value on the first step)."""
    _check_dt(dt)
    grid = state.grid
    phi_coef = extrapolated_level(state.phi, state.phi_prev)
    u_hist = extrapolated_vector(state.u, state.u_prev)
    sigma_expl = extrapolated_tensor(state.sigma, state.sigma_prev)

    sys = _assemble_coupled(grid, params, dt, state.phi, state.q, state.u,
                            phi_coef=phi_coef, u_adv_q=u_hist,
                            u_conv=u_hist, eta_phi=phi_coef,
                            time_coef=2.0 / dt)
    phi_new, q_new, u_mid, p_new, _ = _solve_coupled(
        sys, _coupled_rhs(sys, sigma_expl), _coupled_x0(state), config)
    u_new = _reconstruct_end(u_mid, state.u)

    phi_half = 0.5 * (state.phi + phi_new)
    sigma_new = sigma_step_explicit(grid, params, dt, state.sigma, sigma_expl,
                                    u_adv=u_mid, u_grad=u_mid,
                                    phi_tau=phi_half, phi_b2=phi_half)
    aux = finish_phase_aux(grid, params, sys.blocks, state.phi, state.q,
                           phi_new, q_new, phi_coef, dt)
    aux.u_mid = u_mid
    aux.visc_u = u_mid
    aux.eta_phi = phi_coef
    aux.trace_sigma = sigma_expl
    aux.trace_phi = phi_half
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_new,
                          u=u_new, p=p_new,
                          phi_prev=state.phi, u_prev=state.u,
                          sigma_prev=state.sigma,
                          t=state.t + dt, step=state.step + 1)
    return new_state, aux


# ---------------------------------------------------------------------------
# fixpoint helpers
# ---------------------------------------------------------------------------

def _flat_vector(v: VectorField) -> np.ndarray:
    return np.concatenate([v.ux.ravel(), v.uy.ravel()])


def _flat_tensor(t: TensorField) -> np.ndarray:
    return np.concatenate([t.xx.ravel(), t.xy.ravel(), t.yy.ravel()])


def _change_ok(new_flat: np.ndarray, old_flat: np.ndarray,
               delta: float) -> tuple[bool, float]:
    """Non-strict relative-change test plus the ratio for reporting."""
    diff = float(np.linalg.norm(new_flat - old_flat))
    base = float(np.linalg.norm(old_flat))
    if base > 0.0:
        return diff <= delta * base, diff / base
    return diff <= 0.0, (0.0 if diff == 0.0 else np.inf)


def step_coupled_implicit_stress(state: FullState, params: ModelParams,
                                 dt: float,
                                 fixpoint: FixpointConfig | None = None,
                                 config: SolverConfig | None = None
                                 ) -> tuple[FullState, StepAux, int]:
    """Midpoint coupled step with the stress treated implicitly through a
    fixpoint loop: the monolithic solve freezes the stress force at the
    previous iterate, then per-cell systems update the stress with the
    fresh half-step velocity. Stops when stress (and from the second
    iterate on, velocity and pressure) change relatively by at most delta.
    """
    _check_dt(dt)
    fp = fixpoint or FixpointConfig()
    grid = state.grid
    sys = _assemble_coupled(grid, params, dt, state.phi, state.q, state.u,
                            phi_coef=state.phi, u_adv_q=state.u,
                            u_conv=state.u, eta_phi=state.phi,
                            time_coef=2.0 / dt)

    sigma_l = state.sigma
    u_l = state.u
    p_l = state.p
    x_guess = _coupled_x0(state)
    last_change = np.inf
    for it in range(1, fp.max_l + 1):
        phi_new, q_new, u_mid, p_new, x_sol = _solve_coupled(
            sys, _coupled_rhs(sys, sigma_l), x_guess, config)
        phi_half = 0.5 * (state.phi + phi_new)
        sigma_new = sigma_step_implicit(grid, params, dt,
                                        sigma_time=state.sigma,
                                        sigma_lag=sigma_l, u_vel=u_mid,
                                        phi_tau=state.phi, phi_b2=phi_half)
        s_ok, s_ch = _change_ok(_flat_tensor(sigma_new),
                                _flat_tensor(sigma_l), fp.delta)
        u_ok, u_ch = _change_ok(_flat_vector(u_mid), _flat_vector(u_l),
                                fp.delta)
        p_ok, p_ch = _change_ok(p_new.ravel(), p_l.ravel(), fp.delta)
        # the velocity/pressure solve is a function of the frozen stress,
        # so on the first iterate an unchanged stress already certifies
        # the fixpoint; afterwards all three must settle
        converged = s_ok if it == 1 else (s_ok and u_ok and p_ok)
        last_change = s_ch if it == 1 else max(s_ch, u_ch, p_ch)
        sigma_l, u_l, p_l, x_guess = sigma_new, u_mid, p_new, x_sol
        if converged:
            break
    else:
        raise FixpointError(
            f"stress fixpoint did not converge in {fp.max_l} iterations "
            f"(last relative change {last_change:.3e})",
            last_change, fp.max_l)

    u_new = _reconstruct_end(u_l, state.u)
    aux = finish_phase_aux(grid, params, sys.blocks, state.phi, state.q,
                           phi_new, q_new, state.phi, dt)
    aux.u_mid = u_l
    aux.visc_u = u_l
    aux.eta_phi = state.phi
    aux.trace_sigma = sigma_l
    aux.trace_phi = state.phi
    aux.fixpoint_iters = it
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_l,
                          u=u_new, p=p_l, t=state.t + dt,
                          step=state.step + 1)
    return new_state, aux, it


# ---------------------------------------------------------------------------
# splitting scheme
# ---------------------------------------------------------------------------

def _splitting_phase_step(state: FullState, params: ModelParams, dt: float,
                          config: SolverConfig | None):
    """First substep: the phase pair with the old velocity's transport and
    the implicit phase-field-forced flux; materializes the tentative
    velocity afterwards."""
    grid = state.grid
    n = grid.n_cells
    blocks = phase_blocks(grid, params, state.phi, state.q, state.phi, dt,
                          u_adv=state.u, phase_field_forcing=True)
    adv_phi = ops.advect_conservative_central(grid, state.u, state.phi)
    mat = sp.bmat([[blocks.m_pp, blocks.m_pq],
                   [blocks.m_qp, blocks.m_qq]], format="csr")
    rhs = np.concatenate([blocks.rhs_phi - adv_phi.ravel(), blocks.rhs_q])
    x0 = np.concatenate([state.phi.ravel(), state.q.ravel()])
    result = solve(mat, rhs, x0=x0, config=config)
    phi_new = result.x[:n].reshape(grid.shape)
    q_new = result.x[n:].reshape(grid.shape)

    aux = finish_phase_aux(grid, params, blocks, state.phi, state.q,
                           phi_new, q_new, state.phi, dt)
    phi_f = ops.interp_cc_to_face(grid, state.phi)
    gmu = ops.grad_cc(grid, aux.mu_half)
    aux.u_star = VectorField(state.u.ux - dt * phi_f.ux * gmu.ux,
                             state.u.uy - dt * phi_f.uy * gmu.uy)
    return phi_new, q_new, aux


@dataclass
class _FluidSystem:
    """Velocity-pressure saddle system; constant across fixpoint iterates
    (the stress force only shifts the right-hand side)."""
    grid: Grid
    n: int
    dt: float
    mat: sp.csr_matrix
    op: object


def _assemble_fluid(grid: Grid, params: ModelParams, dt: float,
                    eta_phi: np.ndarray, conv_vel: VectorField) -> _FluidSystem:
    n = grid.n_cells
    mats = operator_mats(grid)
    eta = coefficients(params, eta_phi).eta
    axx, axy, ayx, ayy = viscous_matrix(grid, eta)
    cx, cy = convection_matrix(grid, conv_vel)
    mat = sp.bmat([
        [mats.eye / dt + cx - axx, -axy, mats.gx],
        [-ayx, mats.eye / dt + cy - ayy, mats.gy],
        [mats.dx, mats.dy, None]], format="csr")
    row_scale = np.concatenate([np.full(2 * n, dt), np.ones(n)])
    mat_s = (sp.diags(row_scale) @ mat).tocsr()
    op = mean_augmented(mat_s, 2 * n, n)
    return _FluidSystem(grid=grid, n=n, dt=dt, mat=mat_s, op=op)


def _solve_fluid(sys: _FluidSystem, rhs_u: VectorField, x0: np.ndarray,
                 config: SolverConfig | None):
    n = sys.n
    rhs = np.concatenate([sys.dt * rhs_u.ux.ravel(),
                          sys.dt * rhs_u.uy.ravel(), np.zeros(n)])
    result = solve(sys.op, rhs, x0=x0, config=config, precond_from=sys.mat)
    x = result.x
    shape = sys.grid.shape
    u_sol = VectorField(x[:n].reshape(shape), x[n:2 * n].reshape(shape))
    p_flat = x[2 * n:]
    p_new = (p_flat - p_flat.mean()).reshape(shape)
    return u_sol, p_new, x


def _solve_momentum_unconstrained(grid: Grid, params: ModelParams, dt: float,
                                  eta_phi: np.ndarray, conv_vel: VectorField,
                                  rhs_u: VectorField, x0: np.ndarray,
                                  config: SolverConfig | None) -> VectorField:
    """Implicit viscous/convective solve without the divergence constraint
    (the projection happens afterwards)."""
    n = grid.n_cells
    mats = operator_mats(grid)
    eta = coefficients(params, eta_phi).eta
    axx, axy, ayx, ayy = viscous_matrix(grid, eta)
    cx, cy = convection_matrix(grid, conv_vel)
    mat = sp.bmat([
        [mats.eye / dt + cx - axx, -axy],
        [-ayx, mats.eye / dt + cy - ayy]], format="csr")
    mat = (dt * mat).tocsr()
    rhs = np.concatenate([dt * rhs_u.ux.ravel(), dt * rhs_u.uy.ravel()])
    result = solve(mat, rhs, x0=x0, config=config)
    x = result.x
    return VectorField(x[:n].reshape(grid.shape), x[n:].reshape(grid.shape))


def step_splitting(state: FullState, params: ModelParams, dt: float,
                   mode: str = MODE_CHORIN,
                   config: SolverConfig | None = None
                   ) -> tuple[FullState, StepAux]:
    """Three-substep scheme: phase pair first (with the tentative-velocity
    flux folded in implicitly), then the fluid — either one saddle solve or
    a Chorin projection — and finally the explicit stress update."""
    _check_dt(dt)
    if mode not in (MODE_MONOLITHIC, MODE_CHORIN):
        raise ValueError(f"unknown splitting mode: {mode!r}")
    grid = state.grid
    phi_new, q_new, aux = _splitting_phase_step(state, params, dt, config)
    phi_half = 0.5 * (state.phi + phi_new)
    u_star = aux.u_star
    rhs_u = ops.div_tensor_to_faces(grid, state.sigma)
    rhs_u = VectorField(u_star.ux / dt + rhs_u.ux, u_star.uy / dt + rhs_u.uy)

    if mode == MODE_MONOLITHIC:
        sys = _assemble_fluid(grid, params, dt, eta_phi=phi_half,
                              conv_vel=state.u)
        x0 = np.concatenate([state.u.ux.ravel(), state.u.uy.ravel(),
                             state.p.ravel()])
        u_new, p_new, _ = _solve_fluid(sys, rhs_u, x0, config)
        aux.visc_u = u_new
        aux.eta_phi = phi_half
    else:
        x0 = np.concatenate([state.u.ux.ravel(), state.u.uy.ravel()])
        u_dag = _solve_momentum_unconstrained(grid, params, dt,
                                              eta_phi=state.phi,
                                              conv_vel=state.u, rhs_u=rhs_u,
                                              x0=x0, config=config)
        # pressure correction: lap(p) = -div(u_dag)/dt, u_new = u_dag + dt grad(p)
        mats = operator_mats(grid)
        div_dag = ops.div_face(grid, u_dag)
        p_flat = solve_cg_zero_mean(-mats.lap, div_dag.ravel() / dt,
                                    x0=state.p.ravel())
        p_new = (p_flat - p_flat.mean()).reshape(grid.shape)
        gp = ops.grad_cc(grid, p_new)
        u_new = VectorField(u_dag.ux + dt * gp.ux, u_dag.uy + dt * gp.uy)
        aux.u_dagger = u_dag
        aux.visc_u = u_dag
        aux.eta_phi = state.phi

    sigma_new = sigma_step_explicit(grid, params, dt, state.sigma, state.sigma,
                                    u_adv=u_new, u_grad=u_new,
                                    phi_tau=phi_half, phi_b2=phi_half)
    aux.trace_sigma = state.sigma
    aux.trace_phi = phi_half
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_new,
                          u=u_new, p=p_new, t=state.t + dt,
                          step=state.step + 1)
    return new_state, aux


def step_splitting_implicit(state: FullState, params: ModelParams, dt: float,
                            fixpoint: FixpointConfig | None = None,
                            config: SolverConfig | None = None
                            ) -> tuple[FullState, StepAux, int]:
    """Splitting scheme whose fluid and stress substeps iterate to a joint
    fixpoint: the saddle solve freezes the stress force at the previous
    iterate, the per-cell implicit stress solve uses the fresh velocity."""
    _check_dt(dt)
    fp = fixpoint or FixpointConfig()
    grid = state.grid
    phi_new, q_new, aux = _splitting_phase_step(state, params, dt, config)
    phi_half = 0.5 * (state.phi + phi_new)
    u_star = aux.u_star
    sys = _assemble_fluid(grid, params, dt, eta_phi=phi_half,
                          conv_vel=state.u)

    sigma_l = state.sigma
    u_l = state.u
    p_l = state.p
    x_guess = np.concatenate([state.u.ux.ravel(), state.u.uy.ravel(),
                              state.p.ravel()])
    last_change = np.inf
    for it in range(1, fp.max_l + 1):
        force = ops.div_tensor_to_faces(grid, sigma_l)
        rhs_u = VectorField(u_star.ux / dt + force.ux,
                            u_star.uy / dt + force.uy)
        u_new, p_new, x_sol = _solve_fluid(sys, rhs_u, x_guess, config)
        sigma_new = sigma_step_implicit(grid, params, dt,
                                        sigma_time=state.sigma,
                                        sigma_lag=sigma_l, u_vel=u_new,
                                        phi_tau=phi_half, phi_b2=phi_half)
        s_ok, s_ch = _change_ok(_flat_tensor(sigma_new),
                                _flat_tensor(sigma_l), fp.delta)
        u_ok, u_ch = _change_ok(_flat_vector(u_new), _flat_vector(u_l),
                                fp.delta)
        p_ok, p_ch = _change_ok(p_new.ravel(), p_l.ravel(), fp.delta)
        converged = s_ok if it == 1 else (s_ok and u_ok and p_ok)
        last_change = s_ch if it == 1 else max(s_ch, u_ch, p_ch)
        sigma_l, u_l, p_l, x_guess = sigma_new, u_new, p_new, x_sol
        if converged:
            break
    else:
        raise FixpointError(
            f"stress fixpoint did not converge in {fp.max_l} iterations "
            f"(last relative change {last_change:.3e})",
            last_change, fp.max_l)

    aux.visc_u = u_l
    aux.eta_phi = phi_half
    aux.trace_sigma = sigma_l
    aux.trace_phi = phi_half
    aux.fixpoint_iters = it
    new_state = FullState(grid=grid, phi=phi_new, q=q_new, sigma=sigma_l,
                          u=u_l, p=p_l, t=state.t + dt, step=state.step + 1)
    return new_state, aux, it
