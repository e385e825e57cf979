"""Flow-coupled steppers: fixed points, incompressibility, energy laws.

The stress-implicit per-cell solve is checked against an independent
einsum reconstruction of the linearised update; scheme equivalences
(two-step bootstrap, zero-modulus fixpoint collapse) are checked bitwise.
"""

import dataclasses

import numpy as np
import pytest

from conftest import band_limited, smooth_phase, smooth_tensor, stream_velocity
from vpsep import operators as ops
from vpsep.energy import discrete_law_residual, inv_tau_s, total_energy_full
from vpsep.full import (MODE_CHORIN, MODE_MONOLITHIC, FixpointConfig,
                        FixpointError, sigma_step_explicit,
                        sigma_step_implicit, step_coupled, step_coupled_cn,
                        step_coupled_implicit_stress, step_coupled_o2,
                        step_splitting, step_splitting_implicit)
from vpsep.grid import Grid, TensorField, VectorField
from vpsep.linalg import SolverConfig, SolverError
from vpsep.materials import ModelParams, safe_phi_sq
from vpsep.state import FullState, SchemeKind

TIGHT = SolverConfig(rtol=1e-12)

FULL_KINDS = [
    SchemeKind.COUPLED,
    SchemeKind.COUPLED_CN,
    SchemeKind.COUPLED_O2,
    SchemeKind.COUPLED_IMPLICIT_STRESS,
    SchemeKind.SPLITTING_MONOLITHIC,
    SchemeKind.SPLITTING_CHORIN,
    SchemeKind.SPLITTING_IMPLICIT,
]


def advance(kind: SchemeKind, state: FullState, params: ModelParams,
            dt: float):
    """One step of any flow-coupled scheme, normalised to (state, aux)."""
    if kind is SchemeKind.COUPLED:
        return step_coupled(state, params, dt, config=TIGHT)
    if kind is SchemeKind.COUPLED_CN:
        return step_coupled_cn(state, params, dt, config=TIGHT)
    if kind is SchemeKind.COUPLED_O2:
        return step_coupled_o2(state, params, dt, config=TIGHT)
    if kind is SchemeKind.COUPLED_IMPLICIT_STRESS:
        new, aux, _ = step_coupled_implicit_stress(state, params, dt,
                                                   config=TIGHT)
        return new, aux
    if kind is SchemeKind.SPLITTING_MONOLITHIC:
        return step_splitting(state, params, dt, mode=MODE_MONOLITHIC,
                              config=TIGHT)
    if kind is SchemeKind.SPLITTING_CHORIN:
        return step_splitting(state, params, dt, mode=MODE_CHORIN,
                              config=TIGHT)
    new, aux, _ = step_splitting_implicit(state, params, dt, config=TIGHT)
    return new, aux


def quiescent_state(grid: Grid, level: float = 0.5) -> FullState:
    zero_t = TensorField(grid.zeros(), grid.zeros(), grid.zeros())
    zero_v = VectorField(grid.zeros(), grid.zeros())
    return FullState(grid=grid, phi=grid.full(level), q=grid.zeros(),
                     sigma=zero_t, u=zero_v, p=grid.zeros())


def flow_state(grid: Grid, seed: int = 7) -> FullState:
    """Smooth, genuinely active state: mixed phase field, nonzero bulk
    stress, divergence-free swirl and an almost-isotropic shear stress."""
    return FullState(
        grid=grid,
        phi=smooth_phase(grid, seed),
        q=0.1 * band_limited(grid, seed + 10),
        sigma=smooth_tensor(grid, seed + 30),
        u=stream_velocity(grid, seed + 20, max_speed=0.5),
        p=grid.zeros())


def tensor_max(t: TensorField) -> float:
    return max(np.abs(t.xx).max(), np.abs(t.xy).max(), np.abs(t.yy).max())


# ---------------------------------------------------------------------------
# fixed points and counters
# ---------------------------------------------------------------------------

class TestQuiescentFixedPoint:
    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_uniform_rest_state_is_stationary(self, grid16, params, kind):
        state = quiescent_state(grid16)
        new, _ = advance(kind, state, params, dt=1e-3)
        assert np.abs(new.phi - 0.5).max() < 1e-12
        assert np.abs(new.q).max() < 1e-12
        assert np.abs(new.u.ux).max() < 1e-12
        assert np.abs(new.u.uy).max() < 1e-12
        assert np.abs(new.p).max() < 1e-10
        assert tensor_max(new.sigma) < 1e-12

    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_counters_advance(self, grid16, params, kind):
        state = quiescent_state(grid16)
        new, _ = advance(kind, state, params, dt=1e-3)
        assert new.step == 1
        assert new.t == pytest.approx(1e-3)

    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_inputs_not_mutated(self, grid16, params, kind):
        state = flow_state(grid16)
        before = (state.phi.copy(), state.q.copy(), state.u.ux.copy(),
                  state.u.uy.copy(), state.sigma.xx.copy(),
                  state.sigma.xy.copy(), state.p.copy())
        advance(kind, state, params, dt=1e-3)
        after = (state.phi, state.q, state.u.ux, state.u.uy,
                 state.sigma.xx, state.sigma.xy, state.p)
        for old, cur in zip(before, after):
            assert np.array_equal(old, cur)

    @pytest.mark.parametrize("kind", [SchemeKind.COUPLED,
                                      SchemeKind.SPLITTING_CHORIN],
                             ids=lambda k: k.value)
    def test_nonpositive_dt_rejected(self, grid16, params, kind):
        state = quiescent_state(grid16)
        with pytest.raises(ValueError, match="time step"):
            advance(kind, state, params, dt=0.0)

    def test_unknown_splitting_mode_rejected(self, grid16, params):
        state = quiescent_state(grid16)
        with pytest.raises(ValueError, match="splitting mode"):
            step_splitting(state, params, 1e-3, mode="projection")


# ---------------------------------------------------------------------------
# constraints: divergence and mass
# ---------------------------------------------------------------------------

class TestConstraints:
    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_velocity_stays_divergence_free(self, grid16, params, kind):
        state = flow_state(grid16)
        h = min(grid16.hx, grid16.hy)
        div0 = np.abs(ops.div_face(grid16, state.u)).max()
        assert div0 < 1e-12  # stream-function start is exactly solenoidal
        for _ in range(3):
            state, _ = advance(kind, state, params, dt=1e-3)
            umax = max(np.abs(state.u.ux).max(), np.abs(state.u.uy).max())
            bound = 1e-7 * max(1.0, umax / h)
            assert np.abs(ops.div_face(grid16, state.u)).max() < bound

    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_phase_mass_conserved(self, grid16, params, kind):
        state = flow_state(grid16)
        total0 = float(state.phi.sum())
        for _ in range(3):
            state, _ = advance(kind, state, params, dt=1e-3)
        assert abs(float(state.phi.sum()) - total0) < 1e-9 * abs(total0)

    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_pressure_mean_is_zero(self, grid16, params, kind):
        state = flow_state(grid16)
        new, _ = advance(kind, state, params, dt=1e-3)
        assert abs(float(new.p.mean())) < 1e-12 * max(1.0, np.abs(new.p).max())


# ---------------------------------------------------------------------------
# per-scheme discrete energy identities
# ---------------------------------------------------------------------------

class TestEnergyLaw:
    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_residual_at_solver_tolerance(self, grid16, params, kind):
        state = flow_state(grid16)
        dt = 1e-3
        new, aux = advance(kind, state, params, dt)
        e_old = total_energy_full(grid16, params, state.phi, state.q,
                                  state.sigma, state.u)
        res = discrete_law_residual(kind, grid16, params, state, new, aux, dt)
        assert res <= 1e-7 * max(1.0, abs(e_old))

    @pytest.mark.parametrize("kind", FULL_KINDS, ids=lambda k: k.value)
    def test_residual_detects_corrupted_phase_field(self, grid16, params,
                                                    kind):
        state = flow_state(grid16)
        dt = 1e-3
        new, aux = advance(kind, state, params, dt)
        base = discrete_law_residual(kind, grid16, params, state, new, aux, dt)
        bad = dataclasses.replace(
            new, phi=new.phi + 1e-5 * band_limited(grid16, 99))
        res = discrete_law_residual(kind, grid16, params, state, bad, aux, dt)
        assert res > 100.0 * max(base, 1e-12)


# ---------------------------------------------------------------------------
# stress updates
# ---------------------------------------------------------------------------

class TestStressUpdate:
    def test_implicit_relaxation_without_flow(self, grid16, params):
        sigma = smooth_tensor(grid16, 3)
        phi = smooth_phase(grid16, 4)
        rest = VectorField(grid16.zeros(), grid16.zeros())
        dt = 0.05
        out = sigma_step_implicit(grid16, params, dt, sigma_time=sigma,
                                  sigma_lag=sigma, u_vel=rest,
                                  phi_tau=phi, phi_b2=phi)
        shrink = 1.0 / (1.0 + dt * inv_tau_s(params, phi))
        for got, ref in zip(out, sigma):
            np.testing.assert_allclose(got, ref * shrink, rtol=1e-13)

    def test_implicit_solve_satisfies_linear_update(self, grid16, params):
        """Independent per-cell residual of the linearised stress update:
        (s_new - s_time)/dt + adv(s_lag) =
            G s_new + s_new G^T - s_new/tau + b2 * (G + G^T)
        with G the cell-centred velocity gradient, rebuilt here via einsum.
        """
        dt = 0.05
        sigma_time = smooth_tensor(grid16, 3)
        sigma_lag = smooth_tensor(grid16, 11)
        u = stream_velocity(grid16, 5, max_speed=0.4)
        phi_tau = smooth_phase(grid16, 6)
        phi_b2 = smooth_phase(grid16, 7)
        out = sigma_step_implicit(grid16, params, dt, sigma_time=sigma_time,
                                  sigma_lag=sigma_lag, u_vel=u,
                                  phi_tau=phi_tau, phi_b2=phi_b2)

        gxx, gxy, gyx, gyy = ops.grad_velocity_cc(grid16, u)
        n = grid16.n_cells
        grad = np.empty((n, 2, 2))
        grad[:, 0, 0] = gxx.ravel()
        grad[:, 0, 1] = gxy.ravel()
        grad[:, 1, 0] = gyx.ravel()
        grad[:, 1, 1] = gyy.ravel()
        s_new = np.empty((n, 2, 2))
        s_new[:, 0, 0] = out.xx.ravel()
        s_new[:, 0, 1] = out.xy.ravel()
        s_new[:, 1, 0] = out.xy.ravel()
        s_new[:, 1, 1] = out.yy.ravel()

        stretch = (np.einsum("nij,njk->nik", grad, s_new)
                   + np.einsum("nij,nkj->nik", s_new, grad))
        twod = grad + grad.transpose(0, 2, 1)
        its = inv_tau_s(params, phi_tau).ravel()[:, None, None]
        b2 = (params.ms0 * safe_phi_sq(params, phi_b2)).ravel()[:, None, None]

        adv_t = TensorField(
            ops.advect_conservative_upwind(grid16, u, sigma_lag.xx),
            ops.advect_conservative_upwind(grid16, u, sigma_lag.xy),
            ops.advect_conservative_upwind(grid16, u, sigma_lag.yy))
        adv = np.empty((n, 2, 2))
        adv[:, 0, 0] = adv_t.xx.ravel()
        adv[:, 0, 1] = adv_t.xy.ravel()
        adv[:, 1, 0] = adv_t.xy.ravel()
        adv[:, 1, 1] = adv_t.yy.ravel()
        s_time = np.empty((n, 2, 2))
        s_time[:, 0, 0] = sigma_time.xx.ravel()
        s_time[:, 0, 1] = sigma_time.xy.ravel()
        s_time[:, 1, 0] = sigma_time.xy.ravel()
        s_time[:, 1, 1] = sigma_time.yy.ravel()

        resid = ((s_new - s_time) / dt + adv
                 - stretch + its * s_new - b2 * twod)
        scale = max(1.0, np.abs(s_new).max() / dt)
        assert np.abs(resid).max() < 1e-12 * scale

    def test_implicit_matches_explicit_for_small_steps(self, grid16, params):
        """Both updates linearise the same dynamics, so their difference
        must shrink like dt^2 (one extra order beyond the update itself)."""
        sigma = smooth_tensor(grid16, 3)
        phi = smooth_phase(grid16, 4)
        u = stream_velocity(grid16, 5, max_speed=0.4)
        diffs = []
        for dt in (1e-3, 5e-4, 2.5e-4):
            ex = sigma_step_explicit(grid16, params, dt, sigma, sigma,
                                     u_adv=u, u_grad=u, phi_tau=phi,
                                     phi_b2=phi)
            im = sigma_step_implicit(grid16, params, dt, sigma_time=sigma,
                                     sigma_lag=sigma, u_vel=u,
                                     phi_tau=phi, phi_b2=phi)
            diffs.append(max(np.abs(ex.xx - im.xx).max(),
                             np.abs(ex.xy - im.xy).max(),
                             np.abs(ex.yy - im.yy).max()))
        assert 3.5 < diffs[0] / diffs[1] < 4.5
        assert 3.5 < diffs[1] / diffs[2] < 4.5


# ---------------------------------------------------------------------------
# fixpoint behaviour
# ---------------------------------------------------------------------------

class TestFixpoint:
    def test_zero_modulus_splitting_collapses_to_one_iteration(self, grid16):
        params = ModelParams(ms0=0.0)
        state = flow_state(grid16)
        state = dataclasses.replace(
            state, sigma=TensorField(grid16.zeros(), grid16.zeros(),
                                     grid16.zeros()))
        mono, _ = step_splitting(state, params, 1e-3, mode=MODE_MONOLITHIC,
                                 config=TIGHT)
        fix, _, its = step_splitting_implicit(state, params, 1e-3,
                                              config=TIGHT)
        assert its == 1
        assert np.array_equal(mono.phi, fix.phi)
        assert np.array_equal(mono.q, fix.q)
        assert np.array_equal(mono.u.ux, fix.u.ux)
        assert np.array_equal(mono.u.uy, fix.u.uy)
        assert np.array_equal(mono.p, fix.p)
        assert tensor_max(fix.sigma) == 0.0

    def test_zero_modulus_coupled_collapses_to_midpoint_scheme(self, grid16):
        params = ModelParams(ms0=0.0)
        state = flow_state(grid16)
        state = dataclasses.replace(
            state, sigma=TensorField(grid16.zeros(), grid16.zeros(),
                                     grid16.zeros()))
        ref, _ = step_coupled_cn(state, params, 1e-3, config=TIGHT)
        fix, _, its = step_coupled_implicit_stress(state, params, 1e-3,
                                                   config=TIGHT)
        assert its == 1
        assert np.array_equal(ref.phi, fix.phi)
        assert np.array_equal(ref.u.ux, fix.u.ux)
        assert np.array_equal(ref.u.uy, fix.u.uy)
        assert tensor_max(fix.sigma) == 0.0

    @pytest.mark.parametrize("stepper", [step_coupled_implicit_stress,
                                         step_splitting_implicit],
                             ids=["coupled", "splitting"])
    def test_iteration_counts_are_reported(self, grid16, params, stepper):
        state = flow_state(grid16)
        new, aux, its = stepper(state, params, 1e-3, config=TIGHT)
        assert its >= 1
        assert aux.fixpoint_iters == its
        assert new.step == 1

    def test_exhausted_iteration_budget_raises(self, grid16, params):
        state = flow_state(grid16)
        fp = FixpointConfig(delta=1e-16, max_l=1)
        with pytest.raises(FixpointError, match="did not converge") as info:
            step_splitting_implicit(state, params, 1e-3, fixpoint=fp,
                                    config=TIGHT)
        assert info.value.iterations == 1
        assert np.isfinite(info.value.last_change)
        assert info.value.last_change > 1e-16
        assert isinstance(info.value, SolverError)

    def test_fixpoint_config_validation(self):
        with pytest.raises(ValueError, match="delta"):
            FixpointConfig(delta=0.0)
        with pytest.raises(ValueError, match="iteration cap"):
            FixpointConfig(max_l=0)

    def test_tighter_delta_needs_at_least_as_many_iterations(self, grid16,
                                                             params):
        state = flow_state(grid16)
        _, _, loose = step_splitting_implicit(
            state, params, 1e-3, fixpoint=FixpointConfig(delta=1e-4),
            config=TIGHT)
        _, _, tight = step_splitting_implicit(
            state, params, 1e-3, fixpoint=FixpointConfig(delta=1e-10),
            config=TIGHT)
        assert tight >= loose


# ---------------------------------------------------------------------------
# two-step history
# ---------------------------------------------------------------------------

class TestTwoStepCoupled:
    def test_first_step_matches_one_step_midpoint_scheme(self, grid16,
                                                         params):
        state = flow_state(grid16)
        ref, _ = step_coupled_cn(state, params, 1e-3, config=TIGHT)
        two, _ = step_coupled_o2(state, params, 1e-3, config=TIGHT)
        assert np.array_equal(ref.phi, two.phi)
        assert np.array_equal(ref.q, two.q)
        assert np.array_equal(ref.u.ux, two.u.ux)
        assert np.array_equal(ref.u.uy, two.u.uy)
        assert np.array_equal(ref.p, two.p)
        assert np.array_equal(ref.sigma.xx, two.sigma.xx)
        assert np.array_equal(ref.sigma.xy, two.sigma.xy)
        assert np.array_equal(ref.sigma.yy, two.sigma.yy)

    def test_history_is_recorded_and_used(self, grid16, params):
        state = flow_state(grid16)
        two, _ = step_coupled_o2(state, params, 1e-3, config=TIGHT)
        assert two.phi_prev is state.phi
        assert two.u_prev is state.u
        assert two.sigma_prev is state.sigma

        second_two, _ = step_coupled_o2(two, params, 1e-3, config=TIGHT)
        cn_like = dataclasses.replace(two, phi_prev=None, u_prev=None,
                                      sigma_prev=None)
        second_cn, _ = step_coupled_o2(cn_like, params, 1e-3, config=TIGHT)
        diff = np.abs(second_two.phi - second_cn.phi).max()
        assert diff > 1e-14  # extrapolated coefficients genuinely differ
