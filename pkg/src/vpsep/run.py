"""Trajectory driver and the time-refinement (order-of-convergence) harness."""

from __future__ import annotations

import math
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import operators as ops
from .config import (PRESET_SINE, EocConfig, RunConfig)
from .energy import breakdown_full, breakdown_simplified
from .full import (step_coupled, step_coupled_cn, step_coupled_implicit_stress,
                   step_coupled_o2, step_splitting, step_splitting_implicit,
                   MODE_CHORIN, MODE_MONOLITHIC)
from .grid import all_finite
from .initial_data import (make_full_state, make_simplified_state,
                           phi_random_uniform, phi_smooth_sine)
from .simplified import step_o1, step_o2
from .state import SIMPLIFIED_KINDS, SchemeKind


class NanAbort(RuntimeError):
    """A field became non-finite; partial outputs have been flushed."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class RunSummary:
    out_dir: str
    energy_path: str
    final_snapshot_path: str
    steps_completed: int
    wall_time: float


def initial_state(cfg: RunConfig):
    """Build the configured initial state (phase field per preset; stress,
    velocity and pressure at rest)."""
    grid = cfg.grid
    if cfg.preset == PRESET_SINE:
        phi = phi_smooth_sine(grid)
    else:
        phi = phi_random_uniform(grid, cfg.phi0_mean, cfg.perturb_amplitude,
                                 cfg.seed)
    if cfg.is_simplified:
        return make_simplified_state(grid, phi)
    return make_full_state(grid, cfg.model, phi, cfg.sigma_init)


def make_stepper(cfg: RunConfig):
    """Bind the configured scheme into a ``state -> (state, aux)`` callable."""
    params, solver, fixpoint = cfg.model, cfg.solver, cfg.fixpoint
    kind = cfg.scheme
    if kind is SchemeKind.SIMPLIFIED_O1:
        return lambda s: step_o1(s, params, cfg.dt, config=solver)
    if kind is SchemeKind.SIMPLIFIED_O2:
        return lambda s: step_o2(s, params, cfg.dt, config=solver)
    if kind is SchemeKind.COUPLED:
        return lambda s: step_coupled(s, params, cfg.dt, config=solver)
    if kind is SchemeKind.COUPLED_CN:
        return lambda s: step_coupled_cn(s, params, cfg.dt, config=solver)
    if kind is SchemeKind.COUPLED_O2:
        return lambda s: step_coupled_o2(s, params, cfg.dt, config=solver)
    if kind is SchemeKind.COUPLED_IMPLICIT_STRESS:
        return lambda s: step_coupled_implicit_stress(
            s, params, cfg.dt, fixpoint=fixpoint, config=solver)[:2]
    if kind is SchemeKind.SPLITTING_MONOLITHIC:
        return lambda s: step_splitting(s, params, cfg.dt,
                                        mode=MODE_MONOLITHIC, config=solver)
    if kind is SchemeKind.SPLITTING_CHORIN:
        return lambda s: step_splitting(s, params, cfg.dt, mode=MODE_CHORIN,
                                        config=solver)
    if kind is SchemeKind.SPLITTING_IMPLICIT:
        return lambda s: step_splitting_implicit(
            s, params, cfg.dt, fixpoint=fixpoint, config=solver)[:2]
    raise ValueError(f"unhandled scheme: {kind}")  # pragma: no cover


def _state_fields(state) -> list[np.ndarray]:
    fields = [state.phi, state.q]
    sigma = getattr(state, "sigma", None)
    if sigma is not None:
        fields.extend([sigma.xx, sigma.xy, sigma.yy,
                       state.u.ux, state.u.uy, state.p])
    return fields


def _breakdown(cfg: RunConfig, state, aux=None, state_old=None):
    if cfg.is_simplified:
        return breakdown_simplified(cfg.grid, cfg.model, state, aux,
                                    state_old, cfg.dt)
    return breakdown_full(cfg.grid, cfg.model, state, aux, state_old,
                          cfg.dt, cfg.scheme)


def run(cfg: RunConfig, quiet: bool = False) -> RunSummary:
    """Advance ``n_steps`` steps, logging energy rows and snapshots.

    Solver failures propagate; non-finite fields raise :class:`NanAbort`.
    In both cases the partial energy series is already on disk.
    """
    from .output import EnergyWriter, write_snapshot

    os.makedirs(cfg.out_dir, exist_ok=True)
    energy_path = os.path.join(cfg.out_dir, "energy.csv")
    final_path = os.path.join(cfg.out_dir, "final.vtk")
    stepper = make_stepper(cfg)
    state = initial_state(cfg)

    started = time.perf_counter()
    steps_done = 0
    with EnergyWriter(energy_path) as writer:
        writer.write(0, state.t, _breakdown(cfg, state))
        for k in range(1, cfg.n_steps + 1):
            new_state, aux = stepper(state)
            if not all_finite(*_state_fields(new_state)):
                write_snapshot(state, os.path.join(cfg.out_dir, "abort.vtk"))
                raise NanAbort(
                    f"non-finite field after step {k} (t={new_state.t:g}); "
                    f"last finite state written to abort.vtk", k)
            if k % cfg.energy_every == 0:
                writer.write(k, new_state.t,
                             _breakdown(cfg, new_state, aux, state))
            if cfg.snapshot_every and k % cfg.snapshot_every == 0:
                write_snapshot(new_state,
                               os.path.join(cfg.out_dir, f"snap_{k:06d}.vtk"))
            state = new_state
            steps_done = k
            if not quiet and (k % max(1, cfg.n_steps // 10) == 0):
                print(f"step {k}/{cfg.n_steps} t={state.t:g}", file=sys.stderr)
    write_snapshot(state, final_path)
    wall = time.perf_counter() - started
    return RunSummary(out_dir=cfg.out_dir, energy_path=energy_path,
                      final_snapshot_path=final_path,
                      steps_completed=steps_done, wall_time=wall)


# ---------------------------------------------------------------------------
# time-refinement study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EocRow:
    dt: float
    l1_phi: float
    eoc_phi: float | None
    l1_q: float
    eoc_q: float | None


def _advance_to(cfg: RunConfig):
    stepper = make_stepper(cfg)
    state = initial_state(cfg)
    for _ in range(cfg.n_steps):
        state, _aux = stepper(state)
    return state


def run_eoc(eoc: EocConfig, quiet: bool = False) -> list[EocRow]:
    """Run every ladder rung and the reference to t_final; report L1 errors
    and the dyadic convergence rates between consecutive rungs."""
    if eoc.base.scheme not in SIMPLIFIED_KINDS:
        raise ValueError("time-refinement study expects a simplified scheme")
    grid = eoc.base.grid
    vol = grid.cell_volume

    ref_cfg = replace(eoc.base, dt=eoc.dt_ref,
                      n_steps=eoc.steps_for(eoc.dt_ref))
    if not quiet:
        print(f"reference dt={eoc.dt_ref:g} ({ref_cfg.n_steps} steps)",
              file=sys.stderr)
    ref = _advance_to(ref_cfg)

    errors: list[tuple[float, float, float]] = []
    for dt in eoc.dt_ladder:
        cfg = replace(eoc.base, dt=dt, n_steps=eoc.steps_for(dt))
        if not quiet:
            print(f"rung dt={dt:g} ({cfg.n_steps} steps)", file=sys.stderr)
        state = _advance_to(cfg)
        err_phi = vol * float(np.sum(np.abs(state.phi - ref.phi)))
        err_q = vol * float(np.sum(np.abs(state.q - ref.q)))
        errors.append((dt, err_phi, err_q))

    rows: list[EocRow] = []
    for k, (dt, e_phi, e_q) in enumerate(errors):
        if k == 0:
            rows.append(EocRow(dt, e_phi, None, e_q, None))
        else:
            _, prev_phi, prev_q = errors[k - 1]
            rows.append(EocRow(dt, e_phi, math.log2(prev_phi / e_phi),
                               e_q, math.log2(prev_q / e_q)))
    return rows


def write_eoc_csv(rows: list[EocRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dt,l1_err_phi,eoc_phi,l1_err_q,eoc_q\n")
        for row in rows:
            ep = "" if row.eoc_phi is None else "%.17g" % row.eoc_phi
            eq = "" if row.eoc_q is None else "%.17g" % row.eoc_q
            fh.write("%.17g,%.17g,%s,%.17g,%s\n"
                     % (row.dt, row.l1_phi, ep, row.l1_q, eq))


def format_eoc_table(rows: list[EocRow]) -> str:
    lines = [f"{'dt':>12} {'L1(phi)':>14} {'EOC(phi)':>9} "
             f"{'L1(q)':>14} {'EOC(q)':>9}"]
    for row in rows:
        ep = "    -" if row.eoc_phi is None else f"{row.eoc_phi:9.3f}"
        eq = "    -" if row.eoc_q is None else f"{row.eoc_q:9.3f}"
        lines.append(f"{row.dt:12.6g} {row.l1_phi:14.6e} {ep:>9} "
                     f"{row.l1_q:14.6e} {eq:>9}")
    return "\n".join(lines)
