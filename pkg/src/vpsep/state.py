"""Solution-state containers and per-step auxiliary records.

States are immutable snapshots; steppers return new instances. ``StepAux``
carries the intermediate fields a completed step actually used (half-step
chemical potential, tentative velocities, explicit coefficient levels), so
the energy diagnostics can re-assemble the matching discrete energy law
term by term.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, TensorField, VectorField


class SchemeKind(enum.Enum):
    SIMPLIFIED_O1 = "o1"
    SIMPLIFIED_O2 = "o2"
    COUPLED = "coupled"
    COUPLED_CN = "coupled_cn"
    COUPLED_O2 = "coupled_o2"
    COUPLED_IMPLICIT_STRESS = "coupled_implicit_stress"
    SPLITTING_MONOLITHIC = "splitting_monolithic"
    SPLITTING_CHORIN = "splitting_chorin"
    SPLITTING_IMPLICIT = "splitting_implicit"


SIMPLIFIED_KINDS = (SchemeKind.SIMPLIFIED_O1, SchemeKind.SIMPLIFIED_O2)
TWO_STEP_KINDS = (SchemeKind.SIMPLIFIED_O2, SchemeKind.COUPLED_O2)
FIXPOINT_KINDS = (
    SchemeKind.COUPLED_IMPLICIT_STRESS,
    SchemeKind.SPLITTING_IMPLICIT,
)


@dataclass(frozen=True)
class SimplifiedState:
    """Phase field and bulk stress of the diffusive model."""
    grid: Grid
    phi: np.ndarray
    q: np.ndarray
    phi_prev: np.ndarray | None = None
    t: float = 0.0
    step: int = 0


@dataclass(frozen=True)
class FullState:
    """Phase field, bulk stress, shear stress, velocity and pressure."""
    grid: Grid
    phi: np.ndarray
    q: np.ndarray
    sigma: TensorField
    u: VectorField
    p: np.ndarray
    phi_prev: np.ndarray | None = None
    u_prev: VectorField | None = None
    sigma_prev: TensorField | None = None
    t: float = 0.0
    step: int = 0


@dataclass
class StepAux:
    """Intermediate quantities of one completed step, for diagnostics.

    ``phi_coef`` is the explicit phase-field level the step used for
    mobility / relaxation / bulk-modulus coefficients (previous value for
    one-step schemes, the 3/2-extrapolation for two-step schemes). The
    remaining fields are populated only where the scheme defines them.
    """
    mu_half: np.ndarray
    q_half: np.ndarray
    phi_coef: np.ndarray
    c_mu: float = 0.0
    flux: VectorField | None = None          # M[b grad(mu) - grad(A1 q)] on faces
    u_star: VectorField | None = None        # phase-field-forced tentative velocity
    u_dagger: VectorField | None = None      # pre-projection velocity (Chorin)
    u_mid: VectorField | None = None         # half-step velocity of CN-type schemes
    visc_u: VectorField | None = None        # velocity the viscous dissipation acts on
    eta_phi: np.ndarray | None = None        # phi level of the viscosity coefficient
    trace_sigma: TensorField | None = None   # stress level in the trace dissipation
    trace_phi: np.ndarray | None = None      # phi level in the trace dissipation
    fixpoint_iters: int = 0


def extrapolated_level(current: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    """Second-order extrapolation to the old half step; collapses to the
    current value (same array, no arithmetic) on the bootstrap step."""
    if previous is None or previous is current:
        return current
    return 1.5 * current - 0.5 * previous


def extrapolated_vector(current: VectorField, previous: VectorField | None) -> VectorField:
    if previous is None or previous is current:
        return current
    return VectorField(1.5 * current.ux - 0.5 * previous.ux,
                       1.5 * current.uy - 0.5 * previous.uy)


def extrapolated_tensor(current: TensorField, previous: TensorField | None) -> TensorField:
    if previous is None or previous is current:
        return current
    return TensorField(1.5 * current.xx - 0.5 * previous.xx,
                       1.5 * current.xy - 0.5 * previous.xy,
                       1.5 * current.yy - 0.5 * previous.yy)
