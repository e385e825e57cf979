"""Mixing potentials, their linear-in-the-unknown approximations, and the
phase-dependent material coefficients.

All evaluation functions are numpy-vectorized and accept scalars or arrays.
The three potential variants:

* ``ginzburg_landau``: F(x) = (x^2-1)^2/4 on all of R.
* ``ginzburg_landau_modified``: same double well on [-1, 1], continued
  quadratically outside so that F in C^2 and sup|f'| = 2.
* ``flory_huggins``: F(x) = x*ln(x)/n_p + (1-x)*ln(1-x)/n_s + chi*x*(1-x)
  on (0, 1); evaluations clamp into [eps, 1-eps].

The linearizations return affine coefficients (a, b, c_mu) with
f_approx(x_new, x_old) = a(x_old)*x_new + b(x_old); c_mu is the extra
Laplacian weight the convex-split variant adds to the chemical potential.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Potential(enum.Enum):
    GINZBURG_LANDAU = "ginzburg_landau"
    GINZBURG_LANDAU_MODIFIED = "ginzburg_landau_modified"
    FLORY_HUGGINS = "flory_huggins"


class FApprox(enum.Enum):
    STABILIZED = "f1"     # f(x_old) + (x_new - x_old)
    CONVEX_SPLIT = "f2"   # implicit convex / explicit concave with mu shift
    OD2 = "f3"            # f(x_old) + (x_new - x_old)/2 * f'(x_old)


@dataclass(frozen=True)
class ModelParams:
    """Material and regularization constants shared by all schemes."""
    c0: float = 1.0 / 600.0           # interfacial energy coefficient
    mobility: float = 10.0            # M
    mobility_exponent: int = 2        # n in m = M*(x*(1-x))^n
    tau_b0: float = 10.0              # bulk relaxation scale, tau_b = tau_b0*x^2
    tau_s0: float = 5.0               # shear relaxation scale, tau_s = tau_s0*x^2
    ms0: float = 0.2                  # elastic modulus scale, B2 = ms0*x^2
    mb0: float = 0.5                  # bulk modulus tanh amplitude
    mb1: float = 1.0                  # bulk modulus offset
    phi_star: float = 0.4             # tanh transition center
    eps_a1: float = 0.01              # tanh transition width
    potential: Potential = Potential.FLORY_HUGGINS
    fapprox: FApprox = FApprox.OD2
    np_chain: float = 1.0             # polymer chain length n_p
    ns_chain: float = 1.0             # solvent chain length n_s
    chi: float = 3.0                  # interaction parameter
    phi_clamp_eps: float = 1e-6
    eta_floor: float = 1e-3

    def __post_init__(self):
        if self.c0 <= 0 or self.mobility <= 0:
            raise ValueError("c0 and mobility must be positive")
        if self.tau_b0 <= 0 or self.tau_s0 <= 0 or self.ms0 < 0:
            raise ValueError("relaxation/modulus scales must be positive")
        if not (0.0 < self.phi_clamp_eps < 0.5):
            raise ValueError("phi_clamp_eps must lie in (0, 0.5)")
        if self.eta_floor <= 0.0:
            raise ValueError("eta_floor must be positive")
        # solvent viscosity 1 - tau_s0*ms0*x^4 must be nonnegative on [0, 1];
        # the eta floor is only allowed to act at the x -> 1 endpoint.
        if self.tau_s0 * self.ms0 > 1.0 + 1e-12:
            raise ValueError(
                f"tau_s0*ms0 = {self.tau_s0 * self.ms0:g} > 1 makes the solvent "
                "viscosity negative inside (0,1)"
            )
        if self.potential is Potential.FLORY_HUGGINS:
            if self.np_chain <= 0 or self.ns_chain <= 0:
                raise ValueError("chain lengths must be positive")
        if self.fapprox in (FApprox.STABILIZED, FApprox.CONVEX_SPLIT) and (
            self.potential is Potential.FLORY_HUGGINS
        ):
            raise ValueError(
                f"{self.fapprox.value} requires a bounded f'; use a "
                "Ginzburg-Landau potential or switch to f3"
            )


def _check_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to potential evaluation")
    return x


def clamp_phi(params: ModelParams, phi):
    """Clip into [eps, 1-eps] for Flory-Huggins; identity for GL variants."""
    if params.potential is Potential.FLORY_HUGGINS:
        eps = params.phi_clamp_eps
        return np.clip(phi, eps, 1.0 - eps)
    return np.asarray(phi, dtype=float)


def potential_F(params: ModelParams, phi):
    """Homogeneous free energy density F(phi)."""
    x = _check_finite(phi)
    if params.potential is Potential.GINZBURG_LANDAU:
        return 0.25 * (x * x - 1.0) ** 2
    if params.potential is Potential.GINZBURG_LANDAU_MODIFIED:
        core = 0.25 * (x * x - 1.0) ** 2
        lo = (x + 1.0) ** 2
        hi = (x - 1.0) ** 2
        return np.where(x < -1.0, lo, np.where(x > 1.0, hi, core))
    xc = np.clip(x, params.phi_clamp_eps, 1.0 - params.phi_clamp_eps)
    return (
        xc * np.log(xc) / params.np_chain
        + (1.0 - xc) * np.log(1.0 - xc) / params.ns_chain
        + params.chi * xc * (1.0 - xc)
    )


def potential_f(params: ModelParams, phi):
    """f = F'."""
    x = _check_finite(phi)
    if params.potential is Potential.GINZBURG_LANDAU:
        return x ** 3 - x
    if params.potential is Potential.GINZBURG_LANDAU_MODIFIED:
        core = x ** 3 - x
        return np.where(x < -1.0, 2.0 * (x + 1.0), np.where(x > 1.0, 2.0 * (x - 1.0), core))
    xc = np.clip(x, params.phi_clamp_eps, 1.0 - params.phi_clamp_eps)
    return (
        (np.log(xc) + 1.0) / params.np_chain
        - (np.log(1.0 - xc) + 1.0) / params.ns_chain
        + params.chi * (1.0 - 2.0 * xc)
    )


def potential_fprime(params: ModelParams, phi):
    """f' = F''."""
    x = _check_finite(phi)
    if params.potential is Potential.GINZBURG_LANDAU:
        return 3.0 * x * x - 1.0
    if params.potential is Potential.GINZBURG_LANDAU_MODIFIED:
        return np.where(np.abs(x) > 1.0, 2.0, 3.0 * x * x - 1.0)
    xc = np.clip(x, params.phi_clamp_eps, 1.0 - params.phi_clamp_eps)
    return 1.0 / (params.np_chain * xc) + 1.0 / (params.ns_chain * (1.0 - xc)) - 2.0 * params.chi


def _f_concave(params: ModelParams, phi):
    """Concave part f - 2*phi of the (modified) GL derivative."""
    x = np.asarray(phi, dtype=float)
    core = x ** 3 - 3.0 * x
    if params.potential is Potential.GINZBURG_LANDAU:
        return core
    return np.where(x < -1.0, 2.0, np.where(x > 1.0, -2.0, core))


def _f_concave_prime(params: ModelParams, phi):
    x = np.asarray(phi, dtype=float)
    core = 3.0 * x * x - 3.0
    if params.potential is Potential.GINZBURG_LANDAU:
        return core
    return np.where(np.abs(x) > 1.0, 0.0, core)


def f_approx_affine(params: ModelParams, phi_old, dt: float):
    """Affine coefficients (a, b, c_mu) of the chosen f approximation.

    f_approx(x_new, x_old) = a*x_new + b with a, b fields anchored at x_old;
    c_mu >= 0 is the extra Laplacian weight added to the chemical potential
    (convex-split variant only: dt*(2+3)^2/16).
    """
    x = clamp_phi(params, _check_finite(phi_old))
    if params.fapprox is FApprox.STABILIZED:
        a = np.ones_like(x)
        b = potential_f(params, x) - x
        return a, b, 0.0
    if params.fapprox is FApprox.CONVEX_SPLIT:
        fc = _f_concave(params, x)
        fcp = _f_concave_prime(params, x)
        a = 1.0 + 0.5 * fcp
        b = x + fc - 0.5 * x * fcp
        c_mu = dt * 25.0 / 16.0
        return a, b, c_mu
    fp = potential_fprime(params, x)
    a = 0.5 * fp
    b = potential_f(params, x) - 0.5 * x * fp
    return a, b, 0.0


def mobility(params: ModelParams, phi):
    """Degenerate mobility m = M*(x*(1-x))^n."""
    x = np.asarray(phi, dtype=float)
    return params.mobility * (x * (1.0 - x)) ** params.mobility_exponent


@dataclass(frozen=True)
class Coefficients:
    """Phase-dependent coefficient fields evaluated at one phi field."""
    tau_b: np.ndarray
    tau_s: np.ndarray
    b2: np.ndarray
    eta: np.ndarray
    a1: np.ndarray


def coeff_a1(params: ModelParams, phi):
    """Bulk modulus A1 with the cotangent argument clamped away from {0, 1}."""
    eps = params.phi_clamp_eps
    x = np.clip(phi, eps, 1.0 - eps)
    cot_star = 1.0 / np.tan(np.pi * params.phi_star)
    cot_x = 1.0 / np.tan(np.pi * x)
    return params.mb0 * (1.0 + np.tanh((cot_star - cot_x) / params.eps_a1)) + params.mb1


def coefficients(params: ModelParams, phi) -> Coefficients:
    """tau_b, tau_s, B2, eta (floored), A1 at the given phi values."""
    x = np.asarray(phi, dtype=float)
    x2 = x * x
    tau_b = params.tau_b0 * x2
    tau_s = params.tau_s0 * x2
    b2 = params.ms0 * x2
    eta = np.maximum(1.0 - params.tau_s0 * params.ms0 * x2 * x2, params.eta_floor)
    return Coefficients(tau_b=tau_b, tau_s=tau_s, b2=b2, eta=eta, a1=coeff_a1(params, x))


def safe_phi_sq(params: ModelParams, phi) -> np.ndarray:
    """phi^2 floored at phi_clamp_eps^2, for reciprocal relaxation times."""
    x = np.asarray(phi, dtype=float)
    return np.maximum(x * x, params.phi_clamp_eps ** 2)
