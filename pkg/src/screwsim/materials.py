"""Generalized-Newtonian material laws and derived field quantities.

Three viscosity variants cover the usual melt modeling range: constant
Newtonian, shear-thinning Carreau and the Cross model with a WLF
temperature shift of the zero-shear viscosity.  The same module holds
the kinematic helpers the solver evaluates at quadrature points: shear
rate from a velocity gradient, viscous dissipation and the
viscosity-proportional thermal conductivity that keeps the material
Prandtl number constant.

All quantities are SI: Pa.s, 1/s, K, W/(m.K), W/m^3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    """Raised for inconsistent material parameters or out-of-domain state."""


# ---------------------------------------------------------------------------
# model variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Newtonian:
    """Constant viscosity eta."""

    eta: float

    def __post_init__(self):
        if self.eta <= 0.0:
            raise MaterialError("Newtonian eta must be positive")


@dataclass(frozen=True)
class Carreau:
    """Shear-thinning law eta_inf + (eta0 - eta_inf)(1 + (lam*g)^2)^((n-1)/2).

    eta0     zero-shear viscosity
    eta_inf  infinite-shear plateau, may be zero
    lam      relaxation time scaling the shear rate
    n        power index, (0, 1] for shear thinning
    """

    eta0: float
    eta_inf: float
    lam: float
    n: float

    def __post_init__(self):
        if self.eta0 <= 0.0:
            raise MaterialError("Carreau eta0 must be positive")
        if self.eta_inf < 0.0:
            raise MaterialError("Carreau eta_inf must be non-negative")
        if self.eta_inf > self.eta0:
            raise MaterialError("Carreau eta_inf exceeds eta0")
        if self.lam < 0.0:
            raise MaterialError("Carreau lam must be non-negative")
        if not 0.0 < self.n <= 1.0:
            raise MaterialError("Carreau n must lie in (0, 1]")


@dataclass(frozen=True)
class CrossWLF:
    """Cross shear thinning with WLF-shifted zero-shear viscosity.

    d1        zero-shear viscosity at the reference temperature
    tau_star  critical shear stress at the thinning transition
    n         power index, (0, 1]
    t_ref     WLF reference temperature
    a1, a2    WLF temperature-dependency coefficients

    The infinite-shear plateau is taken as negligible, so the Cross
    denominator carries the full shear thinning.
    """

    d1: float
    tau_star: float
    n: float
    t_ref: float
    a1: float
    a2: float

    def __post_init__(self):
        if self.d1 <= 0.0 or self.tau_star <= 0.0:
            raise MaterialError("CrossWLF d1 and tau_star must be positive")
        if not 0.0 < self.n <= 1.0:
            raise MaterialError("CrossWLF n must lie in (0, 1]")
        if self.t_ref <= 0.0:
            raise MaterialError("CrossWLF t_ref must be positive")
        if self.a1 <= 0.0 or self.a2 <= 0.0:
            raise MaterialError("CrossWLF a1 and a2 must be positive")

    def eta0(self, temperature):
        """Zero-shear viscosity at a given temperature.

        The WLF shift is only defined while a2 + (T - t_ref) stays
        positive; beyond that the model has no validity.
        """
        dt = np.asarray(temperature, dtype=float) - self.t_ref
        den = self.a2 + dt
        if np.any(den <= 0.0):
            raise MaterialError(
                "temperature outside WLF domain: a2 + (T - t_ref) <= 0")
        with np.errstate(over="ignore"):
            out = self.d1 * np.exp(-self.a1 * dt / den)
        if not np.all(np.isfinite(out)):
            raise MaterialError(
                "temperature too close to the WLF domain edge: "
                "zero-shear viscosity overflows")
        return out


@dataclass(frozen=True)
class MaterialModel:
    """A viscosity variant plus the thermal properties of the melt.

    variant          Newtonian, Carreau or CrossWLF law
    rho              density
    c_p              specific heat
    kappa0           reference thermal conductivity
    eta_inf_thermal  infinite-shear viscosity anchoring the Prandtl
                     link; None disables viscosity-scaled conductivity
    """

    variant: Newtonian | Carreau | CrossWLF
    rho: float
    c_p: float
    kappa0: float
    eta_inf_thermal: float | None = None

    def __post_init__(self):
        if self.rho <= 0.0 or self.c_p <= 0.0 or self.kappa0 <= 0.0:
            raise MaterialError("rho, c_p and kappa0 must be positive")
        if self.eta_inf_thermal is not None and self.eta_inf_thermal <= 0.0:
            raise MaterialError("eta_inf_thermal must be positive")

    @property
    def pr_star(self) -> float:
        """Material Prandtl number, fixed for a whole simulation."""
        if self.eta_inf_thermal is None:
            raise MaterialError(
                "pr_star needs eta_inf_thermal on the material model")
        return self.eta_inf_thermal * self.rho * self.c_p / self.kappa0


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def _strain_rate(grad_u: np.ndarray) -> np.ndarray:
    g = np.asarray(grad_u, dtype=float)
    if g.shape[-1] != g.shape[-2]:
        raise MaterialError("grad_u must be a square tensor on its last axes")
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def shear_rate(grad_u: np.ndarray) -> np.ndarray:
    """Scalar shear rate sqrt(2 eps:eps) of a velocity gradient.

    Accepts a single (d, d) tensor or any batch (..., d, d); the result
    drops the two tensor axes.
    """
    eps = _strain_rate(grad_u)
    return np.sqrt(2.0 * np.einsum("...ij,...ij->...", eps, eps))


def dissipation(grad_u: np.ndarray, eta) -> np.ndarray:
    """Viscous heating 2 eta (grad_u : eps), equal to eta * shear_rate^2."""
    eps = _strain_rate(grad_u)
    # grad_u : eps == eps : eps because the antisymmetric part cancels
    return 2.0 * np.asarray(eta, dtype=float) * np.einsum(
        "...ij,...ij->...", eps, eps)


# ---------------------------------------------------------------------------
# constitutive laws
# ---------------------------------------------------------------------------

def viscosity(model: MaterialModel, gamma_dot, temperature=None):
    """Dynamic viscosity at shear rate gamma_dot and temperature.

    gamma_dot may be a scalar or array; temperature is only read by the
    CrossWLF variant and must broadcast against gamma_dot there.
    Returns a scalar for scalar input, an array otherwise.
    """
    g = np.asarray(gamma_dot, dtype=float)
    if np.any(g < 0.0):
        raise MaterialError("shear rate must be non-negative")
    v = model.variant
    if isinstance(v, Newtonian):
        out = np.broadcast_to(np.float64(v.eta), g.shape)
    elif isinstance(v, Carreau):
        out = v.eta_inf + (v.eta0 - v.eta_inf) * (
            1.0 + (v.lam * g) ** 2) ** ((v.n - 1.0) / 2.0)
    elif isinstance(v, CrossWLF):
        if temperature is None:
            raise MaterialError("CrossWLF viscosity needs a temperature")
        eta0 = v.eta0(temperature)
        # 0^(1-n) = 0 for n < 1, so the zero-shear limit is exact
        out = eta0 / (1.0 + (eta0 * g / v.tau_star) ** (1.0 - v.n))
    else:
        raise MaterialError(f"unknown material variant {type(v).__name__}")
    if np.isscalar(gamma_dot) or np.ndim(gamma_dot) == 0:
        return float(out)
    return np.array(out, dtype=float)


def conductivity(model: MaterialModel, eta):
    """Thermal conductivity paired with a local viscosity.

    Scales kappa with viscosity so the Prandtl number stays at the
    model's fixed value; a Newtonian melt keeps the constant kappa0.
    """
    if isinstance(model.variant, Newtonian):
        if np.isscalar(eta) or np.ndim(eta) == 0:
            return float(model.kappa0)
        return np.full(np.shape(eta), model.kappa0)
    e = np.asarray(eta, dtype=float)
    if np.any(e <= 0.0):
        raise MaterialError("conductivity needs a positive viscosity")
    out = e * model.rho * model.c_p / model.pr_star
    if np.isscalar(eta) or np.ndim(eta) == 0:
        return float(out)
    return out
