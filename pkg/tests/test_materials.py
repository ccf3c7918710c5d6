"""Viscosity law, shear rate, dissipation and conductivity tests."""

import math

import mpmath
import numpy as np
import numpy.testing as npt
import pytest

from screwsim.materials import (
    Carreau,
    CrossWLF,
    MaterialError,
    MaterialModel,
    Newtonian,
    conductivity,
    dissipation,
    shear_rate,
    viscosity,
)

# polymer melt of the 2D validation case
CARREAU = MaterialModel(Carreau(eta0=1290.0, eta_inf=0.0, lam=0.112, n=0.559),
                        rho=1000.0, c_p=1500.0, kappa0=0.5)
# polypropylene-like melt of the temperature-dependent runs
CROSS = MaterialModel(
    CrossWLF(d1=1.21e14, tau_star=256680.70, n=0.29, t_ref=263.15,
             a1=28.32, a2=51.60),
    rho=710.0, c_p=2400.0, kappa0=0.18, eta_inf_thermal=7.5)


# mpf(float(x)) keeps the exact IEEE double the implementation sees
def _carreau_mp(v, g):
    g = mpmath.mpf(float(g))
    one = mpmath.mpf(1)
    return v.eta_inf + (v.eta0 - v.eta_inf) * (
        one + (mpmath.mpf(v.lam) * g) ** 2) ** ((mpmath.mpf(v.n) - 1) / 2)


def _crosswlf_mp(v, g, temp):
    g = mpmath.mpf(float(g))
    dt = mpmath.mpf(float(temp)) - mpmath.mpf(v.t_ref)
    eta0 = mpmath.mpf(v.d1) * mpmath.e ** (
        -mpmath.mpf(v.a1) * dt / (mpmath.mpf(v.a2) + dt))
    return eta0 / (1 + (eta0 * g / mpmath.mpf(v.tau_star))
                   ** (1 - mpmath.mpf(v.n)))


def test_parameter_validation():
    with pytest.raises(MaterialError):
        Newtonian(eta=0.0)
    with pytest.raises(MaterialError):
        Carreau(eta0=-1.0, eta_inf=0.0, lam=0.1, n=0.5)
    with pytest.raises(MaterialError):
        Carreau(eta0=1.0, eta_inf=2.0, lam=0.1, n=0.5)   # plateau above eta0
    with pytest.raises(MaterialError):
        Carreau(eta0=1.0, eta_inf=0.0, lam=0.1, n=1.5)   # thickening index
    with pytest.raises(MaterialError):
        CrossWLF(d1=1e14, tau_star=0.0, n=0.29, t_ref=263.15, a1=28.0, a2=51.0)
    with pytest.raises(MaterialError):
        MaterialModel(Newtonian(1.0), rho=-1.0, c_p=1.0, kappa0=1.0)
    with pytest.raises(MaterialError):
        MaterialModel(Newtonian(1.0), rho=1.0, c_p=1.0, kappa0=1.0,
                      eta_inf_thermal=0.0)


def test_carreau_anchor_values():
    # zero-shear limit hits the plateau exactly
    assert viscosity(CARREAU, 0.0) == 1290.0
    # at gamma = 1/lam the thinning factor is exactly 2^((n-1)/2)
    expect = 1290.0 * 2.0 ** ((0.559 - 1.0) / 2.0)
    assert viscosity(CARREAU, 1.0 / 0.112) == pytest.approx(expect, rel=1e-15)
    assert expect == pytest.approx(1107.0, abs=0.5)


def test_crosswlf_anchor_values():
    # at the reference temperature the WLF shift is exp(0)
    assert viscosity(CROSS, 0.0, 263.15) == pytest.approx(1.21e14, rel=1e-15)
    # picking gamma so eta0*gamma = tau_star halves the viscosity
    v = CROSS.variant
    eta0 = v.eta0(420.0)
    g = v.tau_star / eta0
    assert viscosity(CROSS, g, 420.0) == pytest.approx(eta0 / 2.0, rel=1e-14)


def test_carreau_against_high_precision_oracle():
    rng = np.random.default_rng(7121)
    mpmath.mp.dps = 50
    gammas = 10.0 ** rng.uniform(-3.0, 5.0, size=100)
    for g in gammas:
        ref = float(_carreau_mp(CARREAU.variant, g))
        assert viscosity(CARREAU, g) == pytest.approx(ref, rel=1e-12)


def test_crosswlf_against_high_precision_oracle():
    rng = np.random.default_rng(9182)
    mpmath.mp.dps = 50
    gammas = 10.0 ** rng.uniform(-3.0, 5.0, size=100)
    temps = rng.uniform(300.0, 550.0, size=100)
    for g, temp in zip(gammas, temps):
        ref = float(_crosswlf_mp(CROSS.variant, g, temp))
        assert viscosity(CROSS, g, temp) == pytest.approx(ref, rel=1e-12)


def test_wlf_domain_error():
    with pytest.raises(MaterialError):
        viscosity(CROSS, 1.0, 263.15 - 51.60 - 1.0)
    # just inside the pole the shift overflows; still a domain error
    with pytest.raises(MaterialError):
        viscosity(CROSS, 1.0, 263.15 - 51.60)


def test_crosswlf_needs_temperature():
    with pytest.raises(MaterialError):
        viscosity(CROSS, 1.0)


def test_carreau_monotone_and_bounded():
    model = MaterialModel(Carreau(1290.0, 3.0, 0.112, 0.559),
                          rho=1000.0, c_p=1500.0, kappa0=0.5)
    g = np.logspace(-4, 7, 300)
    eta = viscosity(model, g)
    assert np.all(np.diff(eta) <= 0.0)
    assert np.all(eta <= 1290.0)
    assert np.all(eta >= 3.0)
    # far tail approaches the plateau
    assert viscosity(model, 1e12) == pytest.approx(3.0, rel=1e-2)


def test_crosswlf_temperature_monotone():
    temps = np.linspace(300.0, 520.0, 80)
    eta0 = CROSS.variant.eta0(temps)
    assert np.all(np.diff(eta0) < 0.0)
    eta = viscosity(CROSS, np.full_like(temps, 50.0), temps)
    assert np.all(eta <= eta0)


def test_newtonian_special_cases():
    newt = MaterialModel(Newtonian(4.7), rho=1400.0, c_p=2000.0, kappa0=0.4)
    assert viscosity(newt, 123.4) == 4.7
    lam0 = MaterialModel(Carreau(4.7, 0.0, 0.0, 0.559),
                         rho=1400.0, c_p=2000.0, kappa0=0.4)
    n1 = MaterialModel(Carreau(4.7, 0.0, 0.112, 1.0),
                       rho=1400.0, c_p=2000.0, kappa0=0.4)
    for g in (0.0, 0.37, 1e4):
        assert viscosity(lam0, g) == 4.7
        assert viscosity(n1, g) == 4.7


def test_shear_rate_identities():
    g = 3.7
    simple = np.array([[0.0, g], [0.0, 0.0]])
    assert shear_rate(simple) == pytest.approx(g, rel=1e-15)
    rot = np.array([[0.0, 1.3], [-1.3, 0.0]])
    assert shear_rate(rot) == 0.0
    a = 0.81
    ext = np.diag([a, -a])
    assert shear_rate(ext) == pytest.approx(2.0 * a, rel=1e-15)


def test_dissipation_identities():
    eta = 2.9
    g = 3.7
    simple = np.array([[0.0, g], [0.0, 0.0]])
    assert dissipation(simple, eta) == pytest.approx(eta * g * g, rel=1e-15)
    rot = np.array([[0.0, 1.3], [-1.3, 0.0]])
    assert dissipation(rot, eta) == 0.0
    a = 0.81
    ext = np.diag([a, -a])
    assert dissipation(ext, eta) == pytest.approx(4.0 * eta * a * a, rel=1e-15)


def test_dissipation_nonnegative_random():
    rng = np.random.default_rng(555)
    grads = rng.normal(size=(200, 2, 2))
    phi = dissipation(grads, 1.7)
    assert phi.shape == (200,)
    assert np.all(phi >= 0.0)
    # consistency with the scalar shear rate
    npt.assert_allclose(phi, 1.7 * shear_rate(grads) ** 2, rtol=1e-12)


def test_frame_indifference():
    rng = np.random.default_rng(31)
    for _ in range(25):
        g = rng.normal(size=(2, 2))
        th = rng.uniform(0.0, 2.0 * math.pi)
        q = np.array([[math.cos(th), -math.sin(th)],
                      [math.sin(th), math.cos(th)]])
        g_rot = q.T @ g @ q
        assert shear_rate(g_rot) == pytest.approx(shear_rate(g), rel=1e-12)
        assert dissipation(g_rot, 0.9) == pytest.approx(
            dissipation(g, 0.9), rel=1e-12)


def test_conductivity_prandtl_link():
    assert CROSS.pr_star == pytest.approx(7.1e7, rel=1e-12)
    # at the anchor viscosity the link returns kappa0 itself
    assert conductivity(CROSS, 7.5) == pytest.approx(0.18, rel=1e-12)
    assert conductivity(CROSS, 15.0) == pytest.approx(0.36, rel=1e-12)
    eta = np.array([7.5, 75.0])
    npt.assert_allclose(conductivity(CROSS, eta), [0.18, 1.8], rtol=1e-12)


def test_conductivity_newtonian_constant():
    newt = MaterialModel(Newtonian(4.7), rho=1400.0, c_p=2000.0, kappa0=0.4)
    assert conductivity(newt, 4.7) == 0.4
    assert conductivity(newt, 99.0) == 0.4


def test_pr_star_requires_thermal_anchor():
    with pytest.raises(MaterialError):
        CARREAU.pr_star


def test_viscosity_vectorized_shapes():
    g = np.linspace(0.0, 100.0, 7).reshape(7, 1)
    eta = viscosity(CARREAU, g)
    assert eta.shape == (7, 1)
    temps = np.full((7, 1), 450.0)
    eta = viscosity(CROSS, g, temps)
    assert eta.shape == (7, 1)
    assert isinstance(viscosity(CARREAU, 1.0), float)


def test_negative_shear_rejected():
    with pytest.raises(MaterialError):
        viscosity(CARREAU, -1.0)
