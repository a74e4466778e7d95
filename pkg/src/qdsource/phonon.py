"""Phonon environment of a driven quantum-dot exciton.

Super-ohmic deformation-potential coupling with a Gaussian cutoff,

    J(nu) = alpha * nu^3 * exp(-nu^2 / xi^2),

treated in the polaron frame.  Everything downstream (sideband lineshapes,
phonon-induced dephasing of a cavity-coupled dot) is built from the phonon
correlation function

    phi(tau) = int_0^inf dnu J(nu)/nu^2 [coth(nu/(2 k_B T)) cos(nu tau)
                                         - i sin(nu tau)]

and the Franck-Condon factor B = exp(-phi(0)/2).  The displacement
correlation is G(tau) = B^2 exp(phi(tau)).

Internally nu and tau are ps^-1 / ps (hbar = 1).  At T = 0 both parts of
phi have closed forms (Dawson function and a Gaussian); for T > 0 the
thermal correction is an integral with compact support nu ~ 30 k_B T,
evaluated by composite Gauss-Legendre panels sized against the cos(nu tau)
oscillation.  The split keeps the panel count bounded at low temperature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, DomainError, QuadratureError
from .units import mev_to_angular, thermal_energy_angular

# Fraction of B^2 below which |G - B^2| is considered decayed; the cached
# tau grid extends until |phi| drops under this.
DEFAULT_TAIL_TOL = 1e-10
DEFAULT_TAU_STEP = 0.01  # ps
DEFAULT_QUAD_TOL = 1e-12

_GL_ORDER = 10
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def spectral_density(nu, alpha_ps2: float, xi_ps: float):
    """J(nu) = alpha nu^3 exp(-nu^2/xi^2), nu and xi in ps^-1.

    Raises DomainError for negative nu.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise DomainError("spectral density is defined for nu >= 0")
    return alpha_ps2 * nu**3 * np.exp(-((nu / xi_ps) ** 2))


def _coth(x):
    """Numerically stable coth for x > 0 (scalar or array)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < 1e-4
    large = x > 20.0
    mid = ~(small | large)
    xs = x[small]
    out[small] = 1.0 / xs + xs / 3.0
    out[mid] = 1.0 / np.tanh(x[mid])
    out[large] = 1.0
    return out if out.size > 1 else float(out[0])


def _gl_panels(a: float, b: float, n_panels: int):
    """Composite Gauss-Legendre nodes/weights on [a, b]."""
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class PhononEnvironment:
    """Immutable phonon environment with cached correlation grids.

    Build with :meth:`PhononEnvironment.build`; do not mutate the cached
    arrays.  Safe to share across threads/processes after construction.
    """

    alpha_ps2: float
    xi_mev: float
    temperature_K: float
    xi: float                      # cutoff, ps^-1
    kT: float                      # k_B T, ps^-1 (0 at T = 0)
    phi0: float                    # phi(0), real
    franck_condon: float           # B = exp(-phi0/2)
    j1: float                      # int J/nu dnu = alpha sqrt(pi) xi^3 / 4
    tau_step: float
    tail_tol: float
    quad_tol: float
    tau_grid: np.ndarray = field(repr=False)
    phi_grid: np.ndarray = field(repr=False)
    G_grid: np.ndarray = field(repr=False)

    # -- construction -------------------------------------------------

    @classmethod
    def build(cls, alpha_ps2: float, xi_mev: float, temperature_K: float, *,
              tau_step: float = DEFAULT_TAU_STEP,
              tail_tol: float = DEFAULT_TAIL_TOL,
              quad_tol: float = DEFAULT_QUAD_TOL) -> "PhononEnvironment":
        if alpha_ps2 < 0:
            raise ConfigurationError("alpha must be >= 0")
        if xi_mev <= 0:
            raise ConfigurationError("cutoff xi must be > 0")
        if temperature_K < 0:
            raise ConfigurationError("temperature must be >= 0")
        if tau_step <= 0 or tau_step > DEFAULT_TAU_STEP + 1e-15:
            raise ConfigurationError("tau_step must be in (0, 0.01] ps")

        xi = mev_to_angular(xi_mev)
        kT = thermal_energy_angular(temperature_K)
        j1 = alpha_ps2 * np.sqrt(np.pi) * xi**3 / 4.0

        if alpha_ps2 == 0.0:
            tau_grid = np.arange(0.0, 1.0 + tau_step, tau_step)
            zeros = np.zeros_like(tau_grid, dtype=complex)
            return cls(alpha_ps2, xi_mev, temperature_K, xi, kT, 0.0, 1.0,
                       j1, tau_step, tail_tol, quad_tol,
                       tau_grid, zeros, np.ones_like(zeros))

        phi0 = alpha_ps2 * xi**2 / 2.0 + _phi_thermal_scalar(
            0.0, alpha_ps2, xi, kT, quad_tol)
        B = float(np.exp(-phi0 / 2.0))

        tau_max = _find_tau_max(alpha_ps2, xi, kT, tail_tol, quad_tol)
        n = int(np.ceil(tau_max / tau_step)) + 1
        tau_grid = np.arange(n) * tau_step
        phi_grid = _phi_on_grid(tau_grid, alpha_ps2, xi, kT)
        G_grid = B**2 * np.exp(phi_grid)

        return cls(alpha_ps2, xi_mev, temperature_K, xi, kT, phi0, B, j1,
                   tau_step, tail_tol, quad_tol, tau_grid, phi_grid, G_grid)

    # -- spectral density ---------------------------------------------

    def spectral_density(self, nu):
        """J(nu) in ps^-1 for nu in ps^-1 (nu >= 0)."""
        return spectral_density(nu, self.alpha_ps2, self.xi)

    # -- correlation functions ----------------------------------------

    def phi(self, tau):
        """phi(tau) for scalar or array tau (ps), exact evaluation.

        Uses the closed forms for the T = 0 part and a Gauss-Legendre
        thermal correction; phi(-tau) = phi(tau)* by construction of the
        defining integral.
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = _phi_on_grid(np.abs(tau), self.alpha_ps2, self.xi, self.kT)
        out = np.where(tau < 0, np.conj(out), out)
        return out if out.size > 1 else complex(out[0])

    def eval_phi_quad(self, tau: float) -> complex:
        """phi(tau) by adaptive quadrature of the defining integral.

        Independent of the closed-form/panel route used by :meth:`phi`;
        absolute tolerance ``quad_tol`` on [0, 10 xi] with the nu -> 0
        limit substituted analytically.  Raises QuadratureError with the
        residual estimate if the quadrature does not converge.
        """
        a, xi, kT = self.alpha_ps2, self.xi, self.kT
        if a == 0.0:
            return 0.0 + 0.0j
        lim0 = 2.0 * a * kT  # nu->0 limit of the real-part integrand

        def re_integrand(nu):
            if nu == 0.0:
                return lim0
            coth = _coth(nu / (2.0 * kT)) if kT > 0 else 1.0
            return a * nu * np.exp(-((nu / xi) ** 2)) * coth * np.cos(nu * tau)

        def im_integrand(nu):
            return -a * nu * np.exp(-((nu / xi) ** 2)) * np.sin(nu * tau)

        upper = 10.0 * xi
        # subdivision limit sized for the cos(nu tau) oscillation
        limit = max(200, int(20 + 2 * upper * abs(tau)))
        re, re_err = integrate.quad(re_integrand, 0.0, upper,
                                    epsabs=self.quad_tol, epsrel=1e-11,
                                    limit=limit)
        im, im_err = integrate.quad(im_integrand, 0.0, upper,
                                    epsabs=self.quad_tol, epsrel=1e-11,
                                    limit=limit)
        resid = max(re_err, im_err)
        if resid > 1e3 * self.quad_tol * (1.0 + abs(re) + abs(im)):
            raise QuadratureError(
                f"phi({tau}) quadrature residual {resid:.2e} exceeds tolerance",
                residual=resid)
        return complex(re, im)

    def G(self, tau):
        """Displacement correlation G(tau) = B^2 exp(phi(tau)).

        Exact within the cached grid range; |tau| beyond tau_max returns
        B^2 (the residual is below tail_tol there by construction).
        G(-tau) = G(tau)*.
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.full(tau.shape, self.franck_condon**2, dtype=complex)
        inside = np.abs(tau) <= self.tau_max
        if np.any(inside):
            phi_in = _phi_on_grid(np.abs(tau[inside]), self.alpha_ps2,
                                  self.xi, self.kT)
            phi_in = np.where(tau[inside] < 0, np.conj(phi_in), phi_in)
            out[inside] = self.franck_condon**2 * np.exp(phi_in)
        return out if out.size > 1 else complex(out[0])

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    @property
    def B2(self) -> float:
        return self.franck_condon**2


# -- phi evaluation helpers -------------------------------------------


def _phi_zero_T(tau, alpha, xi):
    """Closed-form T = 0 phi: Dawson-function real part, Gaussian imag part."""
    y = 0.5 * xi * tau
    re = alpha * (xi**2 / 2.0) * (1.0 - xi * tau * special.dawsn(y))
    im = -alpha * np.sqrt(np.pi) * xi**3 * tau / 4.0 * np.exp(-(y**2))
    return re + 1j * im


def _thermal_panel_rule(alpha, xi, kT, tau_max):
    """GL nodes/weights for the thermal correction integrand.

    Integrand alpha nu exp(-nu^2/xi^2) (coth(nu/2kT) - 1) has support
    nu <~ 30 kT (and the Gaussian cutoff); panels are sized so each holds
    <= ~2.5 rad of the fastest cos(nu tau) phase.
    """
    nu_up = min(8.0 * xi, 30.0 * kT)
    n_panels = max(48, int(np.ceil(nu_up * max(tau_max, 1.0) / 2.5)))
    return _gl_panels(0.0, nu_up, n_panels)


def _thermal_values(nodes, alpha, xi, kT):
    # Gauss-Legendre nodes are strictly interior, so nu > 0 here and the
    # nu -> 0 limit (2 alpha kT) never needs substituting.
    cm1 = _coth(nodes / (2.0 * kT)) - 1.0
    return alpha * nodes * np.exp(-((nodes / xi) ** 2)) * cm1


def _phi_thermal_scalar(tau, alpha, xi, kT, quad_tol):
    if kT == 0.0:
        return 0.0
    nu_up = min(8.0 * xi, 30.0 * kT)
    lim0 = 2.0 * alpha * kT

    def integrand(nu):
        if nu == 0.0:
            return lim0
        return (alpha * nu * np.exp(-((nu / xi) ** 2))
                * (_coth(nu / (2.0 * kT)) - 1.0) * np.cos(nu * tau))

    limit = max(200, int(20 + 2 * nu_up * abs(tau)))
    val, err = integrate.quad(integrand, 0.0, nu_up, epsabs=quad_tol,
                              epsrel=1e-11, limit=limit)
    if err > 1e3 * quad_tol * (1.0 + abs(val)):
        raise QuadratureError(
            f"thermal phi({tau}) residual {err:.2e} exceeds tolerance",
            residual=err)
    return val


def _phi_on_grid(tau, alpha, xi, kT, chunk: int = 65536):
    """Vectorized phi on an array of tau >= 0 (closed form + GL thermal)."""
    tau = np.asarray(tau, dtype=float)
    out = _phi_zero_T(tau, alpha, xi).astype(complex)
    if kT > 0.0 and alpha > 0.0:
        nodes, weights = _thermal_panel_rule(alpha, xi, kT, float(tau.max()))
        vals = _thermal_values(nodes, alpha, xi, kT) * weights
        for i in range(0, tau.size, chunk):
            t = tau[i:i + chunk]
            out[i:i + chunk] += np.cos(np.outer(t, nodes)) @ vals
    return out


def _find_tau_max(alpha, xi, kT, tail_tol, quad_tol):
    """Smallest grid end with |phi(tau_max)| < tail_tol."""
    if kT == 0.0:
        # power tail |Re phi| -> alpha/tau^2
        guess = max(np.sqrt(alpha / tail_tol), 30.0 / xi)
    else:
        b = 2.0 * np.pi * kT  # thermal decay rate of phi
        guess = max(30.0 / xi, 26.0 / b)
    for _ in range(60):
        probe = abs(_phi_on_grid(np.array([guess]), alpha, xi, kT)[0])
        if probe < tail_tol:
            return guess
        guess *= 1.3
    raise QuadratureError(
        "phonon correlation tail did not decay below tolerance",
        residual=probe)


# -- polaron scattering rates ----------------------------------------


@dataclass(frozen=True)
class PolaronRates:
    """Phonon-induced scattering rates for a cavity-coupled emitter.

    chi_x/chi_y/chi_z carry the g^2 prefactor of the polaron dissipator,
    so they are complex rates in ps^-1 and enter the generator without
    further scaling.  gamma_ph is the adiabatic pure-dephasing rate seen
    by the emitter after cavity elimination; gamma_ph_weak_coupling is
    the lowest-order closed form 2 pi (g_r/kappa_c)^2 J(2 g_r) coth(...).
    """

    g: float                  # bare coupling, ps^-1
    kappa_c: float            # cavity linewidth, ps^-1
    g_r: float                # polaron-renormalised coupling g*B
    chi_x: complex
    chi_y: complex
    chi_z: complex
    gamma_ph: float
    gamma_ph_weak_coupling: float
    include_z: bool
    polaron_valid: bool


def polaron_rates(g: float, kappa_c: float, env: PhononEnvironment, *,
                  include_z: bool = True) -> PolaronRates:
    """Polaron-frame scattering integrals for coupling g and linewidth kappa_c.

    Parameters are angular frequencies in ps^-1.  The time integrals run
    over the environment's cached grid, whose end is defined by
    |phi| < tail_tol, so the truncated tails are negligible.
    """
    if g < 0 or kappa_c <= 0:
        raise ConfigurationError("need g >= 0 and kappa_c > 0")
    B = env.franck_condon
    g_r = g * B
    valid = (g / env.xi) < 0.1 if env.alpha_ps2 > 0 else True
    if not valid:
        warnings.warn(
            "coupling approaches the phonon cutoff (g/xi = "
            f"{g / env.xi:.2f}); polaron treatment marginal", stacklevel=2)

    if env.alpha_ps2 == 0.0 or g == 0.0:
        return PolaronRates(g, kappa_c, g_r, 0j, 0j, 0j, 0.0, 0.0,
                            include_z, valid)

    tau = env.tau_grid
    ephi = np.exp(env.phi_grid)
    emphi = np.exp(-env.phi_grid)
    lam_xx = 0.5 * B**2 * (ephi + emphi - 2.0)
    lam_yy = 0.5 * B**2 * (ephi - emphi)

    cos2 = np.cos(2.0 * g_r * tau)
    sin2 = np.sin(2.0 * g_r * tau)
    chi_x = g**2 * np.trapezoid(lam_xx, tau)
    chi_y = g**2 * np.trapezoid(cos2 * lam_yy, tau)
    chi_z = -g**2 * np.trapezoid(sin2 * lam_yy, tau)

    r = 4.0 * g_r / kappa_c
    gamma_ph = r**2 * chi_y.real
    if include_z:
        gamma_ph += chi_z.real * r * (1.0 - (r / 2.0) ** 2)

    coth = _coth(g_r / env.kT) if env.kT > 0 and g_r > 0 else 1.0
    gamma_wk = (2.0 * np.pi * (g_r / kappa_c) ** 2
                * env.spectral_density(2.0 * g_r) * coth)

    return PolaronRates(g, kappa_c, g_r, complex(chi_x), complex(chi_y),
                        complex(chi_z), float(gamma_ph), float(gamma_wk),
                        include_z, valid)
