"""Polaron-frame master equations and two-time dipole correlations.

The waveguide sources reduce to a two-level emitter with radiative decay
and pure dephasing.  The cavity source keeps the photon mode with at most
one excitation, giving the 4-dimensional Hilbert space
{|0,0>, |0,1>, |X,0>, |X,1>} indexed 2q + n for QD state q and photon
number n; a single initial excitation and vacuum photon environments make
the truncation exact (asserted downstream by the |X,1> population test).

Generators are built as explicit superoperator matrices in the
column-stacking convention, vec(A rho B) = (B^T kron A) vec(rho), and
eigendecomposed once.  Two-time correlations then follow from the quantum
regression theorem as finite sums  sum_jk c_jk e^{lambda_j tau} e^{mu_k t},
which downstream spectral transforms integrate analytically.

All dynamics are in the frame rotating at the polaron-shifted transition
frequency (cavity and filter resonant with it unless detuned explicitly);
frequency axes elsewhere are offsets from that origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigurationError, ConstructionError, DivergentTransformError
from .phonon import PolaronRates
from .units import uev_to_angular

# generator is dissipative: any eigenvalue real part above this aborts
_DISSIPATIVE_TOL = 1e-10
# pairwise eigenvalue gap below which the decomposition may be defective
_DEGENERACY_GAP = 1e-9
_DEGENERACY_COND = 1e8
_KAPPA_SPLIT = 1e-6
# regression coefficients below this fraction of the largest are dropped
_COEFF_PRUNE = 1e-13


# -- parameter records ------------------------------------------------


@dataclass(frozen=True)
class QDParams:
    """Bare emitter parameters (rates in ueV, frequency in meV)."""

    Gamma_bulk_uev: float = 1.0
    gamma_pd_uev: float = 0.0
    omega_X_mev: float = 0.0   # polaron-shifted line; spectral origin

    def __post_init__(self):
        if self.Gamma_bulk_uev < 0 or self.gamma_pd_uev < 0:
            raise ConfigurationError("emitter rates must be >= 0")

    @property
    def Gamma_bulk(self) -> float:
        return uev_to_angular(self.Gamma_bulk_uev)

    @property
    def gamma_pd(self) -> float:
        return uev_to_angular(self.gamma_pd_uev)


@dataclass(frozen=True)
class BareWaveguide:
    """Purcell-enhanced waveguide, no filter (case with flat collection)."""

    Gamma_D_uev: float
    Gamma_O_uev: float = 0.0

    def __post_init__(self):
        if self.Gamma_D_uev <= 0:
            raise ConfigurationError("detected rate Gamma_D must be > 0")
        if self.Gamma_O_uev < 0:
            raise ConfigurationError("loss rate Gamma_O must be >= 0")

    @property
    def Gamma_D(self) -> float:
        return uev_to_angular(self.Gamma_D_uev)

    @property
    def Gamma_O(self) -> float:
        return uev_to_angular(self.Gamma_O_uev)


@dataclass(frozen=True)
class FilteredWaveguide:
    """Waveguide followed by a Lorentzian spectral filter."""

    Gamma_D_uev: float
    kappa_f_uev: float
    Gamma_O_uev: float = 0.0
    omega_f_uev: float = 0.0   # filter center, offset from the line

    def __post_init__(self):
        if self.Gamma_D_uev <= 0:
            raise ConfigurationError("detected rate Gamma_D must be > 0")
        if self.kappa_f_uev <= 0:
            raise ConfigurationError("filter width kappa_f must be > 0")
        if self.Gamma_O_uev < 0:
            raise ConfigurationError("loss rate Gamma_O must be >= 0")

    @property
    def Gamma_D(self) -> float:
        return uev_to_angular(self.Gamma_D_uev)

    @property
    def Gamma_O(self) -> float:
        return uev_to_angular(self.Gamma_O_uev)

    @property
    def kappa_f(self) -> float:
        return uev_to_angular(self.kappa_f_uev)

    @property
    def omega_f(self) -> float:
        return uev_to_angular(self.omega_f_uev)


@dataclass(frozen=True)
class ResonantCavity:
    """QD coherently coupled to a single cavity mode.

    The cavity is locked to the polaron-shifted transition by
    construction; a nonzero detuning is rejected rather than silently
    accepted, since every formula here assumes resonance.
    """

    g_uev: float
    kappa_c_uev: float
    Gamma_O_uev: float = 1.0
    omega_c_uev: float = 0.0   # offset from the line; must stay 0

    def __post_init__(self):
        if self.g_uev <= 0:
            raise ConfigurationError("coupling g must be > 0")
        if self.kappa_c_uev <= 0:
            raise ConfigurationError("cavity width kappa_c must be > 0")
        if self.Gamma_O_uev < 0:
            raise ConfigurationError("loss rate Gamma_O must be >= 0")
        if self.omega_c_uev != 0.0:
            raise ConfigurationError(
                "cavity is resonant with the polaron-shifted line by "
                "construction; omega_c_uev must be 0")

    @property
    def g(self) -> float:
        return uev_to_angular(self.g_uev)

    @property
    def kappa_c(self) -> float:
        return uev_to_angular(self.kappa_c_uev)

    @property
    def Gamma_O(self) -> float:
        return uev_to_angular(self.Gamma_O_uev)


SourceArchitecture = Union[BareWaveguide, FilteredWaveguide, ResonantCavity]


# -- superoperator helpers (column-stacking convention) ----------------


def spre(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    return np.kron(np.eye(d), op)


def spost(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    return np.kron(op.T, np.eye(d))


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> a rho b."""
    return np.kron(b.T, a)


def dissipator(c: np.ndarray) -> np.ndarray:
    """Lindblad dissipator L_c[rho] = c rho c+ - 1/2 {c+c, rho}."""
    cdc = c.conj().T @ c
    return sandwich(c, c.conj().T) - 0.5 * (spre(cdc) + spost(cdc))


def _vec(m: np.ndarray) -> np.ndarray:
    return m.ravel(order="F")


# -- decomposition ----------------------------------------------------


@dataclass(frozen=True)
class LiouvillianDecomposition:
    """Eigendecomposition L = V diag(eigenvalues) V^-1 of a generator.

    init_coeffs are the components of the initial state in the eigenbasis
    (V^-1 vec rho0).  kappa_split records the relative linewidth nudge
    applied when the raw generator was defective (degenerate_modes True).
    """

    dim: int
    generator: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    right_vectors: np.ndarray = field(repr=False)
    left_vectors: np.ndarray = field(repr=False)    # rows: V^-1
    init_coeffs: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    Gamma_O: float
    degenerate_modes: bool = False
    kappa_split: float = 0.0

    @property
    def steady_index(self) -> int:
        return int(np.argmin(np.abs(self.eigenvalues)))


def _decompose(liouv: np.ndarray, rho0_vec: np.ndarray, sigma: np.ndarray,
               Gamma_O: float, *, degenerate=False,
               kappa_split=0.0) -> LiouvillianDecomposition:
    dim = sigma.shape[0]
    evals, vr = np.linalg.eig(liouv)
    if np.any(evals.real > _DISSIPATIVE_TOL):
        raise ConstructionError(
            "generator has an amplifying eigenvalue "
            f"(max Re = {evals.real.max():.3e}); sign/convention bug")
    n_zero = int(np.sum(np.abs(evals) < 1e-11))
    if n_zero != 1:
        raise ConstructionError(
            f"expected exactly one stationary mode, found {n_zero}")
    vl = np.linalg.inv(vr)
    return LiouvillianDecomposition(
        dim=dim, generator=liouv, eigenvalues=evals, right_vectors=vr,
        left_vectors=vl, init_coeffs=vl @ rho0_vec, sigma=sigma,
        Gamma_O=Gamma_O, degenerate_modes=degenerate, kappa_split=kappa_split)


def build_waveguide_generator(qd: QDParams, arch: SourceArchitecture
                              ) -> LiouvillianDecomposition:
    """Two-level emitter: decay Gamma_tot = Gamma_O + Gamma_D plus pure
    dephasing at 2 gamma.  Basis {|0>, |X>}."""
    if not isinstance(arch, (BareWaveguide, FilteredWaveguide)):
        raise ConfigurationError("waveguide generator needs a waveguide "
                                 "architecture")
    Gamma_tot = arch.Gamma_D + arch.Gamma_O
    gamma = qd.gamma_pd
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]])
    liouv = (Gamma_tot * dissipator(sigma)
             + 2.0 * gamma * dissipator(sigma.conj().T @ sigma))
    rho0 = np.zeros((2, 2))
    rho0[1, 1] = 1.0
    return _decompose(liouv.astype(complex), _vec(rho0).astype(complex),
                      sigma, arch.Gamma_O)


def _cavity_liouvillian(qd: QDParams, arch: ResonantCavity,
                        rates: PolaronRates, kappa_c: float) -> np.ndarray:
    sigma, a = cavity_ops()
    g_r = rates.g_r
    X = sigma.conj().T @ a + a.conj().T @ sigma
    Y = 1j * (sigma.conj().T @ a - a.conj().T @ sigma)
    Z = sigma.conj().T @ sigma - a.conj().T @ a

    H = g_r * X
    liouv = (-1j * (spre(H) - spost(H))
             + kappa_c * dissipator(a)
             + arch.Gamma_O * dissipator(sigma)
             + 2.0 * qd.gamma_pd * dissipator(sigma.conj().T @ sigma))

    # phonon dissipator: -([X, X rho] chi_X + [Y, Y rho] chi_Y
    #                      + [Y, Z rho] chi_Z + h.c.), chi already g^2-scaled
    def comm_pair(A, B, chi):
        fwd = chi * (spre(A @ B) - sandwich(B, A))
        bwd = np.conj(chi) * (spost(B @ A) - sandwich(A, B))
        return fwd + bwd

    liouv -= comm_pair(X, X, rates.chi_x)
    liouv -= comm_pair(Y, Y, rates.chi_y)
    liouv -= comm_pair(Y, Z, rates.chi_z)
    return liouv


def cavity_ops():
    """(sigma, a) on the 4-dim space, index 2q + n."""
    sigma = np.zeros((4, 4), dtype=complex)
    sigma[0, 2] = 1.0
    sigma[1, 3] = 1.0
    a = np.zeros((4, 4), dtype=complex)
    a[0, 1] = 1.0
    a[2, 3] = 1.0
    return sigma, a


def _is_defective(evals: np.ndarray, vr: np.ndarray) -> bool:
    """True when the spectrum carries a Jordan-like confluent pair.

    Exactly repeated eigenvalues are generic here (a coherence sector and
    its conjugate share real eigenvalues) and harmless as long as their
    eigenvectors stay independent; only aligned eigenvectors signal a
    defective pair.  Near an exceptional point the machine-precision gap
    reopens to ~sqrt(eps), so an ill-conditioned eigenvector matrix is
    used as the backstop test.
    """
    gaps = np.abs(evals[:, None] - evals[None, :])
    np.fill_diagonal(gaps, np.inf)
    for i, j in zip(*np.where(gaps < _DEGENERACY_GAP)):
        if i < j and abs(vr[:, i].conj() @ vr[:, j]) > 1.0 - 1e-6:
            return True
    return bool(np.linalg.cond(vr) > _DEGENERACY_COND)


def build_cavity_generator(qd: QDParams, arch: ResonantCavity,
                           rates: PolaronRates) -> LiouvillianDecomposition:
    """QD + single-photon cavity mode generator, eigendecomposed.

    At the exceptional point kappa_c = 4 g_r the raw generator is
    defective; the linewidth is then nudged by a relative 1e-6 to split
    the confluent pair, which perturbs downstream spectra at the same
    relative order (flagged via degenerate_modes).
    """
    if abs(rates.g - arch.g) > 1e-12 * max(1.0, arch.g) or \
            abs(rates.kappa_c - arch.kappa_c) > 1e-12 * max(1.0, arch.kappa_c):
        raise ConfigurationError(
            "polaron rates were computed for different (g, kappa_c) than "
            "the architecture under construction")

    sigma, _ = cavity_ops()
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[2, 2] = 1.0

    liouv = _cavity_liouvillian(qd, arch, rates, arch.kappa_c)
    evals, vr = np.linalg.eig(liouv)
    defective = _is_defective(evals, vr)
    if defective:
        kappa = arch.kappa_c * (1.0 + _KAPPA_SPLIT)
        liouv = _cavity_liouvillian(qd, arch, rates, kappa)
        return _decompose(liouv, _vec(rho0), sigma, arch.Gamma_O,
                          degenerate=True, kappa_split=_KAPPA_SPLIT)
    return _decompose(liouv, _vec(rho0), sigma, arch.Gamma_O)


# -- two-time correlation via the regression theorem -------------------


@dataclass(frozen=True)
class DipoleCorrelation:
    """g1(t+tau, t) = sum_jk c[j,k] e^{lambdas[j] tau} e^{mus[k] t}.

    Insignificant modes are pruned; the stationary (vacuum) mode carries
    no dipole weight and never survives pruning.  pop_coeffs[k] gives the
    excited population as sum_k pop_coeffs[k] e^{mus[k] t} on the same
    t-mode set.
    """

    lambdas: np.ndarray
    mus: np.ndarray
    c: np.ndarray
    pop_coeffs: np.ndarray
    degenerate_modes: bool = False

    def eval(self, t, tau):
        """g1(t+tau, t) broadcast over array t and tau."""
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        e_tau = np.exp(np.multiply.outer(tau, self.lambdas))
        e_t = np.exp(np.multiply.outer(t, self.mus))
        return np.einsum("...j,jk,...k->...", e_tau, self.c, e_t)

    def population(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(np.multiply.outer(t, self.mus)) @ self.pop_coeffs

    @property
    def initial_value(self) -> complex:
        return complex(self.c.sum())


def dipole_correlation(decomp: LiouvillianDecomposition
                       ) -> DipoleCorrelation:
    """Exact sum-of-exponentials form of <sigma+(t+tau) sigma(t)>.

    Raises DivergentTransformError if any contributing mode fails to
    decay (its Laplace transform would not exist).
    """
    sig = decomp.sigma
    V, Vinv = decomp.right_vectors, decomp.left_vectors
    w = _vec(sig).conj() @ V                       # trace against sigma+
    Bmat = Vinv @ spre(sig) @ V
    a = decomp.init_coeffs
    c_full = w[:, None] * Bmat * a[None, :]

    pop_full = (_vec(sig.conj().T @ sig).conj() @ V) * a

    scale = np.abs(c_full).max()
    if scale == 0.0:
        raise DivergentTransformError("dipole correlation is identically "
                                      "zero; nothing to transform")
    keep_j = np.abs(c_full).max(axis=1) > _COEFF_PRUNE * scale
    keep_k = (np.abs(c_full).max(axis=0) > _COEFF_PRUNE * scale) \
        | (np.abs(pop_full) > _COEFF_PRUNE * max(scale, np.abs(pop_full).max()))

    lambdas = decomp.eigenvalues[keep_j]
    mus = decomp.eigenvalues[keep_k]
    if np.any(lambdas.real > -1e-14) or np.any(mus.real > -1e-14):
        raise DivergentTransformError(
            "a contributing regression mode does not decay; spectral "
            "transforms would diverge")
    return DipoleCorrelation(
        lambdas=lambdas, mus=mus, c=c_full[np.ix_(keep_j, keep_k)],
        pop_coeffs=pop_full[keep_k],
        degenerate_modes=decomp.degenerate_modes)


# -- adiabatic (cavity-eliminated) rates -------------------------------


@dataclass(frozen=True)
class AdiabaticRates:
    """Effective two-level rates after adiabatic cavity elimination.

    Two Purcell-rate conventions coexist in the source material: the
    input-output route gives Gamma_cav = 4 g^2 / kappa_c (bare g), the
    polaron-frame elimination gives 4 g_r^2 / kappa_c.  Both are carried;
    Gamma_tot follows the polaron convention, and reports should surface
    the difference rather than hide it.
    """

    Gamma_tot: float
    gamma_tot: float
    Gamma_cav: float | None            # polaron convention (used in totals)
    Gamma_cav_bare: float | None
    adiabatic_valid: bool
    strong_coupling: bool


def adiabatic_rates(qd: QDParams, arch: SourceArchitecture,
                    rates: PolaronRates | None = None) -> AdiabaticRates:
    gamma = qd.gamma_pd
    if isinstance(arch, (BareWaveguide, FilteredWaveguide)):
        Gamma_tot = arch.Gamma_D + arch.Gamma_O
        valid = (arch.Gamma_D < arch.kappa_f
                 if isinstance(arch, FilteredWaveguide) else True)
        return AdiabaticRates(Gamma_tot, gamma, None, None, valid, False)
    if not isinstance(arch, ResonantCavity):
        raise ConfigurationError(f"unknown architecture {type(arch).__name__}")
    if rates is None:
        raise ConfigurationError("cavity adiabatic rates need PolaronRates")
    Gamma_cav = 4.0 * rates.g_r**2 / arch.kappa_c
    Gamma_cav_bare = 4.0 * arch.g**2 / arch.kappa_c
    return AdiabaticRates(
        Gamma_tot=arch.Gamma_O + Gamma_cav,
        gamma_tot=gamma + rates.gamma_ph,
        Gamma_cav=Gamma_cav,
        Gamma_cav_bare=Gamma_cav_bare,
        adiabatic_valid=Gamma_cav < arch.kappa_c,
        strong_coupling=4.0 * arch.g > arch.kappa_c)
