"""Two-colour emission spectra and their architecture filtering.

The bare (out-of-plane) spectrum separates into a zero-phonon part,
rational in both frequencies through the regression modes, and a phonon
sideband part, the product of an analytic population transform and the
numerically Fourier-transformed lineshape of G(tau) - B^2.  Everything is
evaluated in sheared coordinates (u, s) = (omega, nu - omega), where both
transforms are one-sided in their own variable and the Jacobian is one.

Reduced spectra (divided by the out-of-plane rate Gamma_O) are used
internally so the Gamma_O = 0 architectures stay finite; absolute powers
reinstate the prefactor.  Frequencies are angular ps^-1 offsets from the
polaron-shifted line.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DipoleCorrelation
from .errors import (ConfigurationError, DomainError,
                     UndefinedEfficiencyError)
from .phonon import PhononEnvironment
from .units import angular_to_mev

_FILTER_KINDS = ("unity", "filter", "cavity")

# master FFT sizing for the sideband lineshape
_N_FFT_MIN = 1 << 22
# master-grid values are kept out to this many cutoff widths; beyond,
# the two-term large-frequency asymptote is already accurate
_KEEP_XI_MULT = 15.0


# -- filter / cavity response -----------------------------------------


@dataclass(frozen=True)
class FilterResponse:
    """Complex amplitude response h(omega), |h| <= 1, |h(center)| = 1.

    kind "filter" is the Lorentzian transmission (kappa/2)/(i d - kappa/2)
    up to sign, kind "cavity" the input-output form with an extra i; both
    share |h|^2 = (kappa/2)^2 / (d^2 + (kappa/2)^2).
    """

    kind: str
    kappa: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in _FILTER_KINDS:
            raise ConfigurationError(f"unknown filter kind {self.kind!r}")
        if self.kind != "unity" and self.kappa <= 0:
            raise ConfigurationError("filter width kappa must be > 0")

    @classmethod
    def unity(cls) -> "FilterResponse":
        return cls("unity")

    @classmethod
    def lorentzian(cls, kappa: float, center: float = 0.0):
        return cls("filter", kappa, center)

    @classmethod
    def cavity(cls, kappa: float, center: float = 0.0):
        return cls("cavity", kappa, center)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind == "unity":
            return np.ones(omega.shape, dtype=complex)
        half = 0.5 * self.kappa
        denom = 1j * (omega - self.center) - half
        num = half if self.kind == "filter" else 1j * half
        return num / denom

    def abs2(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind == "unity":
            return np.ones(omega.shape)
        half2 = (0.5 * self.kappa) ** 2
        return half2 / ((omega - self.center) ** 2 + half2)


@dataclass(frozen=True)
class GreensFunction:
    """Propagation factor from the emitter to the detector.

    G(omega, nu) = (channel_rate / Gamma_O) h*(omega) h(nu); the reduced
    form keeps only channel_rate * h*(omega) h(nu) so that Gamma_O = 0
    sources remain well defined.
    """

    channel_rate: float
    Gamma_O: float
    response: FilterResponse

    def reduced(self, omega, nu):
        h = self.response
        return self.channel_rate * np.conj(h(omega)) * h(nu)

    @property
    def prefactor(self) -> float:
        if self.Gamma_O == 0.0:
            raise UndefinedEfficiencyError(
                "Green's function prefactor is undefined for Gamma_O = 0")
        return self.channel_rate / self.Gamma_O


def greens_function(arch) -> GreensFunction:
    """Architecture-specific Green's function.

    The cavity prefactor uses the bare input-output rate 4 g^2 / kappa_c,
    which is exact for the emitted field regardless of the polaron
    renormalisation entering the internal dynamics.
    """
    from .dynamics import BareWaveguide, FilteredWaveguide, ResonantCavity
    if isinstance(arch, BareWaveguide):
        return GreensFunction(arch.Gamma_D, arch.Gamma_O,
                              FilterResponse.unity())
    if isinstance(arch, FilteredWaveguide):
        return GreensFunction(
            arch.Gamma_D, arch.Gamma_O,
            FilterResponse.lorentzian(arch.kappa_f, arch.omega_f))
    if isinstance(arch, ResonantCavity):
        return GreensFunction(4.0 * arch.g**2 / arch.kappa_c, arch.Gamma_O,
                              FilterResponse.cavity(arch.kappa_c, 0.0))
    raise ConfigurationError(f"unknown architecture {type(arch).__name__}")


# -- sideband lineshape ------------------------------------------------


@dataclass(frozen=True)
class SidebandLineshape:
    """L(omega) = int_0^inf (G(tau) - B^2) e^{-i omega tau} dtau.

    Values live on a uniform master grid from a zero-padded FFT of the
    cached correlation grid with an Euler-Maclaurin endpoint correction
    (trapezoid error cancelled through O(dtau^2), leaving O(dtau^4)).
    Off-grid frequencies use the exact two-term large-|omega| asymptote
    f(0)/(i w) + f'(0)/(i w)^2.
    """

    omega0: float                 # first master-grid frequency
    domega: float
    values: np.ndarray = field(repr=False)
    f0: float                     # 1 - B^2
    fp0: complex                  # dG/dtau at 0+
    total: complex                # L(0) variant: plain integral of f

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.empty(omega.shape, dtype=complex)
        n = self.values.size
        pos = (omega - self.omega0) / self.domega
        inside = (pos >= 0.0) & (pos <= n - 1)
        idx = np.clip(pos[inside].astype(int), 0, n - 2)
        frac = pos[inside] - idx
        out[inside] = (1.0 - frac) * self.values[idx] \
            + frac * self.values[idx + 1]
        w_out = omega[~inside]
        with np.errstate(divide="ignore", invalid="ignore"):
            iw = 1j * w_out
            out[~inside] = self.f0 / iw + self.fp0 / iw**2
        return out

    def real_part(self, omega):
        return self(omega).real


def sideband_lineshape(env: PhononEnvironment,
                       n_fft_min: int = _N_FFT_MIN) -> SidebandLineshape:
    """Numerical one-sided Fourier transform of G - B^2 for this bath."""
    B2 = env.B2
    f = env.G_grid - B2
    f0 = 1.0 - B2
    fp0 = -1j * env.j1           # G'(0) = G(0) phi'(0), phi'(0) = -i j1
    if env.alpha_ps2 == 0.0:
        # no sideband at all; a flat zero lineshape keeps callers simple
        return SidebandLineshape(0.0, 1.0, np.zeros(2, dtype=complex),
                                 0.0, 0j, 0j)
    dtau = env.tau_step
    if abs(f[-1]) > 1e-8:
        raise ConfigurationError(
            "correlation grid too short for the sideband transform: "
            f"|G(tau_max) - B^2| = {abs(f[-1]):.2e}")
    n_fft = 1 << int(np.ceil(np.log2(max(f.size * 1.25, n_fft_min))))
    fft = np.fft.fft(f, n=n_fft)
    omega = 2.0 * np.pi * np.fft.fftfreq(n_fft, d=dtau)
    # one-sided trapezoid with Euler-Maclaurin endpoint correction
    vals = dtau * (fft - 0.5 * f0) + (dtau**2 / 12.0) * (fp0 - 1j * omega * f0)
    order = np.fft.fftshift(omega).argsort(kind="stable")  # stable identity
    omega = np.fft.fftshift(omega)
    vals = np.fft.fftshift(vals)
    keep = np.abs(omega) <= _KEEP_XI_MULT * env.xi
    omega, vals = omega[keep], vals[keep]
    total = complex(np.trapezoid(f, dx=dtau) - 0.5 * f0 * dtau
                    + dtau**2 / 12.0 * fp0)
    return SidebandLineshape(float(omega[0]), float(omega[1] - omega[0]),
                             np.ascontiguousarray(vals), f0, fp0, total)


# -- two-colour spectral evaluators (reduced by Gamma_O) ----------------


@dataclass(frozen=True)
class ZplSpectrum:
    """Zero-phonon part, B^2 sum_jk c_jk A_j(omega) B_k(nu - omega).

    term1 is the unsymmetrised transform in sheared coordinates; the
    symmetrised spectrum is term1(u, s) + conj(term1(u + s, -s)).
    """

    B2: float
    lambdas: np.ndarray = field(repr=False)
    mus: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)          # B^2 folded in

    def _A(self, u):
        return 1.0 / (1j * np.asarray(u, dtype=float)[..., None]
                      - self.lambdas)

    def _B(self, s):
        return 1.0 / (-1j * np.asarray(s, dtype=float)[..., None] - self.mus)

    def term1(self, u, s):
        """Unsymmetrised transform on the (u, s) product grid."""
        return np.einsum("uj,jk,sk->us", self._A(u), self.c, self._B(s),
                         optimize=True)

    def term2(self, u, s):
        """Mirror term conj(term1(u+s, -s)) on the product grid."""
        u = np.asarray(u, dtype=float)
        s = np.asarray(s, dtype=float)
        A = 1.0 / (1j * (u[:, None, None] + s[None, :, None])
                   - self.lambdas[None, None, :])
        Cm = self._B(-s) @ self.c.T          # C_j(-s), shape (ns, j)
        return np.conj(np.einsum("usj,sj->us", A, Cm, optimize=True))

    def sym(self, omega, nu):
        """Symmetrised S_ZPL(omega, nu) on broadcast arrays."""
        omega = np.asarray(omega, dtype=float)
        nu = np.asarray(nu, dtype=float)
        amp = np.einsum("...j,jk,...k->...", self._A(omega), self.c,
                        self._B(nu - omega))
        amp_m = np.einsum("...j,jk,...k->...", self._A(nu), self.c,
                          self._B(omega - nu))
        return amp + np.conj(amp_m)

    def diag(self, omega):
        """Diagonal (measured) ZPL spectrum, real."""
        b0 = -1.0 / self.mus
        col = self.c @ b0
        amp = self._A(omega) @ col
        return 2.0 * amp.real

    @property
    def power(self) -> float:
        """Reduced integral of the diagonal: 2 pi B^2 P(0)."""
        b0 = -1.0 / self.mus
        return float(2.0 * np.pi * np.real(self.c @ b0).sum())


@dataclass(frozen=True)
class SbSpectrum:
    """Sideband part, population transform times lineshape."""

    mus: np.ndarray = field(repr=False)
    pop: np.ndarray = field(repr=False)
    lineshape: SidebandLineshape

    def _P(self, s):
        return (1.0 / (-1j * np.asarray(s, dtype=float)[..., None]
                       - self.mus)) @ self.pop

    def term1(self, u, s):
        return np.multiply.outer(self.lineshape(u), self._P(s))

    def term2(self, u, s):
        u = np.asarray(u, dtype=float)
        s = np.asarray(s, dtype=float)
        L = self.lineshape(u[:, None] + s[None, :])
        return np.conj(L * self._P(-s)[None, :])

    def sym(self, omega, nu):
        omega = np.asarray(omega, dtype=float)
        nu = np.asarray(nu, dtype=float)
        return (self.lineshape(omega) * self._P(nu - omega)
                + np.conj(self.lineshape(nu) * self._P(omega - nu)))

    def diag(self, omega):
        return 2.0 * self.P0 * self.lineshape(omega).real

    @property
    def P0(self) -> float:
        """Time-integrated population sum_k pop_k (-1/mu_k), real."""
        val = complex(self.pop @ (-1.0 / self.mus))
        return float(val.real)

    @property
    def power(self) -> float:
        """Reduced integral of the diagonal: 2 pi (1 - B^2) P(0)."""
        return 2.0 * np.pi * self.lineshape.f0 * self.P0


@dataclass(frozen=True)
class BareSpectrum:
    """Bare two-colour spectrum of the emitter, reduced by Gamma_O."""

    zpl: ZplSpectrum
    sb: SbSpectrum
    Gamma_O: float
    B2: float

    def diag_reduced(self, omega):
        return self.zpl.diag(omega) + self.sb.diag(omega)

    def sym_reduced(self, omega, nu):
        return self.zpl.sym(omega, nu) + self.sb.sym(omega, nu)

    @property
    def P_ZPL(self) -> float:
        return self.Gamma_O * self.zpl.power

    @property
    def P_SB(self) -> float:
        return self.Gamma_O * self.sb.power

    @property
    def P_O(self) -> float:
        return self.P_ZPL + self.P_SB

    @property
    def power_reduced(self) -> float:
        return self.zpl.power + self.sb.power

    @property
    def zpl_fraction(self) -> float:
        return self.zpl.power / self.power_reduced


def build_bare_spectrum(corr: DipoleCorrelation, env: PhononEnvironment,
                        Gamma_O: float,
                        lineshape: SidebandLineshape | None = None
                        ) -> BareSpectrum:
    """Assemble the separated ZPL + sideband spectrum for one source."""
    if lineshape is None:
        lineshape = sideband_lineshape(env)
    B2 = env.B2
    zpl = ZplSpectrum(B2=B2, lambdas=corr.lambdas, mus=corr.mus,
                      c=B2 * corr.c)
    sb = SbSpectrum(mus=corr.mus, pop=corr.pop_coeffs, lineshape=lineshape)
    p0 = complex(corr.pop_coeffs @ (-1.0 / corr.mus))
    if abs(p0.imag) > 1e-10 * max(abs(p0.real), 1e-300):
        raise ConfigurationError(
            "population transform has a spurious imaginary part "
            f"({p0.imag:.2e}); regression modes are inconsistent")
    return BareSpectrum(zpl=zpl, sb=sb, Gamma_O=Gamma_O, B2=B2)


# -- quadrature grids ---------------------------------------------------


@dataclass(frozen=True)
class GridPolicy:
    """Knobs for the nonuniform product grids of the merit integrals."""

    pole_halfwidth: float = 40.0      # in units of each mode's decay rate
    pole_step_div: float = 12.0
    zpl_halfwidth: float = 50.0       # in units of Gamma_tot + 2 gamma_tot
    zpl_step_div: float = 40.0
    filter_halfwidth: float = 40.0    # in units of kappa / 2
    filter_step_div: float = 16.0
    broadband_halfwidth: float = 10.0  # in units of xi
    broadband_step_div: float = 400.0
    tail_nodes: int = 40
    tail_limit: float = 3.0e4         # ps^-1

    def coarsened(self) -> "GridPolicy":
        return replace(self, pole_step_div=self.pole_step_div / 2,
                       zpl_step_div=self.zpl_step_div / 2,
                       filter_step_div=self.filter_step_div / 2,
                       broadband_step_div=self.broadband_step_div / 2,
                       tail_nodes=max(16, self.tail_nodes // 2))


def _windows_to_nodes(windows):
    parts = []
    for lo, hi, step in windows:
        if hi <= lo or step <= 0:
            raise ConfigurationError("bad grid window")
        n = max(int(np.ceil((hi - lo) / step)), 8)
        parts.append(np.linspace(lo, hi, n + 1))
    nodes = np.unique(np.concatenate(parts))
    keep = np.ones(nodes.size, dtype=bool)
    keep[1:] = np.diff(nodes) > 1e-12
    return nodes[keep]


def _trapezoid_weights(x):
    w = np.empty_like(x)
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    return w


_GL_TAIL_X, _GL_TAIL_W = np.polynomial.legendre.leggauss(24)


def _log_tail(edge, limit, n_nodes, sign):
    """Gauss-Legendre nodes/weights for the (edge, limit) tail in log space."""
    if edge >= limit:
        return np.empty(0), np.empty(0)
    y0, y1 = np.log(edge), np.log(limit)
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * xg
    nodes = np.exp(y)
    weights = 0.5 * (y1 - y0) * wg * nodes
    return sign * nodes, weights


def build_axis(windows, policy: GridPolicy):
    """Sorted nodes + weights: trapezoid core windows plus log-GL tails."""
    core = _windows_to_nodes(windows)
    w_core = _trapezoid_weights(core)
    edge = max(abs(core[0]), abs(core[-1]))
    n_pos, w_pos = _log_tail(max(core[-1], 1e-6 * edge + edge * 0)
                             if core[-1] > 0 else edge * 1e-3,
                             policy.tail_limit, policy.tail_nodes, +1)
    nodes = [core]
    weights = [w_core]
    n_pos, w_pos = _log_tail(max(core[-1], 1e-12), policy.tail_limit,
                             policy.tail_nodes, +1)
    n_neg, w_neg = _log_tail(max(-core[0], 1e-12), policy.tail_limit,
                             policy.tail_nodes, -1)
    nodes = np.concatenate([n_neg[::-1], core, n_pos])
    weights = np.concatenate([w_neg[::-1], w_core, w_pos])
    return nodes, weights


def pole_windows(modes, policy: GridPolicy):
    """One window per regression mode, centered on its oscillation."""
    wins = []
    for lam in np.atleast_1d(modes):
        width = abs(lam.real)
        if width == 0.0:
            continue
        half = policy.pole_halfwidth * width
        wins.append((lam.imag - half, lam.imag + half,
                     width / policy.pole_step_div))
    return wins


def filter_windows(response: FilterResponse, policy: GridPolicy):
    if response.kind == "unity":
        return []
    half = policy.filter_halfwidth * 0.5 * response.kappa
    step = 0.5 * response.kappa / policy.filter_step_div
    return [(response.center - half, response.center + half, step)]


def broadband_window(xi: float, policy: GridPolicy):
    half = policy.broadband_halfwidth * xi
    return [(-half, half, xi / policy.broadband_step_div)]


def zpl_window(zpl_scale: float, policy: GridPolicy):
    half = policy.zpl_halfwidth * zpl_scale
    return [(-half, half, zpl_scale / policy.zpl_step_div)]


# -- sideband fraction --------------------------------------------------


def sideband_fraction(sb_or_lineshape, response: FilterResponse,
                      xi: float, policy: GridPolicy | None = None) -> float:
    """Fraction of sideband power the filter or cavity lets through.

    F = int |h|^2 Re L / int Re L over the (broad) sideband; with no
    sideband at all (alpha = 0) the convention is F = 1 since nothing is
    there to remove.
    """
    ls = (sb_or_lineshape.lineshape
          if isinstance(sb_or_lineshape, SbSpectrum) else sb_or_lineshape)
    if policy is None:
        policy = GridPolicy()
    if ls.f0 == 0.0:
        return 1.0
    wins = broadband_window(xi, policy) + filter_windows(response, policy)
    nodes, weights = build_axis(wins, policy)
    re = ls(nodes).real
    denom = float(weights @ re)
    num = float(weights @ (response.abs2(nodes) * re))
    if denom <= 0.0:
        raise DomainError("sideband power integral is not positive")
    return num / denom


# -- spectrum export ----------------------------------------------------


def spectrum_table(bare: BareSpectrum, greens: GreensFunction, xi: float,
                   zpl_scale: float, policy: GridPolicy | None = None):
    """(omega_meV, S_diag, S_ZPL_diag, S_SB_diag) detected-diagonal table.

    Columns carry the channel rate and |h|^2 so case (i) with
    Gamma_D = Gamma_O reproduces the bare spectrum.
    """
    if policy is None:
        policy = GridPolicy()
    wins = (zpl_window(zpl_scale, policy)
            + pole_windows(np.concatenate([bare.zpl.lambdas, bare.zpl.mus]),
                           policy)
            + filter_windows(greens.response, policy)
            + broadband_window(xi, policy))
    omega = _windows_to_nodes(wins)
    h2 = greens.response.abs2(omega)
    zpl_d = greens.channel_rate * h2 * bare.zpl.diag(omega)
    sb_d = greens.channel_rate * h2 * bare.sb.diag(omega)
    return (np.array([angular_to_mev(w) for w in omega]),
            zpl_d + sb_d, zpl_d, sb_d)


def write_spectrum_csv(path, table, header_lines=()):
    omega_mev, s_all, s_zpl, s_sb = table
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("omega_meV,S_diag,S_ZPL_diag,S_SB_diag\n")
        for row in zip(omega_mev, s_all, s_zpl, s_sb):
            fh.write(",".join(f"{v:.9e}" for v in row) + "\n")
