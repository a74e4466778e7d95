"""Unit system and physical constants.

All internal frequencies, rates, and energies are angular frequencies in
ps^-1 (hbar = 1).  Public constructors accept meV / ueV / K and convert at
the boundary; helpers here are the single source of truth for that.
"""

from __future__ import annotations

# hbar in meV ps, Boltzmann constant in meV/K
HBAR_MEV_PS = 0.6582119569
KB_MEV_K = 0.08617333


def mev_to_angular(energy_mev: float) -> float:
    """meV -> angular frequency in ps^-1."""
    return energy_mev / HBAR_MEV_PS


def uev_to_angular(energy_uev: float) -> float:
    """ueV -> angular frequency in ps^-1."""
    return energy_uev * 1e-3 / HBAR_MEV_PS


def angular_to_mev(omega_ps: float) -> float:
    return omega_ps * HBAR_MEV_PS


def angular_to_uev(omega_ps: float) -> float:
    return omega_ps * HBAR_MEV_PS * 1e3


def thermal_energy_angular(temperature_K: float) -> float:
    """k_B T as an angular frequency (ps^-1).  Zero for T = 0."""
    return KB_MEV_K * temperature_K / HBAR_MEV_PS
