"""Physical constants in the unit system used throughout the package.

Energies are eV in the band solver, meV/ueV in the device and gate layers;
lengths are nm and times are ns.
"""

import scipy.constants as const

#: hbar^2 / (2 m0) in eV nm^2 (~0.0381).
HBAR2_2M0_EV_NM2 = const.hbar**2 / (2 * const.m_e) / const.e * 1e18
#: Same quantity in meV nm^2.
HBAR2_2M0_MEV_NM2 = HBAR2_2M0_EV_NM2 * 1e3

#: Reduced Planck constant in meV ns and ueV ns.
HBAR_MEV_NS = const.hbar / const.e * 1e3 * 1e9
HBAR_UEV_NS = HBAR_MEV_NS * 1e3

#: q^2 / (4 pi eps0) in eV nm (~1.44).
COULOMB_EV_NM = const.e / (4 * const.pi * const.epsilon_0) * 1e9

#: Bohr magneton in meV / T.
MU_B_MEV_PER_T = const.physical_constants["Bohr magneton in eV/T"][0] * 1e3
