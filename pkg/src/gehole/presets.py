"""Catalog of nominal material and device constants.

Each entry is (value, unit, source).  ``render_catalog`` writes INI text that
``parse_catalog`` reads back to the same values.
"""

from __future__ import annotations

import configparser

from .gate import GE_WKB, SI_WKB, GateParams
from .materials import GE, SI, SIGE, AL2O3, StrainState
from .qtm import NoiseModel

NOMINAL = "nominal device table"
MATERIAL = "material constant"
FITTED = "fitted tunnelling model"
MODEL = "model choice"

_strain = StrainState()
_gate = GateParams()
_noise = NoiseModel()

CATALOG: dict[str, dict[str, tuple]] = {
    "Ge": {
        "gamma1": (GE.gamma1, "1", NOMINAL),
        "gamma2": (GE.gamma2, "1", NOMINAL),
        "gamma3": (GE.gamma3, "1", NOMINAL),
        "eps_r": (GE.dielectric_constant, "1", NOMINAL),
        "m_par": (GE_WKB.m_star, "m0", FITTED),
        "t0": (GE_WKB.t0, "meV", FITTED),
    },
    "Si": {
        "gamma1": (SI.gamma1, "1", MATERIAL),
        "gamma2": (SI.gamma2, "1", MATERIAL),
        "gamma3": (SI.gamma3, "1", MATERIAL),
        "eps_r": (SI.dielectric_constant, "1", MATERIAL),
        "m_par": (SI_WKB.m_star, "m0", FITTED),
        "t0": (SI_WKB.t0, "meV", FITTED),
    },
    "SiGe": {
        "composition_Ge": (0.8, "1", MATERIAL),
        "eps_r": (SIGE.dielectric_constant, "1", NOMINAL),
        "valence_band_offset": (-SIGE.valence_band_edge, "eV", MATERIAL),
    },
    "Al2O3": {"eps_r": (AL2O3.dielectric_constant, "1", NOMINAL)},
    "strain": {
        "eps_xx": (_strain.eps_xx, "1", MATERIAL),
        "eps_yy": (_strain.eps_yy, "1", MATERIAL),
        "eps_zz": (_strain.eps_zz, "1", MATERIAL),
        "a_v": (_strain.a_v, "eV", MATERIAL),
        "b_v": (_strain.b_v, "eV", MATERIAL),
    },
    "device": {
        "plunger_edge": (20.0, "nm", NOMINAL),
        "barrier_gate_length_offset": (4.0, "nm (length = L_S - offset)", NOMINAL),
        "well_thickness": (20.0, "nm", NOMINAL),
        "E_b0": (GE_WKB.E_b0, "meV", FITTED),
        "beta": (GE_WKB.beta, "1", FITTED),
    },
    "gate": {
        "E_z": (_gate.E_z, "meV", NOMINAL),
        "dE_z": (_gate.dE_z, "meV", NOMINAL),
        "t_c": (_gate.t_c, "ueV", NOMINAL),
        "U": (_gate.U1, "meV", NOMINAL),
    },
    "noise": {
        "A_n": (_noise.A_n, "ueV", NOMINAL),
        "tau_n": (_noise.tau_n, "ns", MODEL),
    },
}


def render_catalog(catalog: dict = CATALOG) -> str:
    out = []
    for section, entries in catalog.items():
        out.append(f"[{section}]")
        for key, (value, unit, source) in entries.items():
            out.append(f"# {unit}; {source}")
            out.append(f"{key} = {value!r}")
        out.append("")
    return "\n".join(out)


def parse_catalog(text: str) -> dict[str, dict[str, float]]:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    return {s: {k: float(v) for k, v in cp[s].items()} for s in cp.sections()}


def catalog_values(catalog: dict = CATALOG) -> dict[str, dict[str, float]]:
    return {s: {k: float(v[0]) for k, v in e.items()} for s, e in catalog.items()}
