"""Material parameters, strain, and layer-stack definitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Material:
    """Bulk valence-band parameters of one layer material.

    The Luttinger parameters may be ``None`` for dielectrics that only
    enter electrostatics (e.g. the gate oxide).
    """

    name: str
    gamma1: float | None
    gamma2: float | None
    gamma3: float | None
    valence_band_edge: float  # eV, relative to unstrained Ge
    dielectric_constant: float

    def __post_init__(self):
        if self.gamma1 is None:
            return
        if self.gamma1 <= 0:
            raise ValueError(f"{self.name}: gamma1 must be positive")
        if self.gamma1 <= 2 * self.gamma2:
            raise ValueError(f"{self.name}: gamma1 > 2*gamma2 required (positive HH z-mass)")

    @property
    def has_kp(self) -> bool:
        return self.gamma1 is not None


@dataclass(frozen=True)
class StrainState:
    """Biaxial strain and valence deformation potentials (eV)."""

    eps_xx: float = -0.006
    eps_yy: float = -0.006
    eps_zz: float = 0.0042
    a_v: float = 2.0
    b_v: float = -2.3

    @property
    def hh_shift(self) -> float:
        """Diagonal correction added to the heavy-hole rows (eV)."""
        return -self.a_v * (self.eps_xx + self.eps_yy + self.eps_zz)

    @property
    def lh_shift(self) -> float:
        """Diagonal correction added to the light-hole rows (eV)."""
        return -0.5 * self.b_v * (self.eps_xx + self.eps_yy - 2 * self.eps_zz)


UNSTRAINED = StrainState(eps_xx=0.0, eps_yy=0.0, eps_zz=0.0)

GE = Material("Ge", 13.25, 4.20, 5.56, 0.0, 16.0)
SI = Material("Si", 4.26, 0.34, 1.45, 0.0, 11.7)
# Luttinger parameters linearly interpolated between Si and Ge.
SIGE = Material(
    "Si0.2Ge0.8",
    0.8 * 13.25 + 0.2 * 4.26,
    0.8 * 4.20 + 0.2 * 0.34,
    0.8 * 5.56 + 0.2 * 1.45,
    -0.3,
    15.2,
)
AL2O3 = Material("Al2O3", None, None, None, 0.0, 9.8)

MATERIALS = {m.name: m for m in (GE, SI, SIGE, AL2O3)}


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # nm
    strain: StrainState = UNSTRAINED
    band_edge: float | None = None  # eV; overrides material.valence_band_edge

    @property
    def edge(self) -> float:
        return self.material.valence_band_edge if self.band_edge is None else self.band_edge


@dataclass(frozen=True)
class HeterostructureProfile:
    """Layer stack sampled on a uniform vertical grid with hard walls at both ends.

    The grid holds interior points ``z_i = i*dz`` for ``i = 1 .. n-1`` where
    ``n = total_thickness / dz``; the envelope vanishes at ``z = 0`` and at
    ``z = total_thickness``.
    """

    layers: tuple[Layer, ...]
    dz: float = 0.5

    def __post_init__(self):
        if not self.layers:
            raise ValueError("profile needs at least one layer")
        for layer in self.layers:
            if not layer.material.has_kp:
                raise ValueError(f"layer material {layer.material.name} has no k.p parameters")
            if layer.thickness <= 0:
                raise ValueError("layer thickness must be positive")
        if self.dz <= 0:
            raise ValueError("grid spacing must be positive")
        if self.dz > 0.5:
            raise ValueError(f"grid spacing {self.dz} nm is too coarse (limit 0.5 nm)")
        n = self.total_thickness / self.dz
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise ValueError(
                f"non-uniform grid: total thickness {self.total_thickness} nm is not a "
                f"multiple of dz = {self.dz} nm"
            )

    @property
    def total_thickness(self) -> float:
        return float(sum(layer.thickness for layer in self.layers))

    @property
    def interfaces(self) -> np.ndarray:
        return np.cumsum([0.0] + [layer.thickness for layer in self.layers])

    @property
    def z(self) -> np.ndarray:
        n = int(round(self.total_thickness / self.dz))
        return np.arange(1, n) * self.dz

    def sample(self, attr, z: np.ndarray) -> np.ndarray:
        """Evaluate a per-layer quantity at positions ``z``.

        ``attr`` is a callable ``Layer -> float``.  Points that sit exactly on
        an interface get the mean of the two adjacent layers.
        """
        bounds = self.interfaces
        values = np.array([attr(layer) for layer in self.layers])
        idx = np.clip(np.searchsorted(bounds, z, side="right") - 1, 0, len(values) - 1)
        out = values[idx].astype(float)
        tol = 1e-9 * self.dz
        for j in range(1, len(bounds) - 1):
            on = np.abs(z - bounds[j]) < tol
            out[on] = 0.5 * (values[j - 1] + values[j])
        return out

    def with_strain(self, enabled: bool) -> "HeterostructureProfile":
        """Copy of the profile with every layer's strain kept or removed."""
        layers = tuple(
            Layer(l.material, l.thickness, l.strain if enabled else UNSTRAINED, l.band_edge)
            for l in self.layers
        )
        return HeterostructureProfile(layers, self.dz)


def quantum_well(
    well: Material = GE,
    well_thickness: float = 20.0,
    barrier: Material = SIGE,
    barrier_thickness: float = 30.0,
    strain: StrainState = StrainState(),
    band_offset: float = 0.3,
    dz: float = 0.5,
) -> HeterostructureProfile:
    """Barrier / well / barrier stack with the well strained and the barriers relaxed.

    ``band_offset`` is the valence-band discontinuity (eV); the well edge sits
    at 0 and the barriers at ``-band_offset``.
    """
    return HeterostructureProfile(
        (
            Layer(barrier, barrier_thickness, UNSTRAINED, -band_offset),
            Layer(well, well_thickness, strain, 0.0),
            Layer(barrier, barrier_thickness, UNSTRAINED, -band_offset),
        ),
        dz,
    )
