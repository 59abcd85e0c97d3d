import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gehole import kp
from gehole.constants import HBAR2_2M0_EV_NM2 as C0
from gehole.materials import (
    GE, SI, SIGE, HeterostructureProfile, Layer, Material, StrainState, quantum_well,
)
from oracles import discrete_box_levels, finite_well_ground

GE_WELL = quantum_well()
SI_WELL = quantum_well(SI)


@pytest.fixture(scope="module")
def ge_disp():
    return kp.dispersion_sweep(GE_WELL, (1.0, 0.0), k_max=0.3, n_k=16, n_states=12)


# --- materials and profile ----------------------------------------------------


def test_presets():
    assert (GE.gamma1, GE.gamma2, GE.gamma3, GE.dielectric_constant) == (13.25, 4.20, 5.56, 16.0)
    assert (SI.gamma1, SI.gamma2, SI.gamma3) == (4.26, 0.34, 1.45)
    assert SIGE.dielectric_constant == 15.2
    s = StrainState()
    assert (s.eps_xx, s.eps_yy, s.eps_zz, s.a_v, s.b_v) == (-0.006, -0.006, 0.0042, 2.0, -2.3)


def test_material_invariants():
    with pytest.raises(ValueError):
        Material("bad", 3.0, 2.0, 1.0, 0.0, 10.0)
    with pytest.raises(ValueError):
        Material("bad", -1.0, -2.0, 1.0, 0.0, 10.0)


def test_profile_validation():
    with pytest.raises(ValueError, match="too coarse"):
        quantum_well(dz=0.6)
    with pytest.raises(ValueError, match="non-uniform"):
        HeterostructureProfile((Layer(GE, 20.3),), dz=0.5)
    assert GE_WELL.total_thickness == 80.0
    assert GE_WELL.z.size == 159


# --- Hamiltonian structure ---------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4))
def test_hermitian(kx, ky):
    h = kp.assemble_lk_hamiltonian(quantum_well(barrier_thickness=10.0), (kx, ky))
    assert abs(h - h.conj().T).max() == 0.0


def test_k_limit():
    with pytest.raises(ValueError):
        kp.assemble_lk_hamiltonian(GE_WELL, (1.5, 1.5))


def test_bulk_zone_centre_block_diagonal():
    bulk = HeterostructureProfile((Layer(GE, 10.0, StrainState()),), dz=0.5)
    h = kp.assemble_lk_hamiltonian(bulk, (0.0, 0.0)).toarray()
    band = np.arange(h.shape[0]) % 4
    hh = np.isin(band, kp.HH_ROWS)
    assert np.abs(h[np.ix_(hh, ~hh)]).max() == 0.0
    # and the four spinor components do not mix at all
    for b in range(4):
        other = band != b
        assert np.abs(h[np.ix_(band == b, other)]).max() == 0.0


def test_strain_toggle_shift():
    split = kp.hh_lh_splitting(GE_WELL, strain=True) - kp.hh_lh_splitting(GE_WELL, strain=False)
    assert abs(split - 0.040) <= 0.008
    s = StrainState()
    assert np.isclose(s.hh_shift - s.lh_shift, 0.0391, atol=1e-4)


# --- eigenpairs ---------------------------------------------------------------


def test_solve_norm_order_boundaries():
    h = kp.assemble_lk_hamiltonian(GE_WELL, (0.05, 0.02))
    sb = kp.solve_subbands(h, 8, GE_WELL.dz)
    assert np.all(np.diff(sb.energies) <= 0)
    norms = np.sum(np.abs(sb.envelopes) ** 2, axis=(1, 2)) * sb.dz
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    peak = np.abs(sb.envelopes).max(axis=(1, 2))
    edge = np.abs(sb.envelopes[:, [0, -1], :]).max(axis=(1, 2))
    assert np.all(edge < 1e-6 * peak)


def test_ground_state_heavy_hole():
    h = kp.assemble_lk_hamiltonian(GE_WELL)
    sb = kp.solve_subbands(h, 2, GE_WELL.dz)
    assert np.all(sb.hh_weight > 0.99)


def test_particle_in_box_discrete_and_continuum():
    L, dz = 20.0, 0.1
    box = HeterostructureProfile((Layer(GE, L),), dz=dz)
    h = kp.assemble_lk_hamiltonian(box, strain=False, couplings=False)
    sb = kp.solve_subbands(h, 24, dz)
    hh = np.sort(-sb.energies[sb.hh_weight > 0.5])[::2]  # one per Kramers pair
    alpha = C0 * (GE.gamma1 - 2 * GE.gamma2)
    exact = discrete_box_levels(box.z.size, dz, alpha, hh.size)
    np.testing.assert_allclose(hh, exact, rtol=1e-10)
    cont = alpha * (np.arange(1, 4) * np.pi / L) ** 2
    np.testing.assert_allclose(hh[:3], cont, rtol=0.01)
    np.testing.assert_allclose(hh[1:3] / hh[0], [4.0, 9.0], rtol=0.01)


def test_finite_well_shooting_oracle():
    prof = quantum_well(dz=0.1)
    h = kp.assemble_lk_hamiltonian(prof, strain=False, couplings=False)
    sb = kp.solve_subbands(h, 2, prof.dz)
    m_w = 1 / (GE.gamma1 - 2 * GE.gamma2)
    m_b = 1 / (SIGE.gamma1 - 2 * SIGE.gamma2)
    e_ref = finite_well_ground(20.0, 0.3, m_w, m_b, C0)
    assert abs(-sb.energies[0] - e_ref) / e_ref < 0.005


def test_grid_refinement_ground_energy():
    e = []
    for dz in (0.5, 0.25):
        prof = quantum_well(dz=dz)
        e.append(kp.solve_subbands(kp.assemble_lk_hamiltonian(prof), 2, dz).energies[0])
    assert abs(e[0] - e[1]) < 0.5e-3


# --- dispersion and masses ------------------------------------------------------------


def test_dispersion_symmetry_and_kramers(ge_disp):
    e = ge_disp.energies
    np.testing.assert_allclose(e, e[::-1], atol=1e-10)
    np.testing.assert_allclose(e[:, 0::2], e[:, 1::2], atol=1e-9)
    assert np.all(np.diff(e, axis=1) <= 1e-12)


def test_dispersion_zone_centre_matches_solver(ge_disp):
    zero = int(np.argmin(np.abs(ge_disp.k_signed)))
    sb = kp.solve_subbands(kp.assemble_lk_hamiltonian(GE_WELL), 12, GE_WELL.dz)
    np.testing.assert_allclose(ge_disp.energies[zero], sb.energies, atol=1e-12)


def test_dispersion_threads_identical():
    a = kp.dispersion_sweep(GE_WELL, (1.0, 1.0), 0.2, 8, 4)
    b = kp.dispersion_sweep(GE_WELL, (1.0, 1.0), 0.2, 8, 4, workers=4)
    assert np.array_equal(a.energies, b.energies)


def test_dispersion_needs_points():
    with pytest.raises(ValueError):
        kp.dispersion_sweep(GE_WELL, n_k=5)


def test_csv_header(ge_disp):
    head = ge_disp.to_csv().splitlines()[0]
    assert head == "k_invnm," + ",".join(f"E_eV_band{j}" for j in range(12))


def test_mass_reversal(ge_disp):
    """Highest HH-labelled subband lies above the highest LH one and is lighter."""
    hh = kp.extract_effective_mass(ge_disp, "HH")
    lh = kp.extract_effective_mass(ge_disp, "LH")
    zero = int(np.argmin(np.abs(ge_disp.k_signed)))
    assert ge_disp.energies[zero, hh.band_index] > ge_disp.energies[zero, lh.band_index]
    assert hh.m_star < lh.m_star


def test_decoupled_mass_limit():
    disp = _decoupled_dispersion(GE_WELL)
    m = kp.extract_effective_mass(disp, "HH").m_star
    assert abs(m - 1 / (GE.gamma1 + GE.gamma2)) / m < 0.01


def _decoupled_dispersion(prof):
    k = np.linspace(0, 0.15, 8)
    rows, weights = [], []
    for kk in np.concatenate([-k[:0:-1], k]):
        sb = kp.solve_subbands(kp.assemble_lk_hamiltonian(prof, (kk, 0.0), couplings=False), 4, prof.dz)
        rows.append(sb.energies)
        weights.append(sb.hh_weight)
    ks = np.concatenate([-k[:0:-1], k])
    labels = [["HH" if w >= 0.5 else "LH" for w in ws] for ws in weights]
    return kp.SubbandDispersion(np.c_[ks, 0 * ks], ks, np.array(rows), labels, np.array(weights), (1.0, 0.0))


def test_ge_mass():
    m = kp.extract_effective_mass(kp.dispersion_sweep(GE_WELL, n_k=16), "HH").m_star
    assert abs(m - 0.058) / 0.058 <= 0.10, f"Ge HH in-plane mass {m:.4f}"


def test_si_mass():
    m = kp.extract_effective_mass(kp.dispersion_sweep(SI_WELL, n_k=16), "HH").m_star
    assert abs(m - 0.24) / 0.24 <= 0.10, f"Si HH in-plane mass {m:.4f}"


def test_non_parabolic_warning():
    ks = np.linspace(-0.3, 0.3, 31)
    e = -np.abs(ks)[:, None] * np.ones((1, 2))  # a cone, far from parabolic
    disp = kp.SubbandDispersion(
        np.c_[ks, 0 * ks], ks, e, [["HH", "HH"]] * ks.size, np.ones_like(e), (1.0, 0.0)
    )
    with pytest.warns(RuntimeWarning, match="non-parabolic"):
        fit = kp.extract_effective_mass(disp, "HH", fit_window=0.3)
    assert fit.warning is not None
    ge = kp.extract_effective_mass(kp.dispersion_sweep(GE_WELL, n_k=16), "HH")
    assert ge.warning is None


def test_fit_window_too_small(ge_disp):
    with pytest.raises(ValueError):
        kp.extract_effective_mass(ge_disp, "HH", fit_window=0.03)


@pytest.fixture(scope="module")
def ge_angles():
    return kp.mass_vs_angle(GE_WELL, n_angles=7)


def test_angle_anisotropy_and_symmetry(ge_angles):
    assert ge_angles.anisotropy <= 0.15
    np.testing.assert_allclose(ge_angles.m_star, ge_angles.m_star[::-1], rtol=1e-6)


def test_angle_zero_matches_direct(ge_angles):
    disp = kp.dispersion_sweep(GE_WELL, (1.0, 0.0), 0.15, 8, 4, mirror=False)
    assert ge_angles.m_star[0] == pytest.approx(kp.extract_effective_mass(disp, "HH").m_star, rel=1e-12)
    assert ge_angles.to_csv().startswith("theta_deg,mstar_over_m0\n")


def test_mass_thickness_invariance():
    masses = [
        kp.extract_effective_mass(kp.dispersion_sweep(quantum_well(well_thickness=w), n_k=16), "HH").m_star
        for w in (5.0, 10.0, 15.0, 20.0)
    ]
    spread = (max(masses) - min(masses)) / min(masses)
    assert spread < 0.10, f"HH mass over 5-20 nm wells: {np.round(masses, 4)}"


def test_sparse_output():
    assert sp.issparse(kp.assemble_lk_hamiltonian(GE_WELL))
