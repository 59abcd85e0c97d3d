from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gehole import dqd, gate
from gehole.constants import HBAR_UEV_NS, MU_B_MEV_PER_T
from oracles import second_order_sw

P = gate.GateParams()


# --- WKB model -----------------------------------------------------------------------


def test_wkb_example_point():
    m = gate.GE_WKB
    assert m.barrier(0.040) == pytest.approx(20.0)
    assert m.kappa(0.040) == pytest.approx(0.1745, abs=5e-4)
    assert gate.wkb_tc(m, 40.0, 0.040) == pytest.approx(12e3 * np.exp(-40 * m.kappa(0.040)))
    assert 10.0 < gate.wkb_tc(m, 40.0, 0.040) < 12.0
    assert gate.wkb_tc(m, 0.0, 0.040) == pytest.approx(12e3)


def test_wkb_mass_ratio():
    r = gate.SI_WKB.kappa(0.040) / gate.GE_WKB.kappa(0.040)
    assert r == pytest.approx(np.sqrt(0.24 / 0.058), rel=1e-12)
    assert r == pytest.approx(2.03, abs=0.01)


def test_wkb_collapse():
    with pytest.raises(ValueError, match="collapsed"):
        gate.wkb_tc(gate.GE_WKB, 30.0, 0.081)


def test_wkb_log_linear():
    L = np.linspace(10, 60, 11)
    s = np.polyfit(L, np.log(gate.wkb_tc(gate.GE_WKB, L, 0.020)), 1)[0]
    assert -s == pytest.approx(gate.GE_WKB.kappa(0.020), rel=1e-10)


def _synthetic_rows(model, Ls, Vs):
    return [dqd.SweepRow(L, V, gate.wkb_tc(model, L, V)) for V in Vs for L in Ls]


def test_fit_recovers_synthetic():
    true = gate.WkbModel(t0=7.0, m_star=0.058, E_b0=35.0, beta=0.42)
    fit = gate.fit_wkb(gate.GE_WKB, _synthetic_rows(true, [25, 30, 35, 40, 45, 50], [0, 0.02, 0.04]))
    assert fit.model.t0 == pytest.approx(7.0, rel=0.01)
    assert fit.model.E_b0 == pytest.approx(35.0, rel=0.01)
    assert fit.model.beta == pytest.approx(0.42, rel=0.01)
    assert fit.max_log_residual < 1e-8


def test_fit_rejects_non_monotonic():
    rows = _synthetic_rows(gate.GE_WKB, [25, 30, 35], [0, 0.02])
    rows[1] = dqd.SweepRow(30, 0.0, rows[0].t_c * 2)
    with pytest.raises(ValueError, match="non-monotonic"):
        gate.fit_wkb(gate.GE_WKB, rows)
    with pytest.raises(ValueError):
        gate.fit_wkb(gate.GE_WKB, _synthetic_rows(gate.GE_WKB, [25, 30], [0, 0.02]))


@pytest.fixture(scope="module")
def dqd_fit():
    rows = dqd.tc_sweep(dqd.DQDConfig(), [25, 30, 35, 40, 45, 50], [0.0, 0.020, 0.040])
    return gate.fit_wkb(gate.GE_WKB, rows)


def test_fit_dqd_sweep(dqd_fit):
    assert abs(dqd_fit.model.beta - 0.5) <= 0.15
    assert abs(dqd_fit.model.E_b0 - 40.0) <= 10.0
    assert dqd_fit.max_log_residual < 0.3
    assert all(r2 > 0.99 for r2 in dqd_fit.r2.values())


# --- exchange and Hamiltonian -----------------------------------------------------------


def test_exchange_operating_point():
    assert gate.exchange(P) == pytest.approx(0.293, abs=1e-3)
    assert gate.exchange(P) == pytest.approx(4 * 28.4**2 / 11e3, rel=1e-14)
    assert gate.exchange(replace(P, t_c=0.0)) == 0.0


def test_exchange_charge_transition():
    with pytest.raises(gate.ChargeTransitionError, match="charge-transition crossing"):
        gate.exchange(replace(P, epsilon=11e3))
    with pytest.raises(gate.ChargeTransitionError):
        gate.exchange(replace(P, epsilon=-12e3))


def test_build_h0_structure():
    h = gate.build_h0(P)
    assert np.array_equal(h, h.T)
    assert np.trace(h) == pytest.approx(22e3)
    np.testing.assert_allclose(np.diag(h), [500, 50, -50, -500, 11e3, 11e3])
    assert h[1, 4] == h[1, 5] == P.t_c and h[2, 4] == h[2, 5] == -P.t_c
    h0 = gate.build_h0(replace(P, t_c=0.0))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(h0)), np.sort(np.diag(h0)), atol=1e-12)


def test_middle_levels_shift_by_half_j():
    e = gate.computational_eigenvalues(gate.build_h0(P))
    e0 = gate.computational_eigenvalues(gate.build_h0(replace(P, t_c=0.0)))
    shift = e[1:3] - e0[1:3]
    np.testing.assert_allclose(shift, -gate.exchange(P) / 2, rtol=0.02)


def test_effective_h_blocks():
    eff = gate.effective_h(replace(P, t_c=0.0))
    np.testing.assert_allclose(eff.matrix, np.diag([500, 50, -50, -500]))
    eff = gate.effective_h(P)
    J, d = eff.J, 100.0
    inner = np.linalg.eigvalsh(eff.matrix[1:3, 1:3])
    np.testing.assert_allclose(inner, -J / 2 + np.array([-1, 1]) * 0.5 * np.hypot(d, J), rtol=1e-12)
    assert eff.warning is None


def test_effective_h_hierarchy_warning():
    with pytest.warns(UserWarning, match="not << U"):
        eff = gate.effective_h(replace(P, t_c=800.0))
    assert eff.warning


def test_sw_operating_point():
    exact = gate.computational_eigenvalues(gate.build_h0(P))
    eff = np.sort(np.linalg.eigvalsh(gate.effective_h(P).matrix))
    assert np.abs(exact - eff).max() < 0.01


@settings(max_examples=100, deadline=None)
@given(U=st.floats(2.0, 20.0), dU=st.floats(-0.3, 0.3), ratio=st.floats(1e-3, 0.02))
def test_sw_consistency(U, dU, ratio):
    """Nominal Zeeman energies, random t_c and U within the hierarchy."""
    p = gate.GateParams(t_c=ratio * U * 1e3, U1=U, U2=U * (1 + dU))
    exact = gate.computational_eigenvalues(gate.build_h0(p))
    eff = np.sort(np.linalg.eigvalsh(gate.effective_h(p).matrix))
    u = min(p.U1, p.U2) * 1e3
    assert np.abs(exact - eff).max() < 5 * p.t_c**3 / u**2


@settings(max_examples=100, deadline=None)
@given(
    U=st.floats(2.0, 20.0),
    dU=st.floats(-0.3, 0.3),
    ratio=st.floats(1e-3, 0.02),
    ez=st.floats(0.3, 2.0),
    dez=st.floats(0.0, 0.3),
)
def test_exact_vs_full_second_order(U, dU, ratio, ez, dez):
    """The closed-form exchange drops the spin splitting from the virtual-state
    denominators.  Keeping it, the second-order block reproduces the exact
    computational levels to within 5 t_c^3 / U^2."""
    p = gate.GateParams(t_c=ratio * U * 1e3, U1=U, U2=U * (1 + dU), E_z=ez, dE_z=dez)
    h = gate.build_h0(p)
    exact = gate.computational_eigenvalues(h)
    sw = np.linalg.eigvalsh(second_order_sw(h))
    u = min(p.U1, p.U2) * 1e3
    assert np.abs(exact - sw).max() < 5 * p.t_c**3 / u**2
    # and the dropped term is the t_c^2 dE_z / U^2 gap seen by the closed form
    eff = np.sort(np.linalg.eigvalsh(gate.effective_h(p).matrix))
    assert np.abs(sw - eff).max() <= 2 * p.t_c**2 * dez * 1e3 / u**2 + 5 * p.t_c**3 / u**2


def test_zeeman_from_fields():
    p = replace(P, g1=2.0, g2=1.5, B1=1.0, B2=1.0)
    ez, dez = p.zeeman
    assert ez == pytest.approx(MU_B_MEV_PER_T * 3.5)
    assert dez == pytest.approx(MU_B_MEV_PER_T * 0.5)
    assert replace(P, g1=2.0).zeeman == (1.0, 0.1)


def test_energy_scaling_homogeneity():
    f = 3.7
    q = P.scaled(f)
    np.testing.assert_allclose(np.linalg.eigvalsh(gate.build_h0(q)), f * np.linalg.eigvalsh(gate.build_h0(P)), rtol=1e-12)
    assert 1 / gate.cz_gate_time(q).T_CZ == pytest.approx(f / gate.cz_gate_time(P).T_CZ, rel=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        gate.GateParams(t_c=-1.0)
    with pytest.raises(ValueError):
        gate.GateParams(U1=0.0)


# --- CZ timing --------------------------------------------------------------------------------


def test_cz_operating_point():
    cz = gate.cz_gate_time(P)
    assert cz.T_CZ == pytest.approx(7.05, rel=0.02)
    assert cz.T_CZ == pytest.approx(np.pi * HBAR_UEV_NS / cz.J)
    assert cz.phase_error < 0.01


def test_cz_requires_exchange():
    with pytest.raises(ValueError):
        gate.cz_gate_time(replace(P, t_c=0.0))


def test_propagator_unitary():
    u = gate.propagator(gate.build_h0(P), 7.0)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(6), atol=1e-12)


def test_crossovers():
    ge = gate.crossover_spacing(gate.GE_WKB, P, 0.040)
    si = gate.crossover_spacing(gate.SI_WKB, P, 0.040)
    assert abs(ge - 37.0) <= 3.0
    assert abs(si - 13.0) <= 2.0
    T = gate.gate_time_vs_spacing(gate.GE_WKB, P, [ge - 1, ge, ge + 1], 0.040)
    assert T[0] < 10.0 < T[2]
    assert T[1] == pytest.approx(10.0, rel=1e-10)


# --- exchange slope ---------------------------------------------------------------------------


def test_inverse_slope_ge():
    s = gate.exchange_slope(gate.GE_WKB, P, 30.0)
    assert abs(s.inverse_slope - 20.0) / 20.0 <= 0.30


def test_slope_steepens_with_spacing():
    inv = [gate.exchange_slope(gate.GE_WKB, P, L).inverse_slope for L in (20, 25, 30, 35, 40, 45)]
    assert np.all(np.diff(inv) < 0)


@pytest.mark.parametrize("L,V", [(30.0, 0.0), (30.0, 0.02), (40.0, 0.035), (15.0, 0.01)])
def test_slope_matches_closed_form(L, V):
    num = gate.dlnJ_dV_numeric(gate.GE_WKB, P, L, V)
    ana = gate.dlnJ_dV_analytic(gate.GE_WKB, L, V)
    assert num == pytest.approx(ana, rel=0.05)
    # the closed form is exact for the model, so the agreement is much tighter
    assert num == pytest.approx(ana, rel=1e-5)


# --- variability ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def var_ge():
    return gate.variability_mc(gate.GE_WKB, P, 35.0, gate.VariabilitySpec())


@pytest.fixture(scope="module")
def var_si():
    return gate.variability_mc(gate.SI_WKB, P, 13.0, gate.VariabilitySpec())


def test_variability_ge_si(var_ge, var_si):
    assert var_ge.analytic_ln_tc == pytest.approx(0.087, abs=1e-3)
    assert var_si.analytic_ln_tc == pytest.approx(0.177, abs=1e-3)
    assert abs(var_ge.ln_tc_std - 0.087) / 0.087 <= 0.10
    assert abs(var_si.ln_tc_std - 0.173) / 0.173 <= 0.10
    ratio = var_si.ln_tc_std / var_ge.ln_tc_std
    assert ratio == pytest.approx(np.sqrt(0.24 / 0.058), rel=0.05)


def test_ln_gate_time_spread_is_double(var_ge, var_si):
    for v in (var_ge, var_si):
        assert v.ln_T_std == pytest.approx(2 * v.analytic_ln_tc, rel=0.05)


def test_variability_deterministic(var_ge):
    again = gate.variability_mc(gate.GE_WKB, P, 35.0, gate.VariabilitySpec())
    assert np.array_equal(again.hist_counts, var_ge.hist_counts)
    assert np.array_equal(again.hist_edges, var_ge.hist_edges)
    assert again.histogram_csv() == var_ge.histogram_csv()
    other = gate.variability_mc(gate.GE_WKB, P, 35.0, gate.VariabilitySpec(seed=1))
    assert not np.array_equal(other.T_CZ, var_ge.T_CZ)


def test_variability_zero_sigma():
    v = gate.variability_mc(gate.GE_WKB, P, 35.0, gate.VariabilitySpec(sigma_LS=0.0, n_samples=100))
    assert v.T_norm_std == 0.0 and v.ln_tc_std == 0.0
    assert v.hist_counts.sum() == 100


def test_variability_rejects_unphysical_spacings():
    v = gate.variability_mc(gate.GE_WKB, P, 0.5, gate.VariabilitySpec(sigma_LS=1.0, n_samples=2000))
    assert v.n_rejected > 0
    assert v.L_S.size + v.n_rejected == 2000
    assert np.all(v.L_S > 0)


def test_histogram_csv(var_ge):
    lines = var_ge.histogram_csv().splitlines()
    assert lines[0] == "T_norm,count"
    assert sum(int(l.split(",")[1]) for l in lines[1:]) == var_ge.T_CZ.size
