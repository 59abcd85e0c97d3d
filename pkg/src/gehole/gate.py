"""WKB tunnel-coupling model, two-spin gate Hamiltonian, exchange, CZ timing and variability.

Units: t_c and J in ueV, U/E_z/dE_z in meV, epsilon in ueV, lengths nm,
voltages V, times ns.  Matrices are built in ueV.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .constants import HBAR2_2M0_MEV_NM2, HBAR_UEV_NS, MU_B_MEV_PER_T


class ChargeTransitionError(ValueError):
    pass


@dataclass(frozen=True)
class WkbModel:
    """t_c = t0 exp(-sqrt(2 m* E_b) L_S / hbar), E_b = E_b0 - beta q V_BG."""

    t0: float  # meV
    m_star: float
    E_b0: float = 40.0  # meV
    beta: float = 0.5
    name: str = ""

    def barrier(self, V_BG) -> np.ndarray | float:
        return self.E_b0 - self.beta * np.asarray(V_BG) * 1e3

    def kappa(self, V_BG) -> np.ndarray | float:
        """Decay constant (1/nm); raises if the barrier has collapsed."""
        e_b = self.barrier(V_BG)
        if np.any(e_b <= 0):
            raise ValueError("barrier collapsed (E_b <= 0)")
        return np.sqrt(self.m_star * e_b / HBAR2_2M0_MEV_NM2)


GE_WKB = WkbModel(t0=12.0, m_star=0.058, name="Ge")
SI_WKB = WkbModel(t0=2.0, m_star=0.24, name="Si")
WKB_PRESETS = {"Ge": GE_WKB, "Si": SI_WKB}


def wkb_tc(model: WkbModel, L_S, V_BG) -> np.ndarray | float:
    """Tunnel coupling in ueV."""
    t = model.t0 * 1e3 * np.exp(-model.kappa(V_BG) * np.asarray(L_S))
    return float(t) if np.ndim(t) == 0 else t


@dataclass(frozen=True)
class WkbFit:
    model: WkbModel
    max_log_residual: float
    max_rel_deviation: float
    r2: dict  # V_BG (V) -> R^2 of ln t_c vs L_S within the reporting window
    n_points: int


def fit_wkb(template: WkbModel, rows, window=(1.0, 100.0)) -> WkbFit:
    """Least-squares fit of (t0, E_b0, beta) to ln t_c over a (L_S, V_BG) sweep.

    ``rows`` are objects with ``L_S``, ``V_BG`` (V) and ``t_c`` (ueV, or None
    for failed cells).  The in-plane mass is taken from ``template``.
    """
    pts = [(r.L_S, r.V_BG, r.t_c) for r in rows if r.t_c is not None and r.t_c > 0]
    Ls = sorted({p[0] for p in pts})
    Vs = sorted({p[1] for p in pts})
    if len(Ls) < 3 or len(Vs) < 2:
        raise ValueError("sweep must cover at least 3 spacings and 2 voltages")
    table = {(L, V): t for L, V, t in pts}
    for V in Vs:
        series = [table[(L, V)] for L in Ls if (L, V) in table]
        if np.any(np.diff(series) >= 0):
            raise ValueError(f"non-monotonic sweep: t_c does not decrease with L_S at V_BG={V}")
    for L in Ls:
        series = [table[(L, V)] for V in Vs if (L, V) in table]
        if np.any(np.diff(series) <= 0):
            raise ValueError(f"non-monotonic sweep: t_c does not increase with V_BG at L_S={L}")

    L = np.array([p[0] for p in pts])
    V = np.array([p[1] for p in pts])
    y = np.log(np.array([p[2] for p in pts]) * 1e-3)  # ln(t_c / meV)

    # initial guess: per-voltage slopes give kappa(V), hence E_b(V), linear in V
    kap, icpt = [], []
    for v in Vs:
        sel = V == v
        if sel.sum() >= 2:
            s, c = np.polyfit(L[sel], y[sel], 1)
            kap.append(-s)
            icpt.append(c)
    e_b = np.array(kap) ** 2 * HBAR2_2M0_MEV_NM2 / template.m_star
    vv = np.array([v for v in Vs if (V == v).sum() >= 2]) * 1e3
    slope, e0 = np.polyfit(vv, e_b, 1) if len(vv) > 1 else (-template.beta, e_b[0])
    x0 = np.array([np.mean(icpt), e0, max(-slope, 1e-3)])

    def resid(p):
        lt0, eb0, beta = p
        eb = np.clip(eb0 - beta * V * 1e3, 1e-9, None)
        return lt0 - np.sqrt(template.m_star * eb / HBAR2_2M0_MEV_NM2) * L - y

    sol = optimize.least_squares(resid, x0, method="lm", xtol=1e-14, ftol=1e-14)
    lt0, eb0, beta = sol.x
    model = replace(template, t0=float(np.exp(lt0)), E_b0=float(eb0), beta=float(beta))
    r = resid(sol.x)
    r2 = {}
    tc = np.exp(y) * 1e3
    for v in Vs:
        sel = (V == v) & (tc >= window[0]) & (tc <= window[1])
        if sel.sum() >= 3:
            s, c = np.polyfit(L[sel], y[sel], 1)
            res = y[sel] - (s * L[sel] + c)
            r2[float(v)] = float(1 - np.sum(res**2) / np.sum((y[sel] - y[sel].mean()) ** 2))
    return WkbFit(
        model,
        float(np.max(np.abs(r))),
        float(np.max(np.abs(np.expm1(r)))),
        r2,
        len(pts),
    )


@dataclass(frozen=True)
class GateParams:
    """Two-dot gate parameters; E_z/dE_z are used unless g-factors and fields are all given."""

    t_c: float = 28.4  # ueV
    U1: float = 11.0  # meV
    U2: float = 11.0  # meV
    epsilon: float = 0.0  # ueV
    E_z: float = 1.0  # meV
    dE_z: float = 0.1  # meV
    g1: float | None = None
    g2: float | None = None
    B1: float | None = None
    B2: float | None = None

    def __post_init__(self):
        if self.t_c < 0:
            raise ValueError("t_c must be >= 0")
        if self.U1 <= 0 or self.U2 <= 0:
            raise ValueError("U1, U2 must be positive")

    @property
    def zeeman(self) -> tuple[float, float]:
        """(E_z, dE_z) in meV."""
        if None not in (self.g1, self.g2, self.B1, self.B2):
            a, b = self.g1 * self.B1, self.g2 * self.B2
            return MU_B_MEV_PER_T * (a + b), MU_B_MEV_PER_T * (a - b)
        return self.E_z, self.dE_z

    @property
    def hierarchy_ok(self) -> bool:
        return self.t_c * 1e-3 < min(self.U1, self.U2) / 20

    def scaled(self, factor: float) -> "GateParams":
        """All energies multiplied by ``factor``."""
        ez, dez = self.zeeman
        return replace(
            self,
            t_c=self.t_c * factor,
            U1=self.U1 * factor,
            U2=self.U2 * factor,
            epsilon=self.epsilon * factor,
            E_z=ez * factor,
            dE_z=dez * factor,
            g1=None, g2=None, B1=None, B2=None,
        )


def exchange(p: GateParams) -> float:
    """J in ueV."""
    u1, u2 = p.U1 * 1e3, p.U2 * 1e3
    d1, d2 = u1 - p.epsilon, u2 + p.epsilon
    if d1 <= 0 or d2 <= 0:
        raise ChargeTransitionError("charge-transition crossing: (U1 - eps)(U2 + eps) must be positive")
    return 2 * p.t_c**2 * (u1 + u2) / (d1 * d2)


BASIS6 = ("uu", "ud", "du", "dd", "S20", "S02")


def tc_coupling_pattern() -> np.ndarray:
    """dH0/dt_c: the tunnel-coupling sign pattern on the 6-level basis."""
    m = np.zeros((6, 6))
    m[1, 4] = m[1, 5] = 1.0
    m[2, 4] = m[2, 5] = -1.0
    return m + m.T


def build_h0(p: GateParams) -> np.ndarray:
    """6x6 Hamiltonian (ueV) on {uu, ud, du, dd, S20, S02}."""
    ez, dez = (1e3 * v for v in p.zeeman)
    diag = [ez / 2, dez / 2, -dez / 2, -ez / 2, p.U1 * 1e3 - p.epsilon, p.U2 * 1e3 + p.epsilon]
    return np.diag(diag) + p.t_c * tc_coupling_pattern()


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray  # 4x4, ueV
    J: float
    warning: str | None = None


def effective_h(p: GateParams) -> EffectiveHamiltonian:
    ez, dez = (1e3 * v for v in p.zeeman)
    J = exchange(p)
    h = np.diag([ez / 2, dez / 2 - J / 2, -dez / 2 - J / 2, -ez / 2])
    h[1, 2] = h[2, 1] = J / 2
    msg = None
    if not p.hierarchy_ok:
        msg = f"t_c = {p.t_c} ueV is not << U (t_c < U/20 required for the effective model)"
        warnings.warn(msg, stacklevel=2)
    return EffectiveHamiltonian(h, J, msg)


def computational_eigenvalues(h0: np.ndarray) -> np.ndarray:
    """Eigenvalues of the four states with largest spin-subspace weight, ascending."""
    w, v = np.linalg.eigh(h0)
    weight = np.sum(np.abs(v[:4]) ** 2, axis=0)
    return np.sort(w[np.argsort(weight)[-4:]])


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t / hbar) for Hermitian h in ueV and t in ns."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t / HBAR_UEV_NS)) @ v.conj().T


def diagonal_phases(u6: np.ndarray) -> np.ndarray:
    """Phases of the computational diagonal elements of a 6x6 propagator."""
    return np.angle(np.diag(u6)[:4])


def conditional_phase(u6: np.ndarray) -> float:
    """phi_ud + phi_du - phi_uu - phi_dd wrapped to [0, 2 pi)."""
    ph = diagonal_phases(u6)
    return float(np.mod(ph[1] + ph[2] - ph[0] - ph[3], 2 * np.pi))


@dataclass(frozen=True)
class CzTiming:
    T_CZ: float  # ns
    J: float  # ueV
    phase_exact: float  # conditional phase from 6x6 evolution at T_CZ (rad)

    @property
    def phase_error(self) -> float:
        return abs(self.phase_exact - np.pi) / np.pi


def cz_gate_time(p: GateParams) -> CzTiming:
    J = exchange(p)
    if J <= 0:
        raise ValueError("CZ gate needs J > 0")
    T = np.pi * HBAR_UEV_NS / J
    return CzTiming(float(T), J, conditional_phase(propagator(build_h0(p), T)))


def gate_time_vs_spacing(model: WkbModel, p: GateParams, L_S, V_BG: float) -> np.ndarray:
    """T_CZ (ns) for each spacing at fixed barrier voltage."""
    tc = np.atleast_1d(wkb_tc(model, L_S, V_BG))
    out = []
    for t in tc:
        J = exchange(replace(p, t_c=float(t)))
        out.append(np.pi * HBAR_UEV_NS / J)
    return np.array(out)


def crossover_spacing(model: WkbModel, p: GateParams, V_BG: float, T_target: float = 10.0) -> float:
    """L_S at which T_CZ = T_target (ns), at epsilon = 0."""
    # T = pi hbar U / (4 t_c^2) for U1 = U2, eps = 0 generalizes via J ∝ t_c^2
    J_target = np.pi * HBAR_UEV_NS / T_target
    t_target = np.sqrt(J_target / exchange(replace(p, t_c=1.0)))
    return float(np.log(model.t0 * 1e3 / t_target) / model.kappa(V_BG))


@dataclass(frozen=True)
class ExchangeSlope:
    inverse_slope: float  # mV per decade of J, averaged over the range
    V_BG: np.ndarray  # V
    J: np.ndarray  # ueV


def exchange_vs_vbg(model: WkbModel, p: GateParams, L_S: float, V_BG) -> np.ndarray:
    tc = np.atleast_1d(wkb_tc(model, L_S, V_BG))
    return np.array([exchange(replace(p, t_c=float(t))) for t in tc])


def exchange_slope(model: WkbModel, p: GateParams, L_S: float, V_range=(0.0, 0.040), n: int = 41) -> ExchangeSlope:
    V = np.linspace(V_range[0], V_range[1], n)
    J = exchange_vs_vbg(model, p, L_S, V)
    inv = (V[-1] - V[0]) * 1e3 / (np.log10(J[-1]) - np.log10(J[0]))
    return ExchangeSlope(float(inv), V, J)


def dlnJ_dV_numeric(model: WkbModel, p: GateParams, L_S: float, V_BG: float, h: float = 1e-4) -> float:
    """Central-difference d ln J / dV_BG (1/V)."""
    jp, jm = exchange_vs_vbg(model, p, L_S, [V_BG + h, V_BG - h])
    return float((np.log(jp) - np.log(jm)) / (2 * h))


def dlnJ_dV_analytic(model: WkbModel, L_S: float, V_BG: float) -> float:
    """2 * L_S * beta * kappa / (2 E_b), per volt."""
    e_b = model.barrier(V_BG)
    return float(2 * L_S * model.beta * 1e3 * model.kappa(V_BG) / (2 * e_b))


@dataclass(frozen=True)
class VariabilitySpec:
    sigma_LS: float = 0.5
    n_samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.sigma_LS < 0:
            raise ValueError("sigma_LS must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class VariabilityResult:
    L_S: np.ndarray
    T_CZ: np.ndarray
    ln_tc_std: float
    ln_T_std: float
    T_norm_std: float  # std of T_CZ / median(T_CZ)
    analytic_ln_tc: float  # kappa * sigma_LS
    n_rejected: int
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    extra: dict = field(default_factory=dict)

    def histogram_csv(self) -> str:
        centers = 0.5 * (self.hist_edges[1:] + self.hist_edges[:-1])
        lines = ["T_norm,count"] + [f"{float(c)!r},{int(n)}" for c, n in zip(centers, self.hist_counts)]
        return "\n".join(lines) + "\n"


def variability_mc(
    model: WkbModel,
    p: GateParams,
    L_S0: float,
    spec: VariabilitySpec,
    V_BG: float = 0.040,
    bins: int = 40,
) -> VariabilityResult:
    """Gaussian spacing variation propagated through t_c -> J -> T_CZ."""
    kappa = float(model.kappa(V_BG))
    rng = np.random.default_rng(spec.seed)
    L = L_S0 + spec.sigma_LS * rng.standard_normal(spec.n_samples)
    ok = L > 0
    L = L[ok]
    tc = model.t0 * 1e3 * np.exp(-kappa * L)
    J1 = exchange(replace(p, t_c=1.0))
    T = np.pi * HBAR_UEV_NS / (J1 * tc**2)
    tn = T / np.median(T)
    lo, hi = (tn.min(), tn.max()) if np.ptp(tn) > 0 else (tn[0] - 0.5, tn[0] + 0.5)
    counts, edges = np.histogram(tn, bins=bins, range=(lo, hi))
    return VariabilityResult(
        L,
        T,
        float(np.std(np.log(tc), ddof=1)) if L.size > 1 else 0.0,
        float(np.std(np.log(T), ddof=1)) if L.size > 1 else 0.0,
        float(np.std(tn, ddof=1)) if L.size > 1 else 0.0,
        kappa * spec.sigma_LS,
        int((~ok).sum()),
        edges,
        counts,
    )
