"""Quantum-trajectory Monte Carlo with random-telegraph tunnel-coupling noise."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .constants import HBAR_UEV_NS
from .gate import GateParams, build_h0, cz_gate_time, tc_coupling_pattern


class PropagationError(RuntimeError):
    pass


class FitError(RuntimeError):
    def __init__(self, message, t=None, p_up=None):
        super().__init__(message)
        self.t = t
        self.p_up = p_up


@dataclass(frozen=True)
class NoiseModel:
    A_n: float = 0.24  # ueV, standard deviation of delta t_c
    tau_n: float = 1000.0  # ns
    seed: int = 0

    def __post_init__(self):
        if self.A_n < 0:
            raise ValueError("A_n must be >= 0")
        if self.tau_n <= 0:
            raise ValueError("tau_n must be positive")

    def rng(self, *stream) -> np.random.Generator:
        """Independent generator for a (trajectory, gate, ...) index tuple."""
        return np.random.default_rng([int(self.seed) & (2**64 - 1), *map(int, stream)])


@dataclass(frozen=True)
class NoiseTrajectory:
    switch_times: np.ndarray  # ns, strictly increasing, in (0, duration)
    values: np.ndarray  # ueV, one more entry than switch_times
    duration: float

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], self.switch_times, [self.duration]])

    def value_at(self, t) -> np.ndarray:
        return self.values[np.searchsorted(self.switch_times, t, side="right")]

    def window(self, t0: float, t1: float) -> "NoiseTrajectory":
        """The segment [t0, t1] re-based to start at zero."""
        sel = (self.switch_times > t0) & (self.switch_times < t1)
        first = np.searchsorted(self.switch_times, t0, side="right")
        vals = self.values[first : first + sel.sum() + 1]
        return NoiseTrajectory(self.switch_times[sel] - t0, vals, t1 - t0)


def sample_rtn(model: NoiseModel, duration: float, trajectory_index: int = 0, *stream) -> NoiseTrajectory:
    """Piecewise-constant telegraph-like noise: Poisson switching at rate 1/tau_n,
    with a fresh Normal(0, A_n) level after each switch (stationary start)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = model.rng(trajectory_index, *stream)
    times = []
    t = rng.exponential(model.tau_n)
    while t < duration:
        times.append(t)
        t += rng.exponential(model.tau_n)
    values = model.A_n * rng.standard_normal(len(times) + 1)
    return NoiseTrajectory(np.array(times), values, float(duration))


def noise_hamiltonian(delta_tc: float) -> np.ndarray:
    """6x6 tunnel-noise term (ueV); same pattern as the t_c couplings."""
    return delta_tc * tc_coupling_pattern()


def _eig_propagate(h: np.ndarray, psi: np.ndarray, dt) -> np.ndarray:
    """exp(-i h dt / hbar) psi for scalar or array dt; returns (..., dim)."""
    w, v = np.linalg.eigh(h)
    c = v.conj().T @ psi
    ph = np.exp(-1j * np.multiply.outer(np.atleast_1d(dt), w) / HBAR_UEV_NS)
    return (ph * c) @ v.T


def evolve_trajectory(
    psi0: np.ndarray,
    h0: np.ndarray,
    noise: NoiseTrajectory,
    t_final: float,
    t_out=None,
    h_noise=None,
) -> np.ndarray:
    """Exact piecewise-constant propagation of psi0 under h0 + h_noise(delta).

    ``t_out`` are output times in [0, t_final] (default: just ``t_final``);
    returns an array of states of shape (len(t_out), dim).  ``h_noise`` maps a
    noise value to the perturbation (default: the 6-level tunnel-noise term).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    if t_final > noise.duration * (1 + 1e-12):
        raise ValueError("t_final exceeds the noise record")
    h_noise = noise_hamiltonian if h_noise is None else h_noise
    t_out = np.array([t_final], dtype=float) if t_out is None else np.asarray(t_out, dtype=float)
    if np.any(np.diff(t_out) < 0) or t_out[0] < 0 or t_out[-1] > t_final * (1 + 1e-12):
        raise ValueError("output times must be sorted within [0, t_final]")
    out = np.empty((t_out.size, psi0.size), dtype=complex)
    bounds = noise.boundaries
    psi, t_start = psi0, 0.0
    for j, val in enumerate(noise.values):
        t_end = min(bounds[j + 1], t_final)
        h = h0 + h_noise(val) if val else h0
        last = t_end >= t_final
        sel = (t_out >= t_start) & ((t_out <= t_end) if last else (t_out < t_end))
        if sel.any():
            out[sel] = _eig_propagate(h, psi, t_out[sel] - t_start)
        if t_end >= t_final:
            break
        psi = _eig_propagate(h, psi, t_end - t_start)[0]
        t_start = t_end
    drift = np.max(np.abs(np.linalg.norm(out, axis=1) - 1))
    if drift > 1e-8:
        raise PropagationError(f"norm drift {drift:.2e} exceeds 1e-8")
    return out


@dataclass(frozen=True)
class TrajectoryEnsemble:
    states: np.ndarray  # (n_traj, dim)
    seed: int

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class Fidelity:
    F: float
    stderr: float
    n_traj: int


def fidelity(psi_ideal: np.ndarray, ensemble: TrajectoryEnsemble) -> Fidelity:
    states = np.asarray(ensemble.states)
    if states.shape[0] == 0:
        raise ValueError("empty ensemble")
    if states.shape[1] != np.asarray(psi_ideal).size:
        raise ValueError("dimension mismatch between ideal state and ensemble")
    f = np.abs(states @ np.conj(psi_ideal)) ** 2
    n = f.size
    se = float(np.std(f, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return Fidelity(float(np.mean(f)), se, n)


# --- CZ frame and exchange oscillation ---------------------------------------


def frame_phases(u6: np.ndarray) -> np.ndarray:
    """Separable Z-frame correction phases for the computational diagonal.

    Returns c with c_00 + c_11 = c_01 + c_10 (a product of single-qubit Z
    rotations times a global phase) that zeroes the phases of |00>, |01>,
    |10> and leaves the conditional phase on |11>.
    """
    ph = np.angle(np.diag(u6)[:4])
    c00, c01, c10 = -ph[0], -ph[1], -ph[2]
    return np.array([c00, c01, c10, c01 + c10 - c00])


def ramsey_probability(psi_t: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """p(control up) after frame correction and a closing X(-pi/2) on the control.

    ``psi_t`` holds 6-level states (..., 6) started from
    (|ud> - i|dd>)/sqrt(2); ``frames`` are matching (..., 4) phase vectors.
    """
    a_ud = psi_t[..., 1] * np.exp(1j * frames[..., 1])
    a_dd = psi_t[..., 3] * np.exp(1j * frames[..., 3])
    # RX(-pi/2) = [[1, i], [i, 1]] / sqrt(2) on (up, down) of the control
    up = (a_ud + 1j * a_dd) / np.sqrt(2)
    return np.abs(up) ** 2


def ramsey_initial_state() -> np.ndarray:
    psi = np.zeros(6, dtype=complex)
    psi[1] = 1 / np.sqrt(2)
    psi[3] = -1j / np.sqrt(2)
    return psi


@dataclass(frozen=True)
class OscillationResult:
    t: np.ndarray
    p_up: np.ndarray
    tau: float  # ns; inf when no decay is detected
    gamma: float  # free KWW exponent
    omega: float  # rad/ns
    envelope_fit: np.ndarray
    tau_quasistatic: float  # sqrt(2) hbar / sigma_J
    n_traj: int
    seed: int

    @property
    def decayed(self) -> bool:
        return np.isfinite(self.tau)

    def to_csv(self) -> str:
        lines = ["t_ns,p_up,envelope_fit"]
        lines += [f"{float(t)!r},{float(p)!r},{float(e)!r}" for t, p, e in zip(self.t, self.p_up, self.envelope_fit)]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "tau_ns": self.tau if self.decayed else None,
            "no_decay_detected": not self.decayed,
            "gamma_fit": self.gamma if np.isfinite(self.gamma) else None,
            "omega_rad_per_ns": self.omega,
            "tau_quasistatic_ns": self.tau_quasistatic,
            "n_traj": self.n_traj,
            "seed": self.seed,
        }


def exchange_noise_sigma(p: GateParams, A_n: float) -> float:
    """sigma_J = (dJ/dt_c) A_n at epsilon = 0 (ueV)."""
    from .gate import exchange

    return 2 * exchange(p) / p.t_c * A_n if p.t_c > 0 else 0.0


PROTOCOLS = ("conditional", "ramsey")


def simulate_oscillation(p: GateParams, noise: NoiseModel, t: np.ndarray, n_traj: int,
                         protocol: str = "conditional") -> np.ndarray:
    """Trajectory-averaged p_up(t).

    ``conditional``: the control's return probability under the controlled-phase
    part of the noisy two-qubit evolution, p_up = (1 + |a_ud a_du| cos phi_c) / 2 with
    phi_c = phi_ud + phi_du - phi_uu - phi_dd taken from the propagator of each
    trajectory (local phases, deterministic or noise-induced, are factored out).

    ``ramsey``: a single control coherence with the target held in |down>; the
    frame is the separable Z correction calibrated from the noiseless evolution.
    Only half of each exchange fluctuation enters this signal.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    h0 = build_h0(p)
    acc = np.zeros(t.size)
    if protocol == "conditional":
        e_ud, e_du = np.eye(6, dtype=complex)[1], np.eye(6, dtype=complex)[2]
        # |uu> and |dd> are decoupled from all tunnelling terms; their phases cancel in phi_c
        for k in range(n_traj):
            tr = sample_rtn(noise, float(t[-1]), k)
            a = evolve_trajectory(e_ud, h0, tr, float(t[-1]), t)[:, 1]
            b = evolve_trajectory(e_du, h0, tr, float(t[-1]), t)[:, 2]
            acc += 0.5 * (1 + np.real(a * b))
        return acc / n_traj
    w, v = np.linalg.eigh(h0)
    u_diag = np.einsum("ik,tk,ik->ti", v[:4], np.exp(-1j * np.outer(t, w) / HBAR_UEV_NS), v[:4].conj())
    ph = np.angle(u_diag)
    frames = np.stack([-ph[:, 0], -ph[:, 1], -ph[:, 2], -ph[:, 1] - ph[:, 2] + ph[:, 0]], axis=1)
    psi0 = ramsey_initial_state()
    for k in range(n_traj):
        tr = sample_rtn(noise, float(t[-1]), k)
        psi = evolve_trajectory(psi0, h0, tr, float(t[-1]), t)
        acc += ramsey_probability(psi, frames)
    return acc / n_traj


def _model(t, a, tau, gamma, omega, phi):
    return 0.5 * (1 + a * np.exp(-((t / tau) ** gamma)) * np.cos(omega * t + phi))


def fit_envelope(t: np.ndarray, p_up: np.ndarray, omega0: float, t_max: float):
    """Fit p_up = (1 + a exp(-(t/tau)^g) cos(w t + phi)) / 2.

    Returns (tau, gamma, omega, tau_gaussian, params_gaussian); tau is inf
    when the fitted decay time exceeds 10 t_max.
    """
    upper_tau = 1e6 * t_max
    g_fix = lambda tt, a, tau, om, phi: _model(tt, a, tau, 2.0, om, phi)  # noqa: E731
    x0 = [1.0, t_max / 2, omega0, 0.0]
    lo = [0.0, 1e-3 * t_max, 0.5 * omega0, -np.pi]
    hi = [1.5, upper_tau, 1.5 * omega0, np.pi]
    try:
        pg, _ = optimize.curve_fit(g_fix, t, p_up, p0=x0, bounds=(lo, hi), max_nfev=20000)
        x1 = [pg[0], pg[1], 2.0, pg[2], pg[3]]
        lo1 = [0.0, 1e-3 * t_max, 0.3, 0.5 * omega0, -np.pi]
        hi1 = [1.5, upper_tau, 5.0, 1.5 * omega0, np.pi]
        pk, _ = optimize.curve_fit(_model, t, p_up, p0=x1, bounds=(lo1, hi1), max_nfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"envelope fit did not converge: {exc}", t, p_up) from exc
    tau = pg[1] if pg[1] <= 10 * t_max else np.inf
    gamma = pk[2] if np.isfinite(tau) else np.nan
    return tau, gamma, pg[2], pg


def exchange_oscillation(
    p: GateParams,
    noise: NoiseModel,
    t_max: float = 500.0,
    n_traj: int = 2000,
    n_t: int = 2001,
    protocol: str = "conditional",
) -> OscillationResult:
    """Exchange oscillation averaged over noise trajectories, with envelope fits.

    The control starts in an equal superposition and the target in |down>;
    the pair evolves under the full 6-level model for time t and a closing
    pi/2 rotation maps the accumulated phase onto p_up of the control.  See
    ``simulate_oscillation`` for the two phase conventions.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    t = np.linspace(0.0, t_max, n_t)
    p_up = simulate_oscillation(p, noise, t, n_traj, protocol)
    J = cz_gate_time(p).J
    omega0 = J / HBAR_UEV_NS
    tau, gamma, omega, pg = fit_envelope(t, p_up, omega0, t_max)
    env = np.exp(-((t / tau) ** 2)) if np.isfinite(tau) else np.ones_like(t)
    sj = exchange_noise_sigma(p, noise.A_n) / (2 if protocol == "ramsey" else 1)
    tq = np.sqrt(2) * HBAR_UEV_NS / sj if sj > 0 else np.inf
    return OscillationResult(t, p_up, float(tau), float(gamma), float(omega), env, float(tq), n_traj, noise.seed)


def ensemble_purity(states: np.ndarray) -> float:
    """Tr(rho^2) of the equal-weight mixture of the given pure states."""
    g = np.abs(states.conj() @ states.T) ** 2
    return float(g.sum() / states.shape[0] ** 2)


def noisy_gate_ensemble(p: GateParams, noise: NoiseModel, psi0: np.ndarray, duration: float,
                        n_traj: int) -> TrajectoryEnsemble:
    """Final 6-level states after ``duration`` for ``n_traj`` noise trajectories."""
    h0 = build_h0(p)
    states = np.empty((n_traj, 6), dtype=complex)
    for k in range(n_traj):
        tr = sample_rtn(noise, duration, k)
        states[k] = evolve_trajectory(psi0, h0, tr, duration)[0]
    return TrajectoryEnsemble(states, noise.seed)


def zero_noise(model: NoiseModel) -> NoiseModel:
    return replace(model, A_n=0.0)
