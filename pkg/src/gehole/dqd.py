"""Double-dot eigenproblem along the inter-dot axis, tunnel coupling, and on-site Coulomb energy.

The in-plane problem is reduced to one dimension (mode space: vertical mode
x transverse plunger mode x the transport axis).  Energies are meV, lengths nm.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal
from scipy.special import erf

from .constants import COULOMB_EV_NM, HBAR2_2M0_MEV_NM2

MIN_BARRIER_MEV = 2.0


class BarrierCollapsed(ValueError):
    pass


class BoundStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class DQDConfig:
    """Double-dot geometry and electrostatic parameterization.

    Each dot well spans ``dot_width`` outward from the edge of the barrier
    gate, which covers ``barrier_length`` (default ``L_S - 4``) centred
    between the dots.  ``dot_width`` exceeds the 20 nm plunger footprint to
    account for fringing of the gate potential at the well depth.
    """

    L_S: float = 35.0
    plunger_size: float = 20.0
    barrier_length: float | None = None
    dot_width: float = 26.0
    m_star: float = 0.058
    V_BG: float = 0.040  # V, magnitude
    well_depth: float = 60.0
    E_b0: float = 40.0
    beta: float = 0.5
    eps_r: float = 16.0
    smoothing: float = 2.0
    dx: float = 0.1
    margin: float = 30.0

    def __post_init__(self):
        if self.L_S <= self.plunger_size:
            raise ValueError("dot spacing must exceed the plunger edge length")
        if self.m_star <= 0:
            raise ValueError("m_star must be positive")
        if self.V_BG < 0:
            raise ValueError("V_BG is a magnitude and must be >= 0")
        if self.barrier_length is not None and not 0 < self.barrier_length < self.L_S:
            raise ValueError("barrier_length must lie in (0, L_S)")

    @property
    def barrier_width(self) -> float:
        return self.L_S - 4.0 if self.barrier_length is None else self.barrier_length

    @property
    def barrier_height(self) -> float:
        """Barrier top above the well bottoms (meV)."""
        return self.E_b0 - self.beta * self.V_BG * 1e3


@dataclass(frozen=True)
class PotentialProfile:
    x: np.ndarray  # nm
    V: np.ndarray  # meV

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def to_csv(self, pair: "BoundStatePair | None" = None) -> str:
        lines = ["x_nm,V_meV,psiB,psiAB"]
        for i, (x, v) in enumerate(zip(self.x, self.V)):
            b = ab = ""
            if pair is not None:
                b, ab = repr(float(pair.psi_B[i])), repr(float(pair.psi_AB[i]))
            lines.append(f"{float(x)!r},{float(v)!r},{b},{ab}")
        return "\n".join(lines) + "\n"


def _box(x: np.ndarray, lo: float, hi: float, s: float) -> np.ndarray:
    return 0.5 * (erf((x - lo) / s) - erf((x - hi) / s))


def build_dqd_potential(cfg: DQDConfig, detuning: float = 0.0) -> PotentialProfile:
    """Smoothed double-well profile; ``detuning`` (meV) lowers the left well by ε/2
    and raises the right one by ε/2."""
    e_b = cfg.barrier_height
    if e_b <= MIN_BARRIER_MEV:
        raise BarrierCollapsed(f"barrier collapsed, dots not confined (E_b = {e_b:.2f} meV)")
    a = 0.5 * cfg.barrier_width
    w = cfg.dot_width
    half = a + w + cfg.margin
    n = int(np.ceil(half / cfg.dx))
    x = np.arange(-n, n + 1) * cfg.dx
    s = cfg.smoothing
    inner = _box(x, -a, a, s)
    left = _box(x, -a - w, -a, s)
    right = _box(x, a, a + w, s)
    V = cfg.well_depth * (1.0 - inner - left - right) + e_b * inner
    if detuning:
        V = V - 0.5 * detuning * left + 0.5 * detuning * right
    else:
        V = 0.5 * (V + V[::-1])
    return PotentialProfile(x, V)


def _node_count(psi: np.ndarray, rel: float = 1e-6) -> int:
    keep = psi[np.abs(psi) > rel * np.abs(psi).max()]
    return int(np.count_nonzero(np.diff(np.sign(keep))))


def solve_1d(profile: PotentialProfile, m_star: float, n_states: int = 2):
    """Lowest eigenpairs of -(hbar^2 / 2 m) d^2/dx^2 + V with hard walls.

    Returns energies (meV) and envelopes normalized to sum |psi|^2 dx = 1.
    """
    dx = profile.dx
    t = HBAR2_2M0_MEV_NM2 / m_star / dx**2
    n = profile.x.size
    w, v = eigh_tridiagonal(
        2 * t + profile.V, -t * np.ones(n - 1), select="i", select_range=(0, n_states - 1)
    )
    v = v / np.sqrt(dx)
    for j in range(v.shape[1]):
        # sign convention: positive lobe on the left
        lead = v[np.argmax(np.abs(v[:, j]) > 1e-3 * np.abs(v[:, j]).max()), j]
        if lead < 0:
            v[:, j] = -v[:, j]
    return w, v.T


@dataclass(frozen=True)
class BoundStatePair:
    E_B: float
    E_AB: float
    psi_B: np.ndarray
    psi_AB: np.ndarray
    x: np.ndarray


def solve_bound_states(
    profile: PotentialProfile, m_star: float, symmetric: bool | None = None
) -> BoundStatePair:
    """Binding and anti-binding states of a double well.

    ``symmetric`` enables the parity checks; by default it is inferred from
    the mirror symmetry of the profile.
    """
    w, v = solve_1d(profile, m_star, 2)
    ceiling = min(profile.V[0], profile.V[-1])
    if w[1] >= ceiling:
        raise BoundStateError(
            f"fewer than 2 bound states below the confinement ceiling {ceiling:.2f} meV"
        )
    if symmetric is None:
        symmetric = bool(np.array_equal(profile.V, profile.V[::-1]))
    if symmetric and abs(w[1] - w[0]) < 1e-9:
        # unresolved splitting: any rotation of the pair is an eigenbasis, so
        # pick the parity-adapted one (even first)
        m = v @ v[:, ::-1].T * profile.dx
        _, rot = np.linalg.eigh(0.5 * (m + m.T))
        v = (rot[:, ::-1].T @ v)
        v *= np.sign(v[:, np.argmax(np.abs(v[0]))])[:, None]
    psi_b, psi_ab = v
    nb, nab = _node_count(psi_b), _node_count(psi_ab)
    if symmetric:
        odd_b = np.abs(psi_b - psi_b[::-1]).max() / np.abs(psi_b).max()
        even_ab = np.abs(psi_ab + psi_ab[::-1]).max() / np.abs(psi_ab).max()
        if odd_b > 1e-6 or even_ab > 1e-6:
            raise BoundStateError(
                "binding/anti-binding pair has the wrong parity for a symmetric profile"
            )
    if nb != 0 or nab != 1:
        if symmetric or abs(w[1] - w[0]) < 1e-9:
            raise BoundStateError(f"unexpected node counts {nb}, {nab}")
    return BoundStatePair(float(w[0]), float(w[1]), psi_b, psi_ab, profile.x)


def tunnel_coupling(pair: BoundStatePair) -> float:
    """Half the binding/anti-binding splitting, in ueV."""
    return abs(pair.E_AB - pair.E_B) / 2 * 1e3


def dqd_tunnel_coupling(cfg: DQDConfig) -> float:
    """t_c (ueV) for a configuration at zero detuning."""
    return tunnel_coupling(solve_bound_states(build_dqd_potential(cfg), cfg.m_star))


@dataclass(frozen=True)
class SweepRow:
    L_S: float
    V_BG: float  # V
    t_c: float | None  # ueV
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.t_c is not None


def tc_sweep(cfg: DQDConfig, L_S_list, V_BG_list) -> list[SweepRow]:
    """Cartesian sweep over spacing and barrier voltage; failures are recorded, not raised."""
    if len(L_S_list) == 0 or len(V_BG_list) == 0:
        raise ValueError("sweep lists must be non-empty")
    rows = []
    for V, L in itertools.product(V_BG_list, L_S_list):
        try:
            c = replace(cfg, L_S=float(L), V_BG=float(V))
            rows.append(SweepRow(float(L), float(V), dqd_tunnel_coupling(c)))
        except (BarrierCollapsed, BoundStateError, ValueError) as exc:
            rows.append(SweepRow(float(L), float(V), None, str(exc)))
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = ["L_s_nm,V_bg_mV,t_c_ueV"]
    for r in rows:
        tc = "" if r.t_c is None else repr(r.t_c)
        lines.append(f"{float(r.L_S)!r},{float(r.V_BG) * 1e3!r},{tc}")
    return "\n".join(lines) + "\n"


# --- on-site Coulomb energy -------------------------------------------------


@functools.lru_cache(maxsize=64)
def box_self_term(a: float, b: float, c: float) -> float:
    """Mean of 1/|r1 - r2| over pairs of points in an a x b x c box (nm^-1).

    The z integral is done in closed form; the remaining 2-D integral has a
    weak log singularity at the origin and is handled by adaptive quadrature.
    """

    def fz(v, u):
        rho = np.hypot(u, v)
        if rho == 0.0:
            return 0.0
        inner = np.arcsinh(c / rho) - (np.hypot(rho, c) - rho) / c
        return (1 - u / a) * (1 - v / b) * inner

    val, _ = integrate.dblquad(fz, 0.0, a, 0.0, b, epsabs=1e-12, epsrel=1e-10)
    return 8.0 * val / (a * b * c)


def coulomb_energy(density: np.ndarray, spacing, eps_r: float) -> float:
    """Direct Coulomb self-energy (meV) of a normalized density on a uniform grid.

    The pair sum is evaluated as a zero-padded FFT convolution with the 1/r
    kernel; the zero-distance cell uses the exact uniform-box pair average.
    """
    rho = np.asarray(density, dtype=float)
    if rho.ndim != 3:
        raise ValueError("density must be a 3-D array")
    h = np.broadcast_to(np.asarray(spacing, dtype=float), (3,))
    dv = float(np.prod(h))
    total = rho.sum() * dv
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"density is not normalized (integral = {total:.8f})")
    shape = tuple(2 * n for n in rho.shape)
    axes = [np.minimum(np.arange(m), m - np.arange(m)) * hi for m, hi in zip(shape, h)]
    r = np.sqrt(axes[0][:, None, None] ** 2 + axes[1][None, :, None] ** 2 + axes[2][None, None, :] ** 2)
    with np.errstate(divide="ignore"):
        kernel = 1.0 / r
    kernel[0, 0, 0] = box_self_term(*(round(float(v), 12) for v in h))
    ax = (0, 1, 2)
    pot = np.fft.irfftn(np.fft.rfftn(rho, shape, ax) * np.fft.rfftn(kernel, axes=ax), shape, ax)
    pot = pot[: rho.shape[0], : rho.shape[1], : rho.shape[2]]
    pair = float(np.sum(rho * pot)) * dv * dv
    return COULOMB_EV_NM * 1e3 / eps_r * pair


def _moments(x: np.ndarray, p: np.ndarray):
    w = p / np.trapezoid(p, x)
    mu = np.trapezoid(x * w, x)
    sigma = np.sqrt(np.trapezoid((x - mu) ** 2 * w, x))
    return mu, sigma


def factorized_density(profiles, n: int = 32, extent: float = 3.0):
    """Product density from three 1-D probability densities.

    ``profiles`` is a sequence of (coordinate, density) pairs.  Each axis is
    resampled on ``n`` points spanning mean +/- ``extent`` RMS widths and the
    product is renormalized on the grid.  Returns (rho, spacing, axes).
    """
    axes, parts, spacing = [], [], []
    for x, p in profiles:
        mu, sigma = _moments(np.asarray(x), np.asarray(p))
        g = np.linspace(mu - extent * sigma, mu + extent * sigma, n)
        axes.append(g)
        parts.append(np.interp(g, x, p, left=0.0, right=0.0))
        spacing.append(g[1] - g[0])
    rho = parts[0][:, None, None] * parts[1][None, :, None] * parts[2][None, None, :]
    rho /= rho.sum() * np.prod(spacing)
    return rho, tuple(spacing), axes


def single_dot_potential(cfg: DQDConfig) -> PotentialProfile:
    """One isolated square-plunger well of edge ``plunger_size`` (lateral envelope)."""
    w = cfg.plunger_size
    half = 0.5 * w + cfg.margin
    n = int(np.ceil(half / cfg.dx))
    x = np.arange(-n, n + 1) * cfg.dx
    V = cfg.well_depth * (1.0 - _box(x, -0.5 * w, 0.5 * w, cfg.smoothing))
    return PotentialProfile(x, 0.5 * (V + V[::-1]))


def dot_coulomb_energy(cfg: DQDConfig, vertical_z: np.ndarray, vertical_density: np.ndarray,
                       n: int = 32) -> float:
    """U (meV) for one hole in a square dot with the given vertical density."""
    prof = single_dot_potential(cfg)
    _, v = solve_1d(prof, cfg.m_star, 1)
    lateral = (prof.x, v[0] ** 2)
    rho, h, _ = factorized_density([lateral, lateral, (vertical_z, vertical_density)], n)
    return coulomb_energy(rho, h, cfg.eps_r)
