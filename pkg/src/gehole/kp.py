"""Strained 4-band Luttinger-Kohn solver for a layered quantum well.

The Hamiltonian is discretized along z with central finite differences.
Spinor order per grid point is (HH+3/2, LH+1/2, LH-1/2, HH-3/2) and the
global index of (grid point i, band b) is ``4*i + b``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .constants import HBAR2_2M0_EV_NM2 as C0
from .materials import HeterostructureProfile

K_PAR_MAX = 2.0  # nm^-1
HH_ROWS = (0, 3)
LH_ROWS = (1, 2)


class EigensolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan"), k_index: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.k_index = k_index


def _kz_gamma_kz(g_half: np.ndarray, dz: float) -> sp.csr_matrix:
    """k_z g(z) k_z with g sampled on the n+1 half points."""
    main = (g_half[:-1] + g_half[1:]) / dz**2
    off = -g_half[1:-1] / dz**2
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _sym_gamma_kz(g_half: np.ndarray, dz: float) -> sp.csr_matrix:
    """(g k_z + k_z g)/2 with k_z = -i d/dz."""
    up = -1j * g_half[1:-1] / (2 * dz)
    return sp.diags([-up, up], [-1, 1], format="csr")


def assemble_lk_hamiltonian(
    profile: HeterostructureProfile,
    k_par: tuple[float, float] = (0.0, 0.0),
    strain: bool = True,
    couplings: bool = True,
) -> sp.csr_matrix:
    """Sparse 4N x 4N Hamiltonian (eV) at in-plane wavevector ``k_par`` (nm^-1).

    ``strain=False`` drops the Bir-Pikus shifts; ``couplings=False`` zeroes
    the S and R blocks, leaving decoupled HH and LH problems.
    """
    kx, ky = float(k_par[0]), float(k_par[1])
    if np.hypot(kx, ky) > K_PAR_MAX:
        raise ValueError(f"|k_par| = {np.hypot(kx, ky):.3f} nm^-1 exceeds {K_PAR_MAX} nm^-1")
    z = profile.z
    n = z.size
    dz = profile.dz
    z_half = np.arange(n + 1) * dz + 0.5 * dz

    def at(attr, pts):
        return profile.sample(attr, pts)

    g1 = at(lambda l: l.material.gamma1, z)
    g2 = at(lambda l: l.material.gamma2, z)
    g3 = at(lambda l: l.material.gamma3, z)
    g1h = at(lambda l: l.material.gamma1, z_half)
    g2h = at(lambda l: l.material.gamma2, z_half)
    g3h = at(lambda l: l.material.gamma3, z_half)
    edge = at(lambda l: l.edge, z)
    if strain:
        hh_eps = at(lambda l: l.strain.hh_shift, z)
        lh_eps = at(lambda l: l.strain.lh_shift, z)
    else:
        hh_eps = lh_eps = np.zeros(n)

    kpar2 = kx * kx + ky * ky
    h_hh = -C0 * (_kz_gamma_kz(g1h - 2 * g2h, dz) + sp.diags(kpar2 * (g1 + g2)))
    h_hh = h_hh + sp.diags(edge + hh_eps)
    h_lh = -C0 * (_kz_gamma_kz(g1h + 2 * g2h, dz) + sp.diags(kpar2 * (g1 - g2)))
    h_lh = h_lh + sp.diags(edge + lh_eps)

    if couplings:
        r = sp.diags(-np.sqrt(3) * C0 * (-g3 * (kx * kx - ky * ky) + 2j * g2 * kx * ky))
        s = -2 * np.sqrt(3) * C0 * (kx - 1j * ky) * _sym_gamma_kz(g3h, dz)
    else:
        r = s = None

    def dag(m):
        return None if m is None else m.conj().T

    blocks = [
        [h_hh, None if s is None else -s, r, None],
        [None if s is None else -dag(s), h_lh, None, r],
        [dag(r), None, h_lh, s],
        [None, dag(r), dag(s), h_hh],
    ]
    h = sp.bmat(blocks, format="csr", dtype=complex)
    # band-major -> site-major ordering: index 4*i + band
    perm = (np.arange(4)[None, :] * n + np.arange(n)[:, None]).ravel()
    return h[perm][:, perm].tocsr()


@dataclass(frozen=True)
class Subbands:
    """Eigenpairs sorted by descending energy.

    ``envelopes`` has shape (n_states, N, 4) and satisfies
    ``sum(|psi|^2) * dz == 1`` for every state.
    """

    energies: np.ndarray
    envelopes: np.ndarray
    dz: float

    @property
    def hh_weight(self) -> np.ndarray:
        w = np.abs(self.envelopes) ** 2 * self.dz
        return w[:, :, list(HH_ROWS)].sum(axis=(1, 2))


def solve_subbands(h, n_states: int, dz: float) -> Subbands:
    """Top ``n_states`` eigenpairs of the valence Hamiltonian.

    A dense subset solver is used on purpose: Krylov methods started from a
    single vector drop one member of each exactly degenerate Kramers pair.
    """
    dim = h.shape[0]
    if not 1 <= n_states <= dim:
        raise ValueError(f"n_states must lie in [1, {dim}]")
    dense = h.toarray() if sp.issparse(h) else np.asarray(h)
    try:
        w, v = scipy.linalg.eigh(dense, subset_by_index=[dim - n_states, dim - 1], driver="evx")
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver failed: {exc}") from exc
    resid = float(np.linalg.norm(h @ v - v * w, axis=0).max())
    if resid > 1e-8 * max(1.0, float(np.abs(w).max())):
        raise EigensolverError(f"eigensolver residual {resid:.2e} too large", residual=resid)
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order] / np.sqrt(dz)
    envelopes = v.T.reshape(n_states, dim // 4, 4)
    return Subbands(w, envelopes, dz)


@dataclass(frozen=True)
class SubbandDispersion:
    """Subband energies along a line in the k_x-k_y plane.

    ``k_signed`` is the signed wavevector along ``direction``;
    ``energies[i]`` is sorted descending; ``labels[i][j]`` is "HH" or "LH".
    """

    k_points: np.ndarray  # (n, 2) nm^-1
    k_signed: np.ndarray
    energies: np.ndarray  # (n, n_states) eV
    labels: list[list[str]]
    hh_weight: np.ndarray
    direction: tuple[float, float]

    def to_csv(self) -> str:
        n_states = self.energies.shape[1]
        header = "k_invnm," + ",".join(f"E_eV_band{j}" for j in range(n_states))
        lines = [header]
        for k, row in zip(self.k_signed, self.energies):
            lines.append(",".join([repr(float(k))] + [repr(float(e)) for e in row]))
        return "\n".join(lines) + "\n"


def _label_row(weights: np.ndarray, previous: list[str] | None, tie: float = 1e-3) -> list[str]:
    labels = []
    for j, w in enumerate(weights):
        if abs(w - 0.5) < tie and previous is not None:
            labels.append(previous[j])
        else:
            labels.append("HH" if w >= 0.5 else "LH")
    return labels


def dispersion_sweep(
    profile: HeterostructureProfile,
    direction: tuple[float, float] = (1.0, 0.0),
    k_max: float = 0.3,
    n_k: int = 16,
    n_states: int = 12,
    mirror: bool = True,
    workers: int | None = None,
) -> SubbandDispersion:
    """Sample ``n_k`` points on [0, k_max] along ``direction``.

    With ``mirror=True`` the negative half-line is solved as well, giving
    ``2*n_k - 1`` points ordered from -k_max to k_max.  ``workers`` > 1
    solves k-points on a thread pool; results do not depend on it.
    """
    if n_k < 8:
        raise ValueError("n_k must be at least 8")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    k_half = np.linspace(0.0, k_max, n_k)
    k_signed = np.concatenate([-k_half[:0:-1], k_half]) if mirror else k_half
    kpts = np.outer(k_signed, d)

    def solve(i):
        try:
            h = assemble_lk_hamiltonian(profile, tuple(kpts[i]))
            return solve_subbands(h, n_states, profile.dz)
        except EigensolverError as exc:
            raise EigensolverError(f"k-point {i}: {exc}", exc.residual, i) from exc

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, range(len(kpts))))
    else:
        results = [solve(i) for i in range(len(kpts))]

    energies = np.array([r.energies for r in results])
    weights = np.array([r.hh_weight for r in results])
    # label outward from k = 0 so ties follow continuity from the zone centre
    zero = int(np.argmin(np.abs(k_signed)))
    labels: list[list[str] | None] = [None] * len(kpts)
    labels[zero] = _label_row(weights[zero], None)
    for i in range(zero + 1, len(kpts)):
        labels[i] = _label_row(weights[i], labels[i - 1])
    for i in range(zero - 1, -1, -1):
        labels[i] = _label_row(weights[i], labels[i + 1])
    return SubbandDispersion(kpts, k_signed, energies, labels, weights, (float(d[0]), float(d[1])))


@dataclass(frozen=True)
class MassFit:
    m_star: float  # in units of m0
    e0: float  # eV
    residual: float  # rms residual, eV
    relative_residual: float
    n_points: int
    band_index: int
    warning: str | None = None


def extract_effective_mass(
    disp: SubbandDispersion, band: str = "HH", fit_window: float = 0.15
) -> MassFit:
    """Fit E(k) = E0 - hbar^2 k^2 / (2 m* m0) near the zone centre.

    ``band`` is either "HH"/"LH" (highest subband carrying that label at
    k = 0) or an integer eigenvalue index.
    """
    zero = int(np.argmin(np.abs(disp.k_signed)))
    if isinstance(band, str):
        hits = [j for j, lab in enumerate(disp.labels[zero]) if lab == band]
        if not hits:
            raise ValueError(f"no {band} subband among the computed states")
        j = hits[0]
    else:
        j = int(band)
    sel = np.abs(disp.k_signed) <= fit_window + 1e-12
    if sel.sum() < 5:
        raise ValueError(f"fit window {fit_window} nm^-1 holds only {sel.sum()} k-points (need 5)")
    k2 = disp.k_signed[sel] ** 2
    e = disp.energies[sel, j]
    slope, e0 = np.polyfit(k2, e, 1)
    fit = e0 + slope * k2
    rms = float(np.sqrt(np.mean((e - fit) ** 2)))
    span = float(np.ptp(e)) or 1.0
    rel = rms / span
    m = -C0 / slope
    msg = None
    if rel > 0.05:
        msg = f"non-parabolic window: relative residual {rel:.3f}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return MassFit(float(m), float(e0), rms, rel, int(sel.sum()), j, msg)


@dataclass(frozen=True)
class AngleMasses:
    theta_deg: np.ndarray
    m_star: np.ndarray

    @property
    def anisotropy(self) -> float:
        return float(np.ptp(self.m_star) / np.mean(self.m_star))

    def to_csv(self) -> str:
        rows = ["theta_deg,mstar_over_m0"]
        rows += [f"{t!r},{m!r}" for t, m in zip(self.theta_deg.tolist(), self.m_star.tolist())]
        return "\n".join(rows) + "\n"


def mass_vs_angle(
    profile: HeterostructureProfile,
    n_angles: int = 7,
    band: str = "HH",
    fit_window: float = 0.15,
    n_k: int = 8,
    n_states: int = 4,
    workers: int | None = None,
) -> AngleMasses:
    """In-plane mass for directions spanning 0..90 degrees from [100]."""
    if n_angles < 4:
        raise ValueError("n_angles must be at least 4")
    thetas = np.linspace(0.0, 90.0, n_angles)
    masses = []
    for th in thetas:
        r = np.deg2rad(th)
        disp = dispersion_sweep(
            profile, (np.cos(r), np.sin(r)), fit_window, n_k, n_states, mirror=False, workers=workers
        )
        masses.append(extract_effective_mass(disp, band, fit_window).m_star)
    return AngleMasses(thetas, np.array(masses))


def hh_lh_splitting(profile: HeterostructureProfile, strain: bool = True, n_states: int = 24) -> float:
    """Zone-centre energy gap between the top HH and top LH subbands (eV)."""
    h = assemble_lk_hamiltonian(profile, (0.0, 0.0), strain=strain)
    sb = solve_subbands(h, n_states, profile.dz)
    w = sb.hh_weight
    hh = sb.energies[np.argmax(w >= 0.5)]
    lh_idx = np.flatnonzero(w < 0.5)
    if lh_idx.size == 0:
        raise ValueError("no LH subband among the computed states; raise n_states")
    return float(hh - sb.energies[lh_idx[0]])
