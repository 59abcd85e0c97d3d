"""State-vector simulator for a nearest-neighbour quantum-dot array with noisy CZ gates.

Qubit order is little-endian: qubit q is bit q of the amplitude index.
Spin up is |0>.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import polar

from .gate import GateParams, build_h0, cz_gate_time, propagator
from .qtm import NoiseModel, NoiseTrajectory, TrajectoryEnsemble, fidelity, noise_hamiltonian, sample_rtn

LEAKAGE_LIMIT = 0.01
NOISE_MODES = ("per_gate", "persistent")


class TopologyError(ValueError):
    pass


class LeakageError(RuntimeError):
    def __init__(self, leakage: float):
        super().__init__(f"leakage {leakage:.3e} out of the computational subspace exceeds {LEAKAGE_LIMIT}")
        self.leakage = leakage


class CircuitError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"instruction {index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class Edge:
    params: GateParams = GateParams()
    noise: NoiseModel = NoiseModel()


@dataclass(frozen=True)
class QdArrayTopology:
    """rows x cols dot grid; dot d = r*cols + c hosts qubit qubit_of_dot[d]."""

    rows: int = 2
    cols: int = 3
    edges: dict = field(default_factory=dict)  # (dot_a, dot_b) with a < b -> Edge
    qubit_of_dot: tuple | None = None

    def __post_init__(self):
        n = self.rows * self.cols
        if self.qubit_of_dot is None:
            object.__setattr__(self, "qubit_of_dot", tuple(range(n)))
        if sorted(self.qubit_of_dot) != list(range(n)):
            raise TopologyError("qubit_of_dot must be a permutation of the dots")
        if not self.edges:
            object.__setattr__(self, "edges", {e: Edge() for e in grid_edges(self.rows, self.cols)})
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n) or not _adjacent(a, b, self.cols):
                raise TopologyError(f"edge ({a}, {b}) does not join nearest-neighbour dots")

    @property
    def n_qubits(self) -> int:
        return self.rows * self.cols

    def qubit_edge(self, q1: int, q2: int) -> Edge:
        dot = {q: d for d, q in enumerate(self.qubit_of_dot)}
        a, b = sorted((dot[q1], dot[q2]))
        if (a, b) not in self.edges:
            raise TopologyError(f"CZ between non-neighbouring qubits {q1}, {q2}")
        return self.edges[(a, b)]

    def qubit_pairs(self) -> list[tuple[int, int]]:
        return [(self.qubit_of_dot[a], self.qubit_of_dot[b]) for a, b in self.edges]

    def with_edges(self, edge: Edge) -> "QdArrayTopology":
        return replace(self, edges={k: edge for k in self.edges})


def _adjacent(a: int, b: int, cols: int) -> bool:
    ra, ca = divmod(a, cols)
    rb, cb = divmod(b, cols)
    return abs(ra - rb) + abs(ca - cb) == 1


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    """Horizontal edges row by row, then vertical edges."""
    horiz = [(r * cols + c, r * cols + c + 1) for r in range(rows) for c in range(cols - 1)]
    vert = [(r * cols + c, (r + 1) * cols + c) for r in range(rows - 1) for c in range(cols)]
    return horiz + vert


# --- instructions -------------------------------------------------------------


@dataclass(frozen=True)
class Rotation:
    qubit: int
    axis: str
    angle: float


@dataclass(frozen=True)
class CZ:
    control: int
    target: int
    duration: float | None = None  # ns; default is the edge's T_CZ


@dataclass(frozen=True)
class Barrier:
    pass


@dataclass
class Circuit:
    n_qubits: int
    instructions: list = field(default_factory=list)

    def __post_init__(self):
        for ins in self.instructions:
            self._check(ins)

    def _check(self, ins):
        qs = {Rotation: lambda i: (i.qubit,), CZ: lambda i: (i.control, i.target), Barrier: lambda i: ()}
        if type(ins) not in qs:
            raise TypeError(f"unknown instruction {ins!r}")
        for q in qs[type(ins)](ins):
            if not 0 <= q < self.n_qubits:
                raise IndexError(f"qubit {q} out of range for {self.n_qubits} qubits")
        if isinstance(ins, Rotation) and ins.axis not in "XYZ":
            raise ValueError(f"axis must be X, Y or Z, got {ins.axis!r}")
        if isinstance(ins, CZ) and ins.control == ins.target:
            raise ValueError("CZ needs two distinct qubits")

    def append(self, ins) -> None:
        self._check(ins)
        self.instructions.append(ins)

    @property
    def cz_count(self) -> int:
        return sum(isinstance(i, CZ) for i in self.instructions)

    def validate(self, topology: QdArrayTopology) -> None:
        if topology.n_qubits != self.n_qubits:
            raise TopologyError("circuit and topology qubit counts differ")
        for ins in self.instructions:
            if isinstance(ins, CZ):
                topology.qubit_edge(ins.control, ins.target)

    def to_text(self) -> str:
        lines = []
        for ins in self.instructions:
            if isinstance(ins, Rotation):
                lines.append(f"R{ins.axis} {ins.qubit} {ins.angle!r}")
            elif isinstance(ins, CZ):
                extra = "" if ins.duration is None else f" {ins.duration!r}"
                lines.append(f"CZ {ins.control} {ins.target}{extra}")
            else:
                lines.append("BARRIER")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int) -> "Circuit":
        c = cls(n_qubits)
        for num, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            op, *args = line.split()
            try:
                if op in ("RX", "RY", "RZ"):
                    (q, a) = args
                    c.append(Rotation(int(q), op[1], float(a)))
                elif op == "CZ":
                    c.append(CZ(int(args[0]), int(args[1]), float(args[2]) if len(args) > 2 else None))
                elif op == "BARRIER" and not args:
                    c.append(Barrier())
                else:
                    raise ValueError(f"unknown instruction {op!r}")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {num}: {exc}") from exc
        return c


# --- state-vector kernels ---------------------------------------------------------

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * PAULI[axis]


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    return psi


def _n_qubits(state: np.ndarray) -> int:
    n = int(round(np.log2(state.size)))
    if 2**n != state.size:
        raise ValueError("state length is not a power of two")
    return n


def apply_1q(state: np.ndarray, qubit: int, u: np.ndarray) -> np.ndarray:
    n = _n_qubits(state)
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range")
    t = state.reshape((2,) * n)
    ax = n - 1 - qubit
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [ax])), 0, ax)
    return t.reshape(-1)


def apply_single_qubit(state: np.ndarray, qubit: int, axis: str, angle: float) -> np.ndarray:
    return apply_1q(state, qubit, rotation_matrix(axis, angle))


def apply_2q(state: np.ndarray, q1: int, q2: int, u: np.ndarray) -> np.ndarray:
    """Apply a 4x4 matrix on basis |b1 b2> (index 2*b1 + b2) of qubits q1, q2."""
    n = _n_qubits(state)
    if not (0 <= q1 < n and 0 <= q2 < n) or q1 == q2:
        raise IndexError(f"invalid qubit pair ({q1}, {q2})")
    t = state.reshape((2,) * n)
    axes = (n - 1 - q1, n - 1 - q2)
    t = np.tensordot(u.reshape(2, 2, 2, 2), t, axes=([2, 3], list(axes)))
    t = np.moveaxis(t, (0, 1), axes)
    return t.reshape(-1)


def trajectory_propagator(h0: np.ndarray, noise: NoiseTrajectory, duration: float) -> np.ndarray:
    """Time-ordered product of exact propagators over the piecewise-constant noise."""
    u = np.eye(h0.shape[0], dtype=complex)
    bounds = noise.boundaries
    t0 = 0.0
    for j, val in enumerate(noise.values):
        t1 = min(bounds[j + 1], duration)
        if t1 > t0:
            u = propagator(h0 + noise_hamiltonian(val) if val else h0, t1 - t0) @ u
        t0 = t1
        if t0 >= duration:
            break
    return u


@functools.lru_cache(maxsize=256)
def _calibration(params: GateParams, duration: float):
    h0 = build_h0(params)
    u = propagator(h0, duration)
    ph = np.angle(np.diag(u)[:4])
    c = np.array([-ph[0], -ph[1], -ph[2], ph[0] - ph[1] - ph[2]])
    return h0, np.exp(1j * c)


def gate_duration(params: GateParams, override: float | None = None) -> float:
    return cz_gate_time(params).T_CZ if override is None else float(override)


def noisy_cz_matrix(params: GateParams, noise: NoiseTrajectory | None, duration: float) -> np.ndarray:
    """Frame-corrected 4x4 projection of the 6-level evolution (not exactly unitary)."""
    h0, frame = _calibration(params, duration)
    if noise is None or not np.any(noise.values):
        u6 = propagator(h0, duration)
    else:
        u6 = trajectory_propagator(h0, noise, duration)
    return frame[:, None] * u6[:4, :4]


def apply_noisy_cz(state: np.ndarray, q1: int, q2: int, params: GateParams,
                   noise: NoiseTrajectory | None = None, duration: float | None = None) -> np.ndarray:
    """CZ between qubits q1 (first dot) and q2 (second dot) through the 6-level model.

    The projected 4x4 block is replaced by its unitary polar factor, the
    closest unitary, so the gate stays local and norm preserving.  Leakage of
    the raw projection above 1 % raises.
    """
    T = gate_duration(params, duration)
    m = noisy_cz_matrix(params, noise, T)
    lost = apply_2q(state, q1, q2, m)
    leak = 1.0 - float(np.vdot(lost, lost).real) / float(np.vdot(state, state).real)
    if leak > LEAKAGE_LIMIT:
        raise LeakageError(leak)
    return apply_2q(state, q1, q2, polar(m)[0])


# --- circuits -----------------------------------------------------------------


def random_angles(n_stages: int, n_qubits: int, seed: int) -> np.ndarray:
    """Euler (Z, X, Z) angles for the n_stages + 2 rotation layers."""
    rng = np.random.default_rng([int(seed), int(n_stages), 0xA45])
    return rng.uniform(0, 2 * np.pi, size=(n_stages + 2, n_qubits, 3))


def build_vqe_ansatz(topology: QdArrayTopology, n_stages: int, angles=None,
                     entangle: bool = True, seed: int = 0) -> Circuit:
    """Hardware-efficient ansatz.

    Layout: rotation layer, then n_stages x (rotation layer, CZ on every edge),
    then a final rotation layer.  ``angles`` has shape (n_stages + 2, n_qubits, 3)
    holding Euler (Z, X, Z) angles; default is ``random_angles(..., seed)``.
    """
    if n_stages < 1:
        raise ValueError("n_stages must be >= 1")
    n = topology.n_qubits
    a = random_angles(n_stages, n, seed) if angles is None else np.asarray(angles, dtype=float)
    if a.shape != (n_stages + 2, n, 3):
        raise ValueError(f"angles must have shape {(n_stages + 2, n, 3)}, got {a.shape}")
    c = Circuit(n)

    def layer(k):
        for q in range(n):
            for axis, ang in zip("ZXZ", a[k, q]):
                if ang != 0.0:
                    c.append(Rotation(q, axis, float(ang)))

    layer(0)
    for s in range(1, n_stages + 1):
        layer(s)
        if entangle:
            for q1, q2 in topology.qubit_pairs():
                c.append(CZ(q1, q2))
        c.append(Barrier())
    layer(n_stages + 1)
    c.validate(topology)
    return c


def _noise_plan(circuit: Circuit, topology: QdArrayTopology, seed: int, traj: int, mode: str):
    """Noise record for every CZ instruction of one trajectory."""
    plan = {}
    if mode == "per_gate":
        for i, ins in enumerate(circuit.instructions):
            if isinstance(ins, CZ):
                e = topology.qubit_edge(ins.control, ins.target)
                T = gate_duration(e.params, ins.duration)
                plan[i] = sample_rtn(replace(e.noise, seed=seed), T, traj, i) if e.noise.A_n > 0 else None
        return plan
    # persistent: one record per edge spanning all of that edge's gates back to back
    per_edge: dict = {}
    for i, ins in enumerate(circuit.instructions):
        if isinstance(ins, CZ):
            key = tuple(sorted((ins.control, ins.target)))
            e = topology.qubit_edge(*key)
            per_edge.setdefault(key, (e, []))[1].append((i, gate_duration(e.params, ins.duration)))
    for j, (key, (e, gates)) in enumerate(sorted(per_edge.items())):
        total = sum(T for _, T in gates)
        if e.noise.A_n <= 0:
            plan.update({i: None for i, _ in gates})
            continue
        rec = sample_rtn(replace(e.noise, seed=seed), total, traj, 2**32 + j)
        t = 0.0
        for i, T in gates:
            plan[i] = rec.window(t, t + T)
            t += T
    return plan


def run_circuit(circuit: Circuit, topology: QdArrayTopology, state=None, noise_plan=None) -> np.ndarray:
    psi = zero_state(circuit.n_qubits) if state is None else np.asarray(state, dtype=complex)
    for i, ins in enumerate(circuit.instructions):
        try:
            if isinstance(ins, Rotation):
                psi = apply_single_qubit(psi, ins.qubit, ins.axis, ins.angle)
            elif isinstance(ins, CZ):
                e = topology.qubit_edge(ins.control, ins.target)
                nz = None if noise_plan is None else noise_plan.get(i)
                psi = apply_noisy_cz(psi, ins.control, ins.target, e.params, nz, ins.duration)
        except Exception as exc:  # noqa: BLE001 - re-raised with the instruction index
            raise CircuitError(i, exc) from exc
    return psi


def run_noisy(circuit: Circuit, topology: QdArrayTopology, n_traj: int, seed: int,
              noise_mode: str = "per_gate", state=None) -> TrajectoryEnsemble:
    """Monte Carlo ensemble of final states.

    ``per_gate`` draws an independent noise record for every CZ;
    ``persistent`` keeps one record per edge running across the circuit.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
    circuit.validate(topology)
    states = np.empty((n_traj, 2**circuit.n_qubits), dtype=complex)
    for k in range(n_traj):
        plan = _noise_plan(circuit, topology, seed, k, noise_mode)
        states[k] = run_circuit(circuit, topology, state, plan)
    return TrajectoryEnsemble(states, seed)


@dataclass(frozen=True)
class DepthRow:
    N: int
    F: float
    stderr: float
    n_traj: int
    seed: int


def ansatz_fidelity_vs_depth(topology: QdArrayTopology, N_list, n_traj: int, seed: int,
                             angle_seed: int | None = None, noise_mode: str = "per_gate") -> list[DepthRow]:
    """Ansatz preparation fidelity against the noiseless circuit for each depth."""
    if len(N_list) == 0:
        raise ValueError("N_list must be non-empty")
    rows = []
    for N in N_list:
        c = build_vqe_ansatz(topology, int(N), seed=seed if angle_seed is None else angle_seed)
        ideal = run_circuit(c, topology)
        ens = run_noisy(c, topology, n_traj, seed, noise_mode)
        f = fidelity(ideal, ens)
        rows.append(DepthRow(int(N), f.F, f.stderr, n_traj, seed))
    return rows


def depth_csv(rows: list[DepthRow]) -> str:
    lines = ["N,F,stderr,n_traj,seed"] + [f"{r.N},{float(r.F)!r},{float(r.stderr)!r},{r.n_traj},{r.seed}" for r in rows]
    return "\n".join(lines) + "\n"
