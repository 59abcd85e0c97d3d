"""Multiscale modelling of hole-spin qubits in strained Ge/SiGe quantum-dot arrays.

Submodules: ``kp`` (subband structure), ``dqd`` (double-dot tunnel coupling and
Coulomb energy), ``gate`` (WKB model, two-spin Hamiltonian, CZ timing),
``qtm`` (noisy trajectories), ``circuit`` (array state-vector simulator) and
``cli`` (batch experiments).
"""

__version__ = "0.1.0"
