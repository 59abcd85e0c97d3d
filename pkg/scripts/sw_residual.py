"""Exact six-level levels against the second-order effective Hamiltonian.

For a range of t_c at fixed U, prints the largest eigenvalue mismatch in the
computational subspace next to t_c^3/U^2 and to the Zeeman cross term
t_c^2 dE_z/U^2 (all in ueV).

    python scripts/sw_residual.py [--U 11] [--dEz 0.1]
"""

import argparse

import numpy as np

from gehole import gate


def main(U, dEz):
    print("t_c_ueV,residual_ueV,5tc3_U2,tc2_dEz_U2")
    u = U * 1e3
    for tc in np.geomspace(10.0, 0.02 * u, 8):
        p = gate.GateParams(t_c=tc, U1=U, U2=U, dE_z=dEz)
        exact = gate.computational_eigenvalues(gate.build_h0(p))
        eff = np.sort(np.linalg.eigvalsh(gate.effective_h(p).matrix))
        res = np.abs(exact - eff).max()
        print(f"{tc:.2f},{res:.3e},{5 * tc**3 / u**2:.3e},{tc**2 * dEz * 1e3 / u**2:.3e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--U", type=float, default=11.0, help="on-site charging energy (meV)")
    ap.add_argument("--dEz", type=float, default=0.1, help="Zeeman difference (meV)")
    a = ap.parse_args()
    main(a.U, a.dEz)
