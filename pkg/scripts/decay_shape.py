"""-ln F of a bare CZ stack against depth for per-gate and persistent noise.

Frozen (persistent) fluctuators add coherently across gates, so -ln F grows
faster than linearly at small depth; fresh noise per gate gives linear growth.

    python scripts/decay_shape.py [--n-traj 400]
"""

import argparse

import numpy as np

from gehole import circuit as C, qtm


def stack(topo, N):
    a = C.random_angles(N, 6, 0)
    a[1 : N + 1] = 0.0  # outer rotation layers only
    return C.build_vqe_ansatz(topo, N, angles=a)


def main(n_traj):
    topo = C.QdArrayTopology()
    print("mode,N,-lnF,stderr")
    for mode in C.NOISE_MODES:
        for N in (1, 2, 4):
            c = stack(topo, N)
            ens = C.run_noisy(c, topo, n_traj, 0, noise_mode=mode)
            f = qtm.fidelity(C.run_circuit(c, topo), ens)
            print(f"{mode},{N},{-np.log(f.F):.5f},{f.stderr / f.F:.5f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-traj", type=int, default=400)
    main(ap.parse_args().n_traj)
