"""In-plane HH mass of Ge and Si wells against well thickness.

Prints the fitted mass next to the decoupled-band value 1/(gamma1 + gamma2),
which the full four-band result approaches only when HH-LH mixing is weak.

    python scripts/mass_vs_thickness.py [--thickness 10 15 20 25 30]
"""

import argparse

from gehole import kp
from gehole.materials import GE, SI, quantum_well


def main(thicknesses):
    print("material,well_nm,m_star,decoupled")
    for mat in (GE, SI):
        dec = 1.0 / (mat.gamma1 + mat.gamma2)
        for w in thicknesses:
            disp = kp.dispersion_sweep(quantum_well(mat, w), n_k=16)
            m = kp.extract_effective_mass(disp, "HH").m_star
            print(f"{mat.name},{w:g},{m:.4f},{dec:.4f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--thickness", type=float, nargs="+", default=[10, 15, 20, 25, 30])
    main(ap.parse_args().thickness)
