"""Growth exponent of the windowed disk-pair comb at its singular points.

Prints the fitted exponent at tau = 1, sqrt 2, 2, sqrt 5 and at two midgap
points for a sequence of cutoffs, with the window scales tied to T.  The
singular-point exponents settle near (d+1)/2 = 1.5.
"""
import argparse
import math

import numpy as np

from orthospec.bodies import Ball
from orthospec.orthospectrum import length_spectrum
from orthospec.spectral import dirac_comb, singularity_scan

TAUS = [1.0, math.sqrt(2), 2.0, math.sqrt(5), 1.2, 1.7]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=float, nargs="+", default=[80 * math.pi, 200 * math.pi, 400 * math.pi])
    args = p.parse_args()
    K1, K2 = Ball((0.0, 0.0), 0.3), Ball((0.1, 0.2), 0.2)
    print("T/pi   " + "  ".join(f"{t:7.4f}" for t in TAUS))
    for T in args.T:
        rep = singularity_scan(dirac_comb(length_spectrum(K1, K2, T)), TAUS,
                               np.geomspace(T / 10, T / 5, 5))
        print(f"{T / math.pi:6.0f} " + "  ".join(f"{e:7.3f}" for e in rep.exponents))


if __name__ == "__main__":
    main()
