"""tau_F(i 2^-k) through a suitable curve and its Richardson limits against the band engine."""
import math
from fractions import Fraction

import numpy as np

from crotnum.circle import FourierLift, standard_map
from crotnum.hyperbolic import build_suitable, crot_bands
from crotnum.torus import crot_omega, richardson


def main():
    b = np.zeros(5)
    b[4] = 0.1 / (2 * math.pi * 5)
    cases = [
        (standard_map(0.6, 0.0), Fraction(0)),
        (standard_map(0.6, 0.5), Fraction(1, 2)),
        (FourierLift(0.4, np.zeros(5), b), Fraction(2, 5)),
    ]
    for F, pq in cases:
        ref = crot_bands(F, pq)[0]
        curve = build_suitable(F, pq, 0.02)
        hs, vs = [], []
        print(f"{pq}: reference {ref:.15f}")
        for k in range(4, 11):
            eps = 2.0**-k
            try:
                v = crot_omega(F, 1j * eps, curve=curve).tau
            except Exception as exc:  # orbit leaves the strip for large eps
                print(f"  k={k:2d}  {type(exc).__name__}")
                continue
            hs.append(eps)
            vs.append(v)
            print(f"  k={k:2d}  |tau - ref| = {abs(v - ref):.3e}")
        for order in range(1, min(4, len(hs))):
            print(f"  order {order}: {abs(richardson(hs, vs, order) - ref):.3e}")


if __name__ == "__main__":
    main()
