"""tau of the renormalized map against both Moebius branches for a few locked maps."""
import math
from fractions import Fraction

import numpy as np

from crotnum.circle import FourierLift, standard_map
from crotnum.renorm import verify_mobius


def resonant(pq, delta=0.1):
    """x + p/q + delta/(2 pi q) sin(2 pi q x): locked at p/q with q-fold symmetry."""
    q = pq.denominator
    b = np.zeros(q)
    b[q - 1] = delta / (2 * math.pi * q)
    return FourierLift(float(pq), np.zeros(q), b)


def main():
    cases = [
        (standard_map(0.6, 0.5), Fraction(1, 2), 0, {}),
        (resonant(Fraction(2, 5)), Fraction(2, 5), 1, {"h_chart": 0.15}),
        (resonant(Fraction(2, 5)), Fraction(2, 5), 0, {"h_chart": 0.15}),
    ]
    for F, pq, m, kw in cases:
        rep = verify_mobius(F, pq, m, **kw)
        print(f"{pq} m={m}: matched {rep.matched:11s} predicted {rep.predicted:11s} "
              f"rel_error {rep.rel_error:.2e} separation {rep.separation:.1f}")


if __name__ == "__main__":
    main()
