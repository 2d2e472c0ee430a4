"""Bubble sizes along the convergents of the golden mean; prints y_r and the fitted decay."""
import argparse
import time

from crotnum import atlas


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.3)
    ap.add_argument("--rmax", type=int, default=5)
    args = ap.parse_args()
    t0 = time.perf_counter()
    rep = atlas.scaling(atlas.ScalingConfig(epsilon=args.epsilon, r_max=args.rmax))
    print(f"t0 = {rep.t0:.15f}")
    print(" r   p/q        s_r            y_r = s_r q^2     error")
    for row in rep.rows:
        print(f"{row.r:2d}  {row.p}/{row.q:<6d} {row.size:.6e}   {row.y:.6e}      {row.error:.1e}")
    print(f"Lambda = {rep.lam:.4f}  xi = {rep.xi:.3f}  decreasing = {rep.decreasing}  "
          f"truncated_at = {rep.truncated_at}  ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
