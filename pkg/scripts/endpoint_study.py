"""Endpoint extrapolation of bubble samples: deviation from p/q against solver error and spread."""
import argparse

from crotnum import atlas


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.6)
    ap.add_argument("--qmax", type=int, default=5)
    ap.add_argument("--samples", type=int, default=9)
    args = ap.parse_args()
    rep = atlas.scan(atlas.ScanConfig(epsilon=args.epsilon, q_max=args.qmax, samples_per_bubble=args.samples))
    print("p/q     deviation   spread      solver_err  within_10x")
    for rec in rep.records:
        chk = atlas.endpoint_extrapolation(rec)
        if chk is None:
            continue
        print(f"{str(chk.pq):6s}  {chk.deviation:.2e}    {chk.spread:.2e}    {chk.solver_error:.2e}    "
              f"{chk.within_solver_error}")


if __name__ == "__main__":
    main()
