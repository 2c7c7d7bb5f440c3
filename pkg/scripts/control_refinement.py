"""Grid-refinement study of the control limit: solve c(alpha, N) at several steps."""

import argparse
import time

from parsum import control


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--alpha", type=float, default=0.10)
    ap.add_argument("--steps", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    args = ap.parse_args()
    print("step,c,probability_at_c,evaluations,seconds")
    for h in args.steps:
        t0 = time.perf_counter()
        res = control.solve_control_limit(control.ControlProblem(args.N, args.alpha, step=h))
        print(f"{h:g},{res.c:.5f},{res.probability:.6f},{res.evaluations},{time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
