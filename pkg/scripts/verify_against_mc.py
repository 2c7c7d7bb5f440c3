"""Engine values next to Monte Carlo estimates with z-scores for the machine, batch and control tables."""

import argparse

from parsum import experiments, oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=oracle.DEFAULT_SEED)
    ap.add_argument("--only", nargs="+", choices=["table2", "table3", "table4"],
                    default=["table2", "table3", "table4"])
    args = ap.parse_args()
    cfg = oracle.McConfig(args.samples, args.seed)
    runs = {"table2": experiments.verify_table2, "table3": experiments.verify_table3,
            "table4": experiments.verify_table4}
    print(f"{'quantity':<28} {'engine':>12} {'monte carlo':>12} {'se':>10} {'z':>7}")
    for name in args.only:
        for c in runs[name](cfg):
            print(f"{c.quantity:<28} {c.engine:12.7f} {c.mc:12.7f} {c.se:10.2e} {c.z:+7.2f}")


if __name__ == "__main__":
    main()
