"""Wall time of the direct and FFT chains for ten Exp(1) factors across grid steps."""

import argparse

from parsum import experiments
from parsum.records import to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=float, nargs="+", default=[0.01, 0.005, 0.002, 0.001])
    args = ap.parse_args()
    records = experiments.bench(args.steps)
    print(to_csv(records, ("nodes", "fft_not_slower")), end="")


if __name__ == "__main__":
    main()
