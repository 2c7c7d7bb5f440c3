"""Recompute the four reference tables and write one CSV per table.

    python3 scripts/reproduce_tables.py --out results/ [--slow] [--only table2 table3]
"""

import argparse
import pathlib

from parsum import experiments
from parsum.records import render, to_csv

RUNNERS = {
    "table1": lambda slow: experiments.table1(slow=slow),
    "table2": lambda slow: experiments.table2(),
    "table3": lambda slow: experiments.table3(),
    "table4": lambda slow: experiments.table4(horizons=(8, 10, 12) if slow else (8,)),
}
EXTRAS = {"table1": ("error", "reference"), "table2": ("target",), "table3": ("i", "T", "target"),
          "table4": ("alpha", "N", "probability_at_c", "target")}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results"))
    ap.add_argument("--slow", action="store_true", help="direct chain at 1e-4 and N = 10, 12")
    ap.add_argument("--only", nargs="+", choices=sorted(RUNNERS), default=sorted(RUNNERS))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.only:
        records = RUNNERS[name](args.slow)
        (args.out / f"{name}.csv").write_text(to_csv(records, EXTRAS[name]), encoding="utf-8")
        print(render(records, 7), end="")


if __name__ == "__main__":
    main()
