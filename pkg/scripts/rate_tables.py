"""Write rate-function tables for the builtin kernels across bandwidth exponents.

Drives the CLI machinery config-first: one ExperimentConfig per (kernel, a)
pair, each producing <out>/<kernel>_a<value>/rate.{csv,json}.  Entries where
the conjugate transform is infinite (below the support floor, or at zero for
kernels positive everywhere) appear as literal "inf" in the CSV.

Example:
    python3 scripts/rate_tables.py --out rate_tables --t-grid 0:4:0.05
"""

import argparse
import os

from recdev.cli import ExperimentConfig, run


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernels", default="gaussian,epanechnikov")
    ap.add_argument("--exponents", default="0.2,0.25,0.4", help="bandwidth exponents a")
    ap.add_argument("--t-grid", default="0:4:0.05", dest="t_grid")
    ap.add_argument("--out", default="rate_tables")
    args = ap.parse_args(argv)

    failures = 0
    for kernel in args.kernels.split(","):
        for a in (float(p) for p in args.exponents.split(",")):
            out_dir = os.path.join(args.out, f"{kernel}_a{a:g}")
            cfg = ExperimentConfig(
                kernel=kernel,
                bandwidth_a=a,
                t_grid=args.t_grid,
                out=out_dir,
            )
            code = run(cfg, "rate")
            if code != 0:
                failures += 1
                print(f"{kernel} a={a:g}: exit code {code}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
