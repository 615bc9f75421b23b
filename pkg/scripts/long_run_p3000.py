#!/usr/bin/env python3
"""Opt-in large study at p=3000 (n = 600 and 1200, 2 trials).

This is many hours of single-core compute and gigabytes of memory for the
warm-started paths.  It refuses to start unless ``--yes`` is given.
"""
import argparse
import sys
import time
from pathlib import Path

from pseudonet.synthlab import StudyConfig, run_simulation_study, write_study_csv, write_summary_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--yes", action="store_true", help="really start the long run")
    ap.add_argument("--trials", type=int, default=2)
    ap.add_argument("--n", type=int, nargs="+", default=[600, 1200])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out-dir", default="p3000_out")
    args = ap.parse_args()
    if not args.yes:
        print("long run not started; pass --yes to confirm", file=sys.stderr)
        return 2
    cfg = StudyConfig(p=3000, n_list=tuple(args.n), trials=args.trials, seed=3000, sparsity=0.001,
                      n_lambda1=6, lambda2_seq=(1.0, 0.25), record_wallclock=True)
    t0 = time.perf_counter()
    report = run_simulation_study(cfg, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_study_csv(out / "study.csv", report)
    write_summary_csv(out / "summary.csv", report)
    print(f"done in {time.perf_counter() - t0:.0f}s, files in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
