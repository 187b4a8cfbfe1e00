#!/usr/bin/env python3
"""
Reproduction check

Reads the run summaries and comparison tables in an output directory and
reports, per accuracy band, whether the runs reproduce the reference results.
The first --seeds value is the primary seed; a band also passes when one of
the fallback seeds passes it. With --data-dir the Grad-CAM class-dominance
check runs on the MNIST checkpoint as well.
Exits with 1 if any band fails, 0 otherwise (missing runs are skipped).
"""

import argparse
import sys

from lcqhnn.acceptance import Status, evaluate_out_dir, format_report
from lcqhnn.errors import LcqhnnError


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("out_dir", help="directory holding *_summary.json files")
    parser.add_argument("--seeds", type=int, nargs="+", default=[42], help="primary seed, then fallbacks")
    parser.add_argument("--data-dir", help="dataset directory for the Grad-CAM check")
    args = parser.parse_args()

    print(f"Checking runs with seeds {args.seeds} in {args.out_dir}")
    print("=" * 50)
    try:
        checks = evaluate_out_dir(args.out_dir, args.seeds, args.data_dir)
    except LcqhnnError as e:
        print(f"❌ ERROR: {e}")
        sys.exit(e.exit_code)

    print(format_report(checks))
    failed = [c for c in checks if c.status is Status.FAIL]
    skipped = [c for c in checks if c.status is Status.SKIP]
    if failed:
        print(f"❌ {len(failed)} check(s) failed")
        sys.exit(1)
    print(f"✅ all available checks passed ({len(skipped)} skipped)")


if __name__ == "__main__":
    main()
