"""Train every configuration on the synthetic benchmark and print the
accuracy table for each learning setting.

    python scripts/run_benchmark.py --seeds 1 2 3 [--slices 3] [--tsv out.tsv]
"""
import argparse
import statistics

from corrrnn.benchmark import seed_run
from corrrnn.config import PRESET_FLAGS

SETTINGS = ("fusion", "cross-x", "cross-y", "shared-xy", "shared-yx")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--slices", type=int, choices=(1, 3), default=1)
    ap.add_argument("--tsv", help="also write the per-seed rows here")
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        run = seed_run(seed)
        rows.append((seed, "raw", "fusion", run.raw("both")))
        rows.append((seed, "raw", "cross-x", run.raw("x_only")))
        rows.append((seed, "raw", "cross-y", run.raw("y_only")))
        rows.append((seed, "baseline", "fusion", run.baseline()))
        for name in PRESET_FLAGS:
            for setting in SETTINGS:
                rows.append((seed, name, setting, run.accuracy(name, setting, args.slices)))
        print(f"seed {seed} done ({sum(run.seconds.values()):.0f}s training)")

    names = ["raw", "baseline"] + list(PRESET_FLAGS)
    print(f"\nmedian test accuracy over seeds {args.seeds} (slices={args.slices})")
    print(f"{'config':<10}" + "".join(f"{s:>11}" for s in SETTINGS))
    for name in names:
        cells = []
        for setting in SETTINGS:
            vals = [a for _, n, s, a in rows if n == name and s == setting]
            cells.append(f"{statistics.median(vals):11.3f}" if vals else f"{'-':>11}")
        print(f"{name:<10}" + "".join(cells))
    if args.tsv:
        with open(args.tsv, "w") as f:
            f.write("seed\tconfig\tsetting\taccuracy\n")
            for r in rows:
                f.write("\t".join(map(str, r)) + "\n")


if __name__ == "__main__":
    main()
