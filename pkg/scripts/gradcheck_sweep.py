"""Gradient check every configuration over a range of seeds.

    python scripts/gradcheck_sweep.py --seeds 1 10
"""
import argparse

from corrrnn.autograd import grad_check
from corrrnn.config import PRESET_FLAGS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs=2, default=[1, 10], metavar=("FIRST", "LAST"))
    ap.add_argument("--eps", type=float, default=1e-5)
    ap.add_argument("--tol", type=float, default=1e-4)
    args = ap.parse_args()
    bad = 0
    for name in PRESET_FLAGS:
        for seed in range(args.seeds[0], args.seeds[1] + 1):
            r = grad_check(name, seed, args.eps, args.tol)
            worst = max(r.max_rel_err, key=r.max_rel_err.get)
            print(f"{name:<8} seed {seed:3d}  worst {worst:<12} {r.max_rel_err[worst]:.2e}  "
                  f"{'ok' if r.passed else 'FAIL ' + ','.join(r.failed)}")
            bad += not r.passed
    print(f"{bad} failing checks")


if __name__ == "__main__":
    main()
