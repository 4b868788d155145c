"""Normalized correlation of the modality projections per configuration,
plus the accuracy drop under 0 dB noise on the second modality.

    python scripts/correlation_ablation.py --seeds 1 2 3
"""
import argparse

from corrrnn.benchmark import seed_run
from corrrnn.config import PRESET_FLAGS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--snr", type=float, default=0.0)
    args = ap.parse_args()

    print(f"{'seed':>4} {'config':<8} {'norm_corr':>9} {'clean':>7} {'noisy':>7} {'drop':>7}")
    for seed in args.seeds:
        run = seed_run(seed)
        for name in PRESET_FLAGS:
            nc = run.norm_corr(name)
            clean = run.accuracy(name)
            noisy = run.accuracy(name, noisy_y_snr=args.snr)
            print(f"{seed:>4} {name:<8} {nc:9.3f} {clean:7.3f} {noisy:7.3f} {clean - noisy:7.3f}")


if __name__ == "__main__":
    main()
