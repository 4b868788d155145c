"""Command-line entry point: ``corrrnn {synth,train,eval,gradcheck}``.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
3 I/O or format error. Every command that writes a file also writes
``<file>.manifest.json`` recording the command, flags, seed and format
versions.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .autograd import grad_check
from .config import CONFIG_NAMES, ConfigError, TrainConfig, preset
from .dataio import CRNS_VERSION, FormatError as DataFormatError, inject_noise
from .dataio import read_dataset, stratified_split, synth_generate, write_dataset
from .encoder import normalized_correlation
from .evalkit import SETTINGS, baseline_accuracy, format_summary, run_setting
from .trainer import CRNM_VERSION, FormatError as CkptFormatError, load_checkpoint
from .trainer import params_from_blocks, save_checkpoint, train

log = logging.getLogger("corrrnn")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def write_manifest(out: Path, args: argparse.Namespace, outputs: list[Path]) -> None:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "flags": flags,
        "seed": flags.get("seed"),
        "versions": {"corrrnn": __version__, "crns": CRNS_VERSION, "crnm": CRNM_VERSION},
        "outputs": [str(p) for p in outputs],
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    Path(f"{out}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


# --- commands -------------------------------------------------------------

def cmd_synth(args) -> int:
    ds = synth_generate(args.classes, args.per_class, args.frames, args.dim_x, args.dim_y,
                        args.noise, args.seed)
    out = Path(args.out)
    outputs = [out]
    counts = [len(ds)]
    if args.test_per_class:
        if args.test_out is None:
            raise UsageError("--test-per-class needs --test-out")
        if args.test_per_class >= args.per_class:
            raise UsageError("--test-per-class must be smaller than --per-class")
        train_ds, test_ds = stratified_split(ds, args.test_per_class, args.seed)
        write_dataset(train_ds, out)
        write_dataset(test_ds, args.test_out)
        outputs.append(Path(args.test_out))
        counts = [len(train_ds), len(test_ds)]
    else:
        write_dataset(ds, out)
    write_manifest(out, args, outputs)
    for path, count in zip(outputs, counts):
        print(f"wrote {count} items to {path}")
    return EXIT_OK


def _config_block(name: str, beta: float, lam: float) -> np.ndarray:
    return np.array([[CONFIG_NAMES.index(name), beta, lam]], dtype=float)


def _config_from_block(block) -> tuple[str, float, float]:
    idx, beta, lam = block[0]
    return CONFIG_NAMES[int(idx)], float(beta), float(lam)


def cmd_train(args) -> int:
    ds = read_dataset(args.data)
    tc = TrainConfig(epochs=args.epochs, batch_size=args.batch, base_lr=args.lr, seed=args.seed,
                     hidden=args.hidden, grad_clip=args.grad_clip)
    out = Path(args.out)
    meta = {"meta.config": _config_block(args.config, args.beta, args.lam)}
    log_lines = ["epoch\tfused\tself\tcross\tcorr\ttotal"]
    if args.config == "baseline":
        # two single-modality autoencoders; the y model rides along as extra blocks
        results = []
        for A in (ds.X, ds.Y):
            results.append(train(A, np.zeros(A.shape[:2] + (1,)), preset("fused", beta=args.beta), tc))
        extra = dict(meta)
        extra.update({f"ybase.{k}": v for k, v in results[1].params.blocks().items()})
        save_checkpoint(results[0].params, results[0].opt_state, out, extra=extra)
        history = results[0].history
    else:
        cfg = preset(args.config, beta=args.beta, lam=args.lam)
        if cfg.use_corr and min(args.batch, len(ds)) < 2:
            raise ConfigError("correlation configs need at least 2 items per batch")
        res = train(ds.X, ds.Y, cfg, tc)
        save_checkpoint(res.params, res.opt_state, out, extra=meta)
        history = res.history
    for i, h in enumerate(history, 1):
        log_lines.append(f"{i}\t{h.l_fused:.6f}\t{h.l_self:.6f}\t{h.l_cross:.6f}\t{h.l_corr:.6f}\t{h.total:.6f}")
        print(f"epoch {i:3d}  total {h.total:.5f}  fused {h.l_fused:.5f}  corr {h.l_corr:.4f}")
    loss_path = Path(f"{out}.loss.tsv")
    loss_path.write_text("\n".join(log_lines) + "\n")
    write_manifest(out, args, [out, loss_path])
    return EXIT_OK


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.model)
    train_ds = read_dataset(args.train)
    test_ds = read_dataset(args.test)
    if "meta.config" not in ck.extra:
        raise CkptFormatError("checkpoint has no meta.config block")
    name, beta, lam = _config_from_block(ck.extra["meta.config"])
    if args.noise_snr is not None:
        test_ds = inject_noise(test_ds, args.noise_modality, args.noise_snr, args.seed)
    if name == "baseline":
        m = ck.params.dims[0]
        n = params_from_blocks(ck.extra, "ybase.").dims[0]
        if (m, n) != train_ds.dims or train_ds.dims != test_ds.dims:
            raise CkptFormatError(f"checkpoint dims ({m}, {n}) do not match data {train_ds.dims}")
        if args.setting not in ("fusion", "cross-x", "cross-y"):
            raise UsageError(f"setting {args.setting!r} is not defined for the baseline")
        acc = baseline_accuracy(ck.params, params_from_blocks(ck.extra, "ybase."), train_ds,
                                test_ds, args.setting, seed=args.seed)
        nc = float("nan")
    else:
        m, n, _ = ck.params.dims
        if (m, n) != train_ds.dims or train_ds.dims != test_ds.dims:
            raise CkptFormatError(f"checkpoint dims ({m}, {n}) do not match data {train_ds.dims}")
        cfg = preset(name, beta=beta, lam=lam)
        acc = run_setting(ck.params, cfg, train_ds, test_ds, args.setting, args.slices, seed=args.seed)
        nc = normalized_correlation(ck.params.enc, train_ds.X, train_ds.Y, cfg.use_dw)
    summary = {"setting": args.setting, "config": name, "seed": args.seed, "slices": args.slices,
               "noise_snr": "none" if args.noise_snr is None else args.noise_snr,
               "accuracy": acc, "normalized_correlation": nc}
    text = format_summary(summary)
    print(f"setting={args.setting} config={name} accuracy={acc:.4f} normalized_correlation={nc:.4f}")
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        write_manifest(out, args, [out])
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    report = grad_check(args.config, args.seed, args.eps, args.tol, corrupt=args.corrupt_block)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_FAIL


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrrnn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-modality dataset (CRNS)")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--dim-x", type=int, default=20)
    p.add_argument("--dim-y", type=int, default=12)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--test-per-class", type=int, default=0,
                   help="hold out this many windows per class into --test-out")
    p.add_argument("--test-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model configuration and write a CRNM checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--config", choices=CONFIG_NAMES, default="corr-dw")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1,
                   help="correlation weight (default 0.1)")
    p.add_argument("--beta", type=float, default=1.0, help="y reconstruction weight (default 1.0)")
    p.add_argument("--grad-clip", type=float, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="classify with learned features in one learning setting")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True, help="CRNS file for the supervised training phase")
    p.add_argument("--test", required=True, help="CRNS file for testing")
    p.add_argument("--setting", choices=sorted(SETTINGS), default="fusion")
    p.add_argument("--slices", type=int, choices=(1, 3), default=1)
    p.add_argument("--noise-snr", type=float, default=None,
                   help="add white Gaussian noise at this SNR (dB) to the test set")
    p.add_argument("--noise-modality", type=int, choices=(1, 2), default=2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="write a key=value summary here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--config", choices=CONFIG_NAMES[:-1], default="corr-dw")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--corrupt-block", default=None,
                   help="flip the sign of one analytic gradient block (negative control)")
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CkptFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
