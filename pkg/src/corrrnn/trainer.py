"""Mini-batch training with per-coordinate adaptive step sizes, plus the
CRNM checkpoint format."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autograd import loss_and_grad
from .config import ConfigError, ModelConfig, TrainConfig
from .numerics import NumericError, make_rng
from .objective import LossBreakdown
from .params import ModelParams, init_model, template

log = logging.getLogger(__name__)

CRNM_MAGIC = b"CRNM"
CRNM_VERSION = 1


class FormatError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        super().__init__(msg if offset is None else f"{msg} (at byte {offset})")


@dataclass
class OptimizerState:
    accum: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "OptimizerState":
        return cls({k: np.zeros_like(v) for k, v in params.blocks().items()}, 0)


def sgd_adaptive_step(params: ModelParams, grads: ModelParams, state: OptimizerState,
                      base_lr: float = 0.05, eps_adapt: float = 1e-8) -> None:
    """In-place update: ``acc += g**2; theta -= lr * g / (sqrt(acc) + eps)``."""
    gb = grads.blocks()
    for name, g in gb.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in block {name}")
    for name, p in params.blocks().items():
        g = gb[name]
        acc = state.accum[name]
        acc += g * g
        p -= base_lr * g / (np.sqrt(acc) + eps_adapt)
    state.step += 1


def clip_global_norm(grads: ModelParams, max_norm: float) -> float:
    blocks = grads.blocks()
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in blocks.values())))
    if norm > max_norm:
        s = max_norm / norm
        for g in blocks.values():
            g *= s
    return norm


@dataclass
class TrainResult:
    params: ModelParams
    opt_state: OptimizerState
    history: list[LossBreakdown] = field(default_factory=list)


def train(xs, ys, model_cfg: ModelConfig, train_cfg: TrainConfig,
          params: ModelParams | None = None, callback=None) -> TrainResult:
    """Train on arrays (N, T, m) / (N, T, n).

    Returns the trained parameters, optimizer state and one mean
    :class:`LossBreakdown` per epoch. ``callback(epoch, breakdown)`` may
    return True to stop after that epoch.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    N = len(xs)
    if N == 0:
        raise ConfigError("empty training set")
    bs = train_cfg.batch_size
    if model_cfg.use_corr and (bs < 2 or N < 2):
        raise ConfigError("correlation configs need batch_size >= 2 and at least 2 items")
    rng = make_rng(train_cfg.seed)
    if params is None:
        params = init_model(xs.shape[2], ys.shape[2], train_cfg.hidden, rng)
    opt = OptimizerState.for_params(params)
    history = []
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(N)
        batches = [order[i:i + bs] for i in range(0, N, bs)]
        if model_cfg.use_corr:
            batches = [b for b in batches if len(b) == bs] or [order]
        sums = np.zeros(5)
        for idx in batches:
            loss, grads = loss_and_grad(xs[idx], ys[idx], params, model_cfg)
            if train_cfg.grad_clip is not None:
                clip_global_norm(grads, train_cfg.grad_clip)
            sgd_adaptive_step(params, grads, opt, train_cfg.base_lr, train_cfg.eps_adapt)
            sums += [loss.l_fused, loss.l_self, loss.l_cross, loss.l_corr, loss.total]
        mean = LossBreakdown(*(sums / len(batches)))
        history.append(mean)
        log.info("epoch %d total=%.5f fused=%.5f corr=%.4f", epoch + 1, mean.total,
                 mean.l_fused, mean.l_corr)
        if callback is not None and callback(epoch, mean):
            break
    return TrainResult(params, opt, history)


# --- CRNM checkpoints ---------------------------------------------------

@dataclass
class Checkpoint:
    params: ModelParams
    opt_state: OptimizerState | None = None
    precision: int = 64
    extra: dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(params: ModelParams, opt_state: OptimizerState | None, path,
                    precision: int = 64, extra: dict[str, np.ndarray] | None = None) -> None:
    """Write parameters (and optimizer accumulators) as little-endian blocks.

    Layout: ``CRNM`` | u16 version | u16 precision (32/64) | u32 block count,
    then per block: u16 name length, name (UTF-8), u32 rows, u32 cols,
    rows*cols floats. Accumulators are stored under ``opt.<name>``, the
    step counter as a 1x1 block ``opt_step``; ``extra`` blocks are written
    verbatim after those.
    """
    if precision not in (32, 64):
        raise ValueError("precision must be 32 or 64")
    dt = np.dtype("<f8" if precision == 64 else "<f4")
    blocks = list(params.blocks().items())
    if opt_state is not None:
        blocks += [(f"opt.{k}", v) for k, v in opt_state.accum.items()]
        blocks.append(("opt_step", np.array([[float(opt_state.step)]])))
    blocks += list((extra or {}).items())
    out = bytearray(CRNM_MAGIC)
    out += struct.pack("<HHI", CRNM_VERSION, precision, len(blocks))
    for name, arr in blocks:
        arr = np.atleast_2d(np.asarray(arr, float))
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<II", arr.shape[0], arr.shape[1])
        out += arr.astype(dt).tobytes()
    Path(path).write_bytes(bytes(out))


def _read(buf, off, fmt):
    size = struct.calcsize(fmt)
    if off + size > len(buf):
        raise FormatError("truncated file", off)
    return struct.unpack_from(fmt, buf, off), off + size


def read_blocks(buf: bytes) -> tuple[dict[str, np.ndarray], int]:
    """Parse a CRNM byte string into ``({name: array}, precision)``."""
    if buf[:4] != CRNM_MAGIC:
        raise FormatError("bad magic, not a CRNM checkpoint", 0)
    (version, precision, count), off = _read(buf, 4, "<HHI")
    if version != CRNM_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if precision not in (32, 64):
        raise FormatError(f"bad precision flag {precision}", 6)
    dt = np.dtype("<f8" if precision == 64 else "<f4")
    raw = {}
    for _ in range(count):
        (nlen,), off = _read(buf, off, "<H")
        if off + nlen > len(buf):
            raise FormatError("truncated block name", off)
        name = buf[off:off + nlen].decode("utf-8")
        off += nlen
        (rows, cols), off = _read(buf, off, "<II")
        nbytes = rows * cols * dt.itemsize
        if off + nbytes > len(buf):
            raise FormatError(f"truncated payload for block {name}", off)
        raw[name] = np.frombuffer(buf, dtype=dt, count=rows * cols,
                                  offset=off).reshape(rows, cols).astype(float)
        off += nbytes
    if off != len(buf):
        raise FormatError("trailing bytes after last block", off)
    return raw, precision


def params_from_blocks(raw: dict[str, np.ndarray], prefix: str = "") -> ModelParams:
    try:
        m = raw[prefix + "enc.Wr1"].shape[0]
        n = raw[prefix + "enc.Wr2"].shape[0]
        d = raw[prefix + "enc.Ur"].shape[0]
    except KeyError as e:
        raise FormatError(f"missing block {e.args[0]}") from None
    params = template(m, n, d)
    for name, arr in params.blocks().items():
        key = prefix + name
        if key not in raw:
            raise FormatError(f"missing block {key}")
        if raw[key].shape != arr.shape:
            raise FormatError(f"block {key} has shape {raw[key].shape}, expected {arr.shape}")
        arr[...] = raw[key]
    return params


def load_checkpoint(path) -> Checkpoint:
    """Read a CRNM file written by :func:`save_checkpoint`."""
    raw, precision = read_blocks(Path(path).read_bytes())
    params = params_from_blocks(raw)
    known = set(params.blocks())
    opt = None
    if "opt_step" in raw:
        accum = {}
        for name, arr in params.blocks().items():
            key = f"opt.{name}"
            if key not in raw or raw[key].shape != arr.shape:
                raise FormatError(f"missing or misshapen accumulator {key}")
            accum[name] = raw[key].copy()
        opt = OptimizerState(accum, int(raw["opt_step"][0, 0]))
        known |= {f"opt.{k}" for k in accum} | {"opt_step"}
    extra = {k: v for k, v in raw.items() if k not in known}
    return Checkpoint(params, opt, precision, extra)
