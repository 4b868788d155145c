"""Composite training objective: reconstruction terms minus scaled correlation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ModelConfig
from .decoder import DecodeTrace, decode_cell
from .encoder import EncoderTrace, batch_correlation, encode_sequence, encode_single_modality
from .numerics import ShapeError
from .params import ModelParams


@dataclass
class LossBreakdown:
    l_fused: float = 0.0
    l_self: float = 0.0
    l_cross: float = 0.0
    l_corr: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {"fused": self.l_fused, "self": self.l_self, "cross": self.l_cross,
                "corr": self.l_corr, "total": self.total}


def mse(pred, target) -> float:
    pred = np.asarray(pred, float)
    target = np.asarray(target, float)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    return float(np.mean((pred - target) ** 2))


def reconstruction_loss(x_hat, x, y_hat, y, beta: float = 1.0) -> float:
    """Mean squared error on x plus ``beta`` times that on y."""
    return mse(x_hat, x) + beta * mse(y_hat, y)


@dataclass
class ForwardCache:
    """Everything the backward sweep needs, keyed to one parameter state."""
    xs: np.ndarray
    ys: np.ndarray
    config: ModelConfig
    fingerprint: str
    fused: EncoderTrace
    single: dict[str, EncoderTrace] = field(default_factory=dict)
    # (source, target modality) -> (frames, decode trace); source in fused|x|y
    decoded: dict[tuple[str, str], tuple[np.ndarray, DecodeTrace]] = field(default_factory=dict)


def needed_decodes(config: ModelConfig) -> list[tuple[str, str]]:
    pairs = [("fused", "x"), ("fused", "y")]
    if config.use_self:
        pairs += [("x", "x"), ("y", "y")]
    if config.use_cross:
        pairs += [("y", "x"), ("x", "y")]
    return pairs


def composite_loss(xs, ys, params: ModelParams, config: ModelConfig):
    """Evaluate the objective on a batch (N, T, m) / (N, T, n).

    Returns ``(LossBreakdown, ForwardCache)``.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    N, T = xs.shape[:2]
    if config.use_corr and N < 2:
        raise ConfigError("the correlation term needs a batch of at least 2")
    enc, dec = params.enc, params.dec
    rec = config.modality_state_recurrence
    st, ftrace = encode_sequence(xs, ys, enc, config.use_dw, rec)
    cache = ForwardCache(xs=xs, ys=ys, config=config, fingerprint=params.fingerprint(), fused=ftrace)
    codes = {"fused": st.h}
    if config.use_self or config.use_cross:
        sx, tx = encode_single_modality(xs, 1, enc, rec)
        sy, ty = encode_single_modality(ys, 2, enc, rec)
        cache.single = {"x": tx, "y": ty}
        codes["x"], codes["y"] = sx.h, sy.h
    for src, tgt in needed_decodes(config):
        cell = dec.x if tgt == "x" else dec.y
        cache.decoded[(src, tgt)] = decode_cell(codes[src], T, cell, config.decode_order)

    beta = config.beta

    def term(src_x, src_y):
        return (mse(cache.decoded[(src_x, "x")][0], xs)
                + beta * mse(cache.decoded[(src_y, "y")][0], ys))

    out = LossBreakdown()
    out.l_fused = term("fused", "fused")
    if config.use_self:
        out.l_self = term("x", "y")
    if config.use_cross:
        out.l_cross = term("y", "x")
    if config.use_corr:
        out.l_corr = float(np.mean([batch_correlation(s.h1, s.h2, config.eps_corr)
                                    for s in ftrace.steps]))
    out.total = out.l_fused + out.l_self + out.l_cross
    if config.use_corr:
        out.total -= config.lam * out.l_corr
    return out, cache
