"""Sequence decoder: one input-free GRU per modality, seeded with the code."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import sigmoid
from .params import DecoderCell, DecoderParams


@dataclass
class DecodeTrace:
    h0: np.ndarray
    # per emission step k = 1..T: previous state, gates, candidate, new state
    prev: list
    r: list
    z: list
    c: list
    s: list
    order: str


def decode_cell(h, T: int, cell: DecoderCell, order: str = "reverse"):
    """Unroll ``cell`` from hidden state ``h`` (N, d) for ``T`` steps.

    Returns ``(frames, trace)`` with frames shaped (N, T, out) in temporal
    order. With ``order="reverse"`` the first emitted frame is the last one.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    s = np.asarray(h, float)
    tr = DecodeTrace(h0=s, prev=[], r=[], z=[], c=[], s=[], order=order)
    out = []
    for _ in range(T):
        r = sigmoid(s @ cell.Ur + cell.br)
        z = sigmoid(s @ cell.Uz + cell.bz)
        c = np.tanh((r * s) @ cell.Uh + cell.bh)
        s_new = (1.0 - z) * s + z * c
        tr.prev.append(s)
        tr.r.append(r)
        tr.z.append(z)
        tr.c.append(c)
        tr.s.append(s_new)
        out.append(s_new @ cell.V + cell.c)
        s = s_new
    frames = np.stack(out, axis=1)
    if order == "reverse":
        frames = frames[:, ::-1, :]
    return np.ascontiguousarray(frames), tr


def decode_sequence(h, T: int, params: DecoderParams, order: str = "reverse"):
    """Reconstruct both modalities from a code ``h`` of shape (d,) or (N, d).

    Returns ``(x_hat, y_hat)``; unbatched input gives (T, m) and (T, n).
    """
    h = np.asarray(h, float)
    single = h.ndim == 1
    if single:
        h = h[None]
    xh, _ = decode_cell(h, T, params.x, order)
    yh, _ = decode_cell(h, T, params.y, order)
    if single:
        return xh[0], yh[0]
    return xh, yh


def decode_cell_backward(d_frames, tr: DecodeTrace, cell: DecoderCell, grad: DecoderCell):
    """Accumulate parameter gradients into ``grad``; return dL/dh0."""
    if tr.order == "reverse":
        d_frames = d_frames[:, ::-1, :]
    T = d_frames.shape[1]
    ds = np.zeros_like(tr.h0)
    for k in reversed(range(T)):
        dout = d_frames[:, k, :]
        s_new = tr.s[k]
        grad.V += s_new.T @ dout
        grad.c += dout.sum(axis=0, keepdims=True)
        ds = ds + dout @ cell.V.T
        s, r, z, c = tr.prev[k], tr.r[k], tr.z[k], tr.c[k]
        dz = ds * (c - s)
        dc = ds * z
        ds_prev = ds * (1.0 - z)
        dpc = dc * (1.0 - c * c)
        grad.Uh += (r * s).T @ dpc
        grad.bh += dpc.sum(axis=0, keepdims=True)
        drs = dpc @ cell.Uh.T
        dr = drs * s
        ds_prev += drs * r
        dpz = dz * z * (1.0 - z)
        grad.Uz += s.T @ dpz
        grad.bz += dpz.sum(axis=0, keepdims=True)
        ds_prev += dpz @ cell.Uz.T
        dpr = dr * r * (1.0 - r)
        grad.Ur += s.T @ dpr
        grad.br += dpr.sum(axis=0, keepdims=True)
        ds_prev += dpr @ cell.Ur.T
        ds = ds_prev
    return ds
