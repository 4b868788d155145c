"""Multimodal GRU encoder with dynamic modality weighting.

All functions work on mini-batches: ``x`` is (N, m), ``y`` is (N, n),
hidden states are (N, d). Sequences are (N, T, m) / (N, T, n).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import ShapeError, check_finite, sigmoid
from .params import EncoderParams


def dynamic_weights(x, y, h_prev, A1, A2):
    """Per-example modality weights from bilinear coherence scores.

    Scores are ``x A1 h_prev^T`` and ``y A2 h_prev^T``; weights are
    ``(1 + e^a_i) / (2 + e^a_1 + e^a_2)``. Returns ``(w1, w2, a1, a2)``,
    each of shape (N,) (or scalars for unbatched vectors).
    """
    x, y, h_prev = np.asarray(x, float), np.asarray(y, float), np.asarray(h_prev, float)
    xa = x @ A1
    ya = y @ A2
    a1 = np.sum(xa * h_prev, axis=-1)
    a2 = np.sum(ya * h_prev, axis=-1)
    w1, w2 = smoothed_weights(a1, a2)
    return w1, w2, a1, a2


def smoothed_weights(a1, a2):
    # scale numerator and denominator by exp(-M), M = max(a1, a2, 0)
    M = np.maximum(np.maximum(a1, a2), 0.0)
    e0 = np.exp(-M)
    e1 = np.exp(a1 - M)
    e2 = np.exp(a2 - M)
    n1 = e0 + e1
    n2 = e0 + e2
    denom = n1 + n2  # equal scores give exactly 1/2
    # divide once for the smaller weight and complement it, so the pair
    # sums to 1 within an ulp
    small = np.minimum(n1, n2) / denom
    first_small = n1 <= n2
    w1 = np.where(first_small, small, 1.0 - small)
    w2 = np.where(first_small, 1.0 - small, small)
    if np.ndim(a1) == 0 and np.ndim(a2) == 0:
        return float(w1), float(w2)
    return w1, w2


@dataclass
class EncoderState:
    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, batch: int, d: int) -> "EncoderState":
        return cls(np.zeros((batch, d)), np.zeros((batch, d)), np.zeros((batch, d)), 0)


@dataclass
class StepRecord:
    x: np.ndarray
    y: np.ndarray
    h_prev: np.ndarray
    h1_prev: np.ndarray
    h2_prev: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    # affine input terms W X + b per modality, shared by both paths
    ar1: np.ndarray
    az1: np.ndarray
    ah1: np.ndarray
    ar2: np.ndarray
    az2: np.ndarray
    ah2: np.ndarray
    r1: np.ndarray
    z1: np.ndarray
    c1: np.ndarray
    r2: np.ndarray
    z2: np.ndarray
    c2: np.ndarray
    r: np.ndarray
    z: np.ndarray
    c: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    h: np.ndarray
    a1: np.ndarray | None = None
    a2: np.ndarray | None = None
    xa: np.ndarray | None = None
    ya: np.ndarray | None = None


@dataclass
class EncoderTrace:
    steps: list[StepRecord] = field(default_factory=list)
    mode: str = "fused"  # fused | x | y
    use_dw: bool = False
    recurrence: str = "fused"
    fingerprint: str = ""

    def __len__(self):
        return len(self.steps)

    def states(self, which: str = "h") -> np.ndarray:
        """Stack a per-step state into (N, T, d)."""
        return np.stack([getattr(s, which) for s in self.steps], axis=1)


def gru_step(x, y, state: EncoderState, params: EncoderParams, weights=None,
             recurrence: str = "fused", dw_scores=None):
    """One multimodal GRU update.

    ``weights`` is ``(w1, w2)`` (scalars or (N,) arrays) or ``None`` for the
    unweighted form ``w1 = w2 = 1``. Returns ``(new_state, StepRecord)``.
    """
    p = params
    h = state.h
    N = h.shape[0]
    if weights is None:
        w1 = np.ones(N)
        w2 = np.ones(N)
    else:
        w1 = np.broadcast_to(np.asarray(weights[0], float), (N,)).copy()
        w2 = np.broadcast_to(np.asarray(weights[1], float), (N,)).copy()

    ar1 = x @ p.Wr1 + p.br1
    az1 = x @ p.Wz1 + p.bz1
    ah1 = x @ p.Wh1 + p.bh1
    ar2 = y @ p.Wr2 + p.br2
    az2 = y @ p.Wz2 + p.bz2
    ah2 = y @ p.Wh2 + p.bh2
    hUr = h @ p.Ur
    hUz = h @ p.Uz

    r1 = sigmoid(ar1 + hUr)
    z1 = sigmoid(az1 + hUz)
    c1 = np.tanh(ah1 + (r1 * h) @ p.Uh)
    r2 = sigmoid(ar2 + hUr)
    z2 = sigmoid(az2 + hUz)
    c2 = np.tanh(ah2 + (r2 * h) @ p.Uh)

    W1 = w1[:, None]
    W2 = w2[:, None]
    r = sigmoid(W1 * ar1 + W2 * ar2 + hUr)
    z = sigmoid(W1 * az1 + W2 * az2 + hUz)
    c = np.tanh(W1 * ah1 + W2 * ah2 + (r * h) @ p.Uh)

    if recurrence == "fused":
        base1, base2 = h, h
    else:
        base1, base2 = state.h1, state.h2
    h1 = (1.0 - z1) * base1 + z1 * c1
    h2 = (1.0 - z2) * base2 + z2 * c2
    h_new = (1.0 - z) * h + z * c

    rec = StepRecord(x=x, y=y, h_prev=h, h1_prev=state.h1, h2_prev=state.h2, w1=w1, w2=w2,
                     ar1=ar1, az1=az1, ah1=ah1, ar2=ar2, az2=az2, ah2=ah2,
                     r1=r1, z1=z1, c1=c1, r2=r2, z2=z2, c2=c2, r=r, z=z, c=c,
                     h1=h1, h2=h2, h=h_new)
    if dw_scores is not None:
        rec.a1, rec.a2, rec.xa, rec.ya = dw_scores
    check_finite(h_new, "fused state")
    return EncoderState(h_new, h1, h2, state.t + 1), rec


def _as_batch(seq, name):
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 2:
        return seq[None], True
    if seq.ndim != 3:
        raise ShapeError(f"{name} must be (T, k) or (N, T, k), got {seq.shape}")
    return seq, False


def _run(xs, ys, params, use_dw, fixed_weights, recurrence, mode):
    N, T, m = xs.shape
    if ys.shape[:2] != (N, T):
        raise ShapeError(f"modalities disagree on (N, T): {xs.shape[:2]} vs {ys.shape[:2]}")
    if T < 1:
        raise ShapeError("sequences must have at least one frame")
    pm, pn, d = params.dims
    if m != pm or ys.shape[2] != pn:
        raise ShapeError(f"input widths ({m}, {ys.shape[2]}) do not match params ({pm}, {pn})")
    state = EncoderState.zeros(N, d)
    trace = EncoderTrace(mode=mode, use_dw=use_dw, recurrence=recurrence,
                         fingerprint=params.fingerprint())
    for t in range(T):
        x, y = xs[:, t, :], ys[:, t, :]
        scores = None
        if use_dw:
            xa = x @ params.A1
            ya = y @ params.A2
            a1 = np.sum(xa * state.h, axis=1)
            a2 = np.sum(ya * state.h, axis=1)
            weights = smoothed_weights(a1, a2)
            scores = (a1, a2, xa, ya)
        else:
            weights = fixed_weights
        state, rec = gru_step(x, y, state, params, weights, recurrence, scores)
        trace.steps.append(rec)
    return state, trace


def encode_sequence(xs, ys, params: EncoderParams, use_dw: bool = False,
                    recurrence: str = "fused"):
    """Encode paired sequences from the zero state.

    Accepts (T, k) or (N, T, k) inputs; returns ``(final_state, trace)``
    with batched arrays either way.
    """
    xs, _ = _as_batch(xs, "xs")
    ys, _ = _as_batch(ys, "ys")
    return _run(xs, ys, params, use_dw, None, recurrence, "fused")


def encode_single_modality(seq, which: int, params: EncoderParams, recurrence: str = "fused"):
    """Encode one modality alone; the other is zero-filled with weight 0."""
    if which not in (1, 2):
        raise ValueError(f"modality index must be 1 or 2, got {which!r}")
    seq, _ = _as_batch(seq, "seq")
    m, n, _ = params.dims
    N, T, _ = seq.shape
    if which == 1:
        xs, ys = seq, np.zeros((N, T, n))
        w = (1.0, 0.0)
    else:
        xs, ys = np.zeros((N, T, m)), seq
        w = (0.0, 1.0)
    return _run(xs, ys, params, False, w, recurrence, "x" if which == 1 else "y")


def batch_correlation(H1, H2, eps: float = 1e-8) -> float:
    """Pooled Pearson-style correlation between two (N, d) batches.

    Both batches are centred on their mean row; the products sum over
    examples and hidden dimensions.
    """
    H1 = np.asarray(H1, float)
    H2 = np.asarray(H2, float)
    if H1.shape != H2.shape or H1.ndim != 2:
        raise ShapeError(f"batches must share an (N, d) shape, got {H1.shape} and {H2.shape}")
    if H1.shape[0] < 2:
        raise ValueError("correlation needs at least two examples")
    a = H1 - H1.mean(axis=0)
    b = H2 - H2.mean(axis=0)
    num = np.sum(a * b)
    den = np.sqrt(np.sum(a * a) * np.sum(b * b)) + eps
    return float(num / den)


def batch_correlation_grad(H1, H2, eps: float = 1e-8):
    """Gradients of :func:`batch_correlation` w.r.t. ``H1`` and ``H2``."""
    a = H1 - H1.mean(axis=0)
    b = H2 - H2.mean(axis=0)
    num = np.sum(a * b)
    s1 = np.sum(a * a)
    s2 = np.sum(b * b)
    root = np.sqrt(s1 * s2)
    den = root + eps
    ga = b / den
    gb = a / den
    if root > 0:
        ga = ga - num / den**2 * (s2 / root) * a
        gb = gb - num / den**2 * (s1 / root) * b
    # project out the batch mean (centering)
    ga = ga - ga.mean(axis=0)
    gb = gb - gb.mean(axis=0)
    return ga, gb


def per_unit_correlation(H1, H2, eps: float = 1e-8) -> np.ndarray:
    """Pearson correlation of each hidden unit across the batch, shape (d,)."""
    a = H1 - H1.mean(axis=0)
    b = H2 - H2.mean(axis=0)
    num = np.sum(a * b, axis=0)
    den = np.sqrt(np.sum(a * a, axis=0) * np.sum(b * b, axis=0)) + eps
    return num / den


def normalized_correlation(params: EncoderParams, xs, ys, use_dw: bool = False,
                           batch_size: int = 32, recurrence: str = "fused",
                           eps: float = 1e-8) -> float:
    """Mean per-unit correlation of the final-step modality projections.

    The per-unit correlations are summed over the d fusion units and the sum
    is divided by d, then averaged over mini-batches of ``batch_size``.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if len(xs) == 0:
        raise ValueError("empty dataset")
    N = len(xs)
    bs = max(2, min(batch_size, N))
    vals = []
    for start in range(0, N - bs + 1, bs):
        sl = slice(start, start + bs)
        st, _ = encode_sequence(xs[sl], ys[sl], params, use_dw, recurrence)
        d = st.h1.shape[1]
        vals.append(np.sum(per_unit_correlation(st.h1, st.h2, eps)) / d)
    if not vals:
        raise ValueError("need at least two examples")
    return float(np.mean(vals))
