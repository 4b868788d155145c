"""Datasets: windowing, preprocessing, a synthetic two-modality generator,
noise injection and the CRNS binary format."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import make_rng

CRNS_MAGIC = b"CRNS"
CRNS_VERSION = 1


class FormatError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        super().__init__(msg if offset is None else f"{msg} (at byte {offset})")


class RankError(ValueError):
    pass


@dataclass
class SequencePair:
    x: np.ndarray  # (T, m)
    y: np.ndarray  # (T, n)
    label: int | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.y = np.asarray(self.y, float)
        if self.x.ndim != 2 or self.y.ndim != 2 or len(self.x) != len(self.y):
            raise ValueError(f"modalities must be (T, k) with a shared T, got {self.x.shape} / {self.y.shape}")


@dataclass
class WindowedDataset:
    """Equal-length windows stored as stacked arrays.

    ``labels`` uses -1 for "no label"; ``source`` links each window to the
    sequence it was cut from.
    """
    X: np.ndarray  # (N, L, m)
    Y: np.ndarray  # (N, L, n)
    labels: np.ndarray  # (N,) int
    source: np.ndarray | None = None
    stride: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, float)
        self.Y = np.asarray(self.Y, float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.source is None:
            self.source = np.arange(len(self.X))
        if self.X.ndim != 3 or self.Y.ndim != 3 or self.X.shape[:2] != self.Y.shape[:2]:
            raise ValueError(f"inconsistent shapes {self.X.shape} / {self.Y.shape}")
        if len(self.labels) != len(self.X):
            raise ValueError("one label per item required")

    def __len__(self):
        return len(self.X)

    @property
    def window(self) -> int:
        return self.X.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.X.shape[2], self.Y.shape[2]

    @property
    def has_labels(self) -> bool:
        return bool(np.any(self.labels >= 0))

    def items(self) -> list[SequencePair]:
        return [SequencePair(x, y, int(l) if l >= 0 else None)
                for x, y, l in zip(self.X, self.Y, self.labels)]

    def subset(self, idx) -> "WindowedDataset":
        idx = np.asarray(idx)
        return WindowedDataset(self.X[idx], self.Y[idx], self.labels[idx], self.source[idx],
                               self.stride, dict(self.meta))

    @classmethod
    def from_items(cls, items: list[SequencePair], stride: int = 1, source=None):
        if not items:
            raise ValueError("no items")
        labels = [-1 if it.label is None else it.label for it in items]
        return cls(np.stack([it.x for it in items]), np.stack([it.y for it in items]),
                   np.array(labels), None if source is None else np.asarray(source), stride)


def window(seq: SequencePair, length: int = 8, stride: int = 2) -> list[SequencePair]:
    """Cut ``seq`` into windows starting at 0, stride, 2*stride, ..."""
    if length < 1 or stride < 1:
        raise ValueError("length and stride must be >= 1")
    T = len(seq.x)
    return [SequencePair(seq.x[s:s + length], seq.y[s:s + length], seq.label)
            for s in range(0, T - length + 1, stride)]


def window_all(seqs: list[SequencePair], length: int = 8, stride: int = 2) -> WindowedDataset:
    items, src = [], []
    for i, s in enumerate(seqs):
        w = window(s, length, stride)
        items += w
        src += [i] * len(w)
    return WindowedDataset.from_items(items, stride, src)


@dataclass
class PCATransform:
    mean: np.ndarray
    components: np.ndarray  # (k, p)
    scale: np.ndarray  # (p,)

    def apply(self, frames):
        return (np.asarray(frames, float) - self.mean) @ self.components * self.scale


def pca_whiten(frames, target_dim: int, eps: float = 1e-8, whiten: bool = True):
    """Project onto the top principal directions with unit variance.

    With ``whiten=False`` this is a plain PCA projection. Returns
    ``(projected, transform)``; ``transform.apply`` reuses the training
    statistics on new data.
    """
    frames = np.asarray(frames, float)
    N, k = frames.shape
    if not (N > target_dim >= 1):
        raise ValueError(f"need N > target_dim >= 1, got N={N}, target_dim={target_dim}")
    mean = frames.mean(axis=0)
    C = frames - mean
    cov = C.T @ C / (N - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = max(evals[0], 0.0) * k * np.finfo(float).eps
    rank = int(np.sum(evals > tol))
    if rank < target_dim:
        raise RankError(f"data has rank {rank}, cannot whiten to {target_dim} dimensions")
    # sign convention: largest-magnitude loading positive
    comps = evecs[:, :target_dim]
    signs = np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(target_dim)])
    comps = comps * signs
    scale = 1.0 / np.sqrt(evals[:target_dim] + eps) if whiten else np.ones(target_dim)
    t = PCATransform(mean, comps, scale)
    return t.apply(frames), t


def smooth(frames, width: int):
    """Moving average over time with truncated edges.

    The window covers ``width // 2`` frames back and ``(width - 1) // 2``
    forward, so width 2 averages the current and previous frame.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    frames = np.asarray(frames, float)
    one_d = frames.ndim == 1
    f = frames[:, None] if one_d else frames
    T = len(f)
    back, fwd = width // 2, (width - 1) // 2
    total = np.zeros_like(f)
    count = np.zeros(T)
    # fixed summation order: offsets from -back to +fwd
    for off in range(-back, fwd + 1):
        lo, hi = max(0, -off), min(T, T - off)
        if lo < hi:
            total[lo:hi] += f[lo + off:hi + off]
            count[lo:hi] += 1
    out = total / count[:, None]
    return out[:, 0] if one_d else out


def stack_frames(frames, k: int):
    """Concatenate every ``k`` consecutive frames: (T, m) -> (T // k, k * m)."""
    frames = np.asarray(frames, float)
    T = (len(frames) // k) * k
    return frames[:T].reshape(T // k, k * frames.shape[1])


# --- synthetic benchmark ------------------------------------------------

LATENT_DIM = 4


def synth_generate(num_classes: int = 4, per_class: int = 50, T: int = 8, m: int = 20,
                   n: int = 12, noise_sigma: float = 0.1, seed: int = 1,
                   distractor_strength: float = 0.3, span: int = 64) -> WindowedDataset:
    """Labelled two-modality windows sharing a class-dependent latent signal.

    Each class owns a latent trajectory, a sum of sinusoids with
    class-specific frequencies and phases. Every item is a length-``T``
    window cut at a random offset in ``[0, span)`` of its class trajectory,
    so the label is carried by temporal structure rather than by frame
    means. The latent is mixed into x by a fixed P and into y by a fixed Q.
    Each modality also carries a static offset that encodes only part of
    the label (x: ``k mod 2``, y: ``(k // 2) mod 2``), so either modality
    alone is ambiguous. Values are rounded to float32 so the dataset
    survives a CRNS round-trip exactly.
    """
    if num_classes < 2 or min(T, m, n) < 2:
        raise ValueError("need >= 2 classes and dims >= 2")
    rng = make_rng(seed)
    q = LATENT_DIM
    freqs = rng.uniform(0.04, 0.22, size=(num_classes, q))
    phases = rng.uniform(0, 2 * np.pi, size=(num_classes, q))
    amps = rng.uniform(0.6, 1.2, size=(num_classes, q))
    P = rng.normal(size=(m, q)) / np.sqrt(q)
    Q = rng.normal(size=(n, q)) / np.sqrt(q)
    Ex = 0.5 * rng.normal(size=(2, m))
    Ey = 0.5 * rng.normal(size=(2, n))
    t = np.arange(T)
    X, Y, labels, starts = [], [], [], []
    for k in range(num_classes):
        for _ in range(per_class):
            t0 = int(rng.integers(span))
            z = amps[k] * np.sin(2 * np.pi * freqs[k] * (t0 + t)[:, None] + phases[k])  # (T, q)
            gx = distractor_strength * rng.uniform(0.5, 1.5)
            gy = distractor_strength * rng.uniform(0.5, 1.5)
            X.append(z @ P.T + gx * Ex[k % 2] + noise_sigma * rng.normal(size=(T, m)))
            Y.append(z @ Q.T + gy * Ey[(k // 2) % 2] + noise_sigma * rng.normal(size=(T, n)))
            labels.append(k)
            starts.append(t0)
    X = np.asarray(X, np.float32).astype(float)
    Y = np.asarray(Y, np.float32).astype(float)
    ds = WindowedDataset(X, Y, np.array(labels), stride=1)
    ds.meta = {"P": P, "Q": Q, "freqs": freqs, "phases": phases, "starts": np.array(starts),
               "seed": seed}
    return ds


def stratified_split(ds: WindowedDataset, test_per_class: int, seed: int = 0):
    """Deterministic per-class split into (train, test)."""
    rng = make_rng(seed)
    train_idx, test_idx = [], []
    for k in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == k)
        idx = idx[rng.permutation(len(idx))]
        test_idx += list(idx[:test_per_class])
        train_idx += list(idx[test_per_class:])
    return ds.subset(np.sort(train_idx)), ds.subset(np.sort(test_idx))


def inject_noise(ds: WindowedDataset, modality: int, snr_db: float, seed: int = 0) -> WindowedDataset:
    """Add white Gaussian noise to one modality at a fixed SNR per window.

    The drawn noise is rescaled so each window's noise power is exactly
    ``P_signal / 10**(snr_db / 10)``; ``snr_db=inf`` returns a copy.
    """
    if modality not in (1, 2):
        raise ValueError("modality must be 1 or 2")
    out = ds.subset(np.arange(len(ds)))
    if np.isinf(snr_db) and snr_db > 0:
        return out
    rng = make_rng(seed)
    A = out.X if modality == 1 else out.Y
    for i in range(len(A)):
        p_sig = float(np.mean(A[i] ** 2))
        if not p_sig > 0:
            raise ValueError(f"window {i} has zero signal power")
        noise = rng.normal(size=A[i].shape)
        noise *= np.sqrt(p_sig / 10 ** (snr_db / 10) / np.mean(noise ** 2))
        A[i] = A[i] + noise
    return out


# --- CRNS files ---------------------------------------------------------

_HEADER = struct.Struct("<4sHIIIIB")


def write_dataset(ds: WindowedDataset, path) -> None:
    """Write ``ds`` as CRNS: little-endian header, then per item an i32
    label followed by the x and y windows as row-major float32."""
    N, L, m = ds.X.shape
    n = ds.Y.shape[2]
    has = 1 if ds.has_labels else 0
    out = bytearray(_HEADER.pack(CRNS_MAGIC, CRNS_VERSION, N, L, m, n, has))
    lab = struct.Struct("<i")
    for i in range(N):
        out += lab.pack(int(ds.labels[i]) if has else -1)
        out += ds.X[i].astype("<f4").tobytes()
        out += ds.Y[i].astype("<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def parse_dataset(buf: bytes) -> WindowedDataset:
    if len(buf) < 4 or buf[:4] != CRNS_MAGIC:
        raise FormatError("bad magic, not a CRNS file", 0)
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header", len(buf))
    _, version, N, L, m, n, has = _HEADER.unpack_from(buf, 0)
    if version != CRNS_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if has not in (0, 1):
        raise FormatError(f"bad has_labels flag {has}", _HEADER.size - 1)
    if L < 1 or m < 1 or n < 1:
        raise FormatError(f"inconsistent dims L={L} m={m} n={n}", 10)
    item = 4 + 4 * L * (m + n)
    expected = _HEADER.size + N * item
    if len(buf) < expected:
        bad = _HEADER.size + (len(buf) - _HEADER.size) // item * item
        raise FormatError(f"truncated: expected {expected} bytes, got {len(buf)}", bad)
    if len(buf) > expected:
        raise FormatError("trailing bytes after last item", expected)
    rec = np.dtype([("label", "<i4"), ("x", "<f4", (L, m)), ("y", "<f4", (L, n))])
    arr = np.frombuffer(buf, dtype=rec, count=N, offset=_HEADER.size)
    labels = arr["label"].astype(np.int64)
    if not has:
        labels = np.full(N, -1, dtype=np.int64)
    if N == 0:
        return WindowedDataset(np.zeros((0, L, m)), np.zeros((0, L, n)), labels)
    return WindowedDataset(arr["x"].astype(float), arr["y"].astype(float), labels)


def read_dataset(path) -> WindowedDataset:
    return parse_dataset(Path(path).read_bytes())
