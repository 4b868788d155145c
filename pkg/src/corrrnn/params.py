"""Parameter containers.

Every learnable block is a 2-d float64 array; biases are (1, k) rows so
they broadcast against (batch, k) activations. Gradient sets reuse the
same classes, filled with zeros by :meth:`zeros_like`.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .numerics import glorot_uniform


class _Blocks:
    def blocks(self) -> dict[str, np.ndarray]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, _Blocks):
                for k, arr in v.blocks().items():
                    out[f"{f.name}.{k}"] = arr
            else:
                out[f.name] = v
        return out

    def _map(self, fn):
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kw[f.name] = v._map(fn) if isinstance(v, _Blocks) else fn(v)
        return type(self)(**kw)

    def zeros_like(self):
        return self._map(np.zeros_like)

    def copy(self):
        return self._map(np.copy)

    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for name, arr in self.blocks().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass
class EncoderParams(_Blocks):
    # modality 1 (width m) input maps
    Wr1: np.ndarray
    Wz1: np.ndarray
    Wh1: np.ndarray
    br1: np.ndarray
    bz1: np.ndarray
    bh1: np.ndarray
    # modality 2 (width n)
    Wr2: np.ndarray
    Wz2: np.ndarray
    Wh2: np.ndarray
    br2: np.ndarray
    bz2: np.ndarray
    bh2: np.ndarray
    # recurrent maps shared by the fused and modality paths
    Ur: np.ndarray
    Uz: np.ndarray
    Uh: np.ndarray
    # bilinear coherence scores for dynamic weighting
    A1: np.ndarray
    A2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.Wr1.shape[0], self.Wr2.shape[0], self.Ur.shape[0]


@dataclass
class DecoderCell(_Blocks):
    """Input-free GRU plus a linear read-out for one modality."""
    Ur: np.ndarray
    Uz: np.ndarray
    Uh: np.ndarray
    br: np.ndarray
    bz: np.ndarray
    bh: np.ndarray
    V: np.ndarray
    c: np.ndarray


@dataclass
class DecoderParams(_Blocks):
    x: DecoderCell
    y: DecoderCell


@dataclass
class ModelParams(_Blocks):
    enc: EncoderParams
    dec: DecoderParams

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.enc.dims


def init_encoder(m: int, n: int, d: int, rng: np.random.Generator) -> EncoderParams:
    z = lambda k: np.zeros((1, k))
    return EncoderParams(
        Wr1=glorot_uniform(rng, m, d), Wz1=glorot_uniform(rng, m, d), Wh1=glorot_uniform(rng, m, d),
        br1=z(d), bz1=z(d), bh1=z(d),
        Wr2=glorot_uniform(rng, n, d), Wz2=glorot_uniform(rng, n, d), Wh2=glorot_uniform(rng, n, d),
        br2=z(d), bz2=z(d), bh2=z(d),
        Ur=glorot_uniform(rng, d, d), Uz=glorot_uniform(rng, d, d), Uh=glorot_uniform(rng, d, d),
        A1=np.zeros((m, d)), A2=np.zeros((n, d)),
    )


def init_decoder_cell(d: int, out: int, rng: np.random.Generator) -> DecoderCell:
    return DecoderCell(
        Ur=glorot_uniform(rng, d, d), Uz=glorot_uniform(rng, d, d), Uh=glorot_uniform(rng, d, d),
        br=np.zeros((1, d)), bz=np.zeros((1, d)), bh=np.zeros((1, d)),
        V=glorot_uniform(rng, d, out), c=np.zeros((1, out)),
    )


def init_model(m: int, n: int, d: int, rng: np.random.Generator) -> ModelParams:
    enc = init_encoder(m, n, d, rng)
    dec = DecoderParams(x=init_decoder_cell(d, m, rng), y=init_decoder_cell(d, n, rng))
    return ModelParams(enc=enc, dec=dec)


def template(m: int, n: int, d: int) -> ModelParams:
    """All-zero parameters with the right shapes."""
    return init_model(m, n, d, np.random.default_rng(0)).zeros_like()
