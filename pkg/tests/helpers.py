"""Small shared fixtures for the unit tests."""

from corrrnn.numerics import make_rng
from corrrnn.params import init_model


def random_model(m, n, d, seed, bias_scale=0.3, a_scale=0.3):
    """Glorot matrices plus non-zero biases and weighting matrices."""
    rng = make_rng(seed)
    p = init_model(m, n, d, rng)
    for name, arr in p.blocks().items():
        if name.endswith(("A1", "A2")):
            arr[...] = rng.normal(scale=a_scale, size=arr.shape)
        elif arr.shape[0] == 1:
            arr[...] = rng.normal(scale=bias_scale, size=arr.shape)
    return p


def as_oracle(enc):
    """EncoderParams -> dict of nested lists (biases as flat lists)."""
    out = {}
    for k, v in enc.blocks().items():
        out[k] = [float(t) for t in v[0]] if k.startswith("b") else v.tolist()
    return out
