"""Array helpers shared by every other module.

Matrices are plain ``numpy.ndarray`` objects (float64 by default). The
functions here add the shape and finiteness checks the rest of the package
relies on, a numerically stable logistic, a seeded generator factory and a
central-difference gradient used as the oracle in gradient checks.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def check_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return check_finite(a @ b, "matmul result")


def sigmoid(v):
    """Logistic function, evaluated without overflow for large |v|."""
    v = np.asarray(v, dtype=DTYPE)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def tanh(v):
    return np.tanh(np.asarray(v, dtype=DTYPE))


_BINARY = {"add": np.add, "sub": np.subtract, "mul": np.multiply}
_UNARY = {"sigmoid": sigmoid, "tanh": tanh}


def elementwise(op: str, a, b=None, *, factor: float | None = None) -> np.ndarray:
    """Apply ``op`` entrywise.

    ``op`` is one of add, sub, mul (binary, equal shapes), sigmoid, tanh
    (unary) or scale (unary, multiplies by ``factor``).
    """
    a = np.asarray(a, dtype=DTYPE)
    if op in _BINARY:
        b = np.asarray(b, dtype=DTYPE)
        if a.shape != b.shape:
            raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")
        out = _BINARY[op](a, b)
    elif op in _UNARY:
        out = _UNARY[op](a)
    elif op == "scale":
        if factor is None:
            raise ValueError("scale needs a factor")
        out = a * factor
    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return check_finite(out, op)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the stream is fixed by numpy for a given seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                         eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``.

    ``x`` is perturbed in place and restored after every evaluation, so
    ``f`` may close over the very array being differentiated.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not x.flags.c_contiguous:
        raise ValueError("finite_diff_gradient perturbs x in place; pass a contiguous array")
    grad = np.zeros(x.shape, dtype=DTYPE)
    flat = x.reshape(-1)  # view; writes land in x
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = float(f(x))
        flat[k] = orig - eps
        fm = float(f(x))
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at entry {k}")
        gflat[k] = (fp - fm) / (2.0 * eps)
    return grad


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))
