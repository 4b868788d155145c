"""Backpropagation through time over recorded forward traces, and a
finite-difference gradient checker."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig, preset
from .decoder import decode_cell_backward
from .encoder import EncoderTrace, batch_correlation_grad
from .numerics import finite_diff_gradient, make_rng
from .objective import ForwardCache, composite_loss, needed_decodes
from .params import EncoderParams, ModelParams, init_model


class TraceMismatchError(RuntimeError):
    pass


def encoder_backward(trace: EncoderTrace, params: EncoderParams, grad: EncoderParams,
                     dh_final, dh1_steps=None, dh2_steps=None):
    """Backpropagate through one encoder pass, accumulating into ``grad``.

    ``dh_final`` is dL/dh_T for the fused state. ``dh1_steps``/``dh2_steps``
    are optional lists of per-step gradients on the modality states.
    """
    p = params
    T = len(trace.steps)
    dh = np.array(dh_final, dtype=float)
    dh1_carry = np.zeros_like(dh)
    dh2_carry = np.zeros_like(dh)
    per_mod = trace.recurrence == "per_modality"
    for t in reversed(range(T)):
        s = trace.steps[t]
        h = s.h_prev
        dh1 = dh1_carry + (dh1_steps[t] if dh1_steps is not None else 0.0)
        dh2 = dh2_carry + (dh2_steps[t] if dh2_steps is not None else 0.0)
        W1 = s.w1[:, None]
        W2 = s.w2[:, None]

        # fused path
        dz = dh * (s.c - h)
        dc = dh * s.z
        dh_prev = dh * (1.0 - s.z)
        dpc = dc * (1.0 - s.c * s.c)
        grad.Uh += (s.r * h).T @ dpc
        drh = dpc @ p.Uh.T
        dr = drh * h
        dh_prev += drh * s.r
        dpz = dz * s.z * (1.0 - s.z)
        grad.Uz += h.T @ dpz
        dh_prev += dpz @ p.Uz.T
        dpr = dr * s.r * (1.0 - s.r)
        grad.Ur += h.T @ dpr
        dh_prev += dpr @ p.Ur.T

        dah1 = W1 * dpc
        daz1 = W1 * dpz
        dar1 = W1 * dpr
        dah2 = W2 * dpc
        daz2 = W2 * dpz
        dar2 = W2 * dpr
        dw1 = np.sum(s.ah1 * dpc + s.az1 * dpz + s.ar1 * dpr, axis=1)
        dw2 = np.sum(s.ah2 * dpc + s.az2 * dpz + s.ar2 * dpr, axis=1)

        # modality paths
        new_carry = []
        for dhi, zi, ci, ri, base in ((dh1, s.z1, s.c1, s.r1, s.h1_prev if per_mod else h),
                                      (dh2, s.z2, s.c2, s.r2, s.h2_prev if per_mod else h)):
            dzi = dhi * (ci - base)
            dci = dhi * zi
            dbase = dhi * (1.0 - zi)
            if per_mod:
                new_carry.append(dbase)
            else:
                dh_prev += dbase
                new_carry.append(np.zeros_like(dh))
            dpci = dci * (1.0 - ci * ci)
            grad.Uh += (ri * h).T @ dpci
            drhi = dpci @ p.Uh.T
            dri = drhi * h
            dh_prev += drhi * ri
            dpzi = dzi * zi * (1.0 - zi)
            grad.Uz += h.T @ dpzi
            dh_prev += dpzi @ p.Uz.T
            dpri = dri * ri * (1.0 - ri)
            grad.Ur += h.T @ dpri
            dh_prev += dpri @ p.Ur.T
            new_carry.append((dpri, dpzi, dpci))
        dh1_carry, (dpr1, dpz1, dpc1), dh2_carry, (dpr2, dpz2, dpc2) = new_carry
        dar1 += dpr1
        daz1 += dpz1
        dah1 += dpc1
        dar2 += dpr2
        daz2 += dpz2
        dah2 += dpc2

        for X, dar, daz, dah, Wr, Wz, Wh, br, bz, bh in (
                (s.x, dar1, daz1, dah1, "Wr1", "Wz1", "Wh1", "br1", "bz1", "bh1"),
                (s.y, dar2, daz2, dah2, "Wr2", "Wz2", "Wh2", "br2", "bz2", "bh2")):
            getattr(grad, Wr)[...] += X.T @ dar
            getattr(grad, Wz)[...] += X.T @ daz
            getattr(grad, Wh)[...] += X.T @ dah
            getattr(grad, br)[...] += dar.sum(axis=0, keepdims=True)
            getattr(grad, bz)[...] += daz.sum(axis=0, keepdims=True)
            getattr(grad, bh)[...] += dah.sum(axis=0, keepdims=True)

        if trace.use_dw:
            # w_i = (1 + e^a_i) / S, S = 2 + e^a_1 + e^a_2, w_2 = 1 - w_1;
            # dw1/da1 = e1 (1 + e2) / S^2, dw1/da2 = -(1 + e1) e2 / S^2,
            # evaluated with everything scaled by exp(-M) as in the forward pass
            M = np.maximum(np.maximum(s.a1, s.a2), 0.0)
            e0, e1, e2 = np.exp(-M), np.exp(s.a1 - M), np.exp(s.a2 - M)
            S = 2.0 * e0 + e1 + e2
            d11 = e1 * (e0 + e2) / S**2
            d12 = -(e0 + e1) * e2 / S**2
            g = dw1 - dw2
            da1 = g * d11
            da2 = g * d12
            grad.A1 += s.x.T @ (da1[:, None] * h)
            grad.A2 += s.y.T @ (da2[:, None] * h)
            dh_prev += da1[:, None] * s.xa + da2[:, None] * s.ya

        dh = dh_prev
    return dh


def backward(params: ModelParams, cache: ForwardCache) -> ModelParams:
    """Gradient of the composite objective w.r.t. every parameter block."""
    if cache.fingerprint != params.fingerprint():
        raise TraceMismatchError("forward cache was produced with different parameters")
    cfg = cache.config
    xs, ys = cache.xs, cache.ys
    if cache.fused.steps and cache.fused.steps[0].x.shape[0] != xs.shape[0]:
        raise TraceMismatchError("trace batch size does not match the cached inputs")
    grad = params.zeros_like()
    beta = cfg.beta
    nx = xs.size
    ny = ys.size

    # gradient on each code (fused / x-only / y-only) from its decoders
    dcodes = {}
    for src, tgt in needed_decodes(cfg):
        frames, tr = cache.decoded[(src, tgt)]
        if tgt == "x":
            dframes = 2.0 * (frames - xs) / nx
            cell, gcell = params.dec.x, grad.dec.x
        else:
            dframes = beta * 2.0 * (frames - ys) / ny
            cell, gcell = params.dec.y, grad.dec.y
        dh0 = decode_cell_backward(dframes, tr, cell, gcell)
        dcodes[src] = dcodes.get(src, 0.0) + dh0

    dh1_steps = dh2_steps = None
    if cfg.use_corr:
        T = len(cache.fused.steps)
        scale = -cfg.lam / T
        dh1_steps, dh2_steps = [], []
        for s in cache.fused.steps:
            g1, g2 = batch_correlation_grad(s.h1, s.h2, cfg.eps_corr)
            dh1_steps.append(scale * g1)
            dh2_steps.append(scale * g2)
    encoder_backward(cache.fused, params.enc, grad.enc, dcodes["fused"], dh1_steps, dh2_steps)
    for src in ("x", "y"):
        if src in dcodes:
            encoder_backward(cache.single[src], params.enc, grad.enc, dcodes[src])
    return grad


def loss_and_grad(xs, ys, params: ModelParams, config: ModelConfig):
    loss, cache = composite_loss(xs, ys, params, config)
    return loss, backward(params, cache)


def rel_err(a, b) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


@dataclass
class GradCheckReport:
    max_rel_err: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4
    failed: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failed

    def lines(self) -> list[str]:
        out = [f"{name:<12s} max_rel_err={err:.3e} {'FAIL' if name in self.failed else 'ok'}"
               for name, err in self.max_rel_err.items()]
        out.append(f"gradcheck {'PASS' if self.passed else 'FAIL'} (tol={self.tol:g})")
        return out


def random_instance(m, n, d, T, N, seed):
    """Random small model and batch for gradient checks.

    Matrices come from the usual initializer; biases and the weighting
    matrices (zero at init) get small random values so every block
    receives a non-trivial gradient.
    """
    rng = make_rng(seed)
    params = init_model(m, n, d, rng)
    for name, arr in params.blocks().items():
        if name.endswith(("A1", "A2")) or arr.shape[0] == 1:
            arr[...] = rng.normal(scale=0.1, size=arr.shape)
    xs = rng.normal(size=(N, T, m))
    ys = rng.normal(size=(N, T, n))
    return params, xs, ys


def grad_check(config: ModelConfig | str = "corr-dw", seed: int = 7, eps: float = 1e-5,
               tol: float = 1e-4, dims=(3, 2, 4, 3, 3), corrupt: str | None = None) -> GradCheckReport:
    """Compare analytic gradients with central differences on a random toy.

    ``dims`` is ``(m, n, d, T, N)``. ``corrupt`` names a block whose analytic
    gradient is sign-flipped before comparison (a negative control).
    """
    if isinstance(config, str):
        config = preset(config)
    m, n, d, T, N = dims
    params, xs, ys = random_instance(m, n, d, T, N, seed)
    _, grads = loss_and_grad(xs, ys, params, config)
    analytic = grads.blocks()
    if corrupt is not None:
        analytic[corrupt] = -analytic[corrupt]
    report = GradCheckReport(tol=tol)
    for name, arr in params.blocks().items():
        num = finite_diff_gradient(lambda _: composite_loss(xs, ys, params, config)[0].total, arr, eps)
        err = float(np.max(rel_err(analytic[name], num))) if arr.size else 0.0
        report.max_rel_err[name] = err
        if err > tol:
            report.failed.append(name)
    return report
