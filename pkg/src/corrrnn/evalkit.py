"""Feature extraction, the multimodal learning settings, a logistic-regression
classifier, the per-modality GRU baseline and metric reporting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, TrainConfig, preset
from .dataio import WindowedDataset, pca_whiten
from .encoder import encode_sequence, encode_single_modality
from .numerics import make_rng
from .params import ModelParams

# setting -> (supervised-training modality, testing modality); feature
# learning always uses both
SETTINGS = {
    "fusion": ("both", "both"),
    "cross-x": ("x_only", "x_only"),
    "cross-y": ("y_only", "y_only"),
    "shared-xy": ("x_only", "y_only"),
    "shared-yx": ("y_only", "x_only"),
}
MODES = ("both", "x_only", "y_only")


@dataclass(frozen=True)
class SettingSpec:
    feature_learning: str
    supervised_training: str
    testing: str

    @classmethod
    def named(cls, name: str) -> "SettingSpec":
        try:
            tr, te = SETTINGS[name]
        except KeyError:
            raise ValueError(f"unknown setting {name!r}; choose from {sorted(SETTINGS)}") from None
        return cls("both", tr, te)


def slice_pool(states, num_slices: int):
    """Mean-pool (N, T, d) states over ``num_slices`` contiguous slices."""
    if num_slices == 1:
        return states[:, -1, :]
    parts = np.array_split(np.arange(states.shape[1]), num_slices)
    return np.concatenate([states[:, p, :].mean(axis=1) for p in parts], axis=1)


def extract_features(params: ModelParams, config: ModelConfig, X, Y, mode: str = "both",
                     num_slices: int = 1) -> np.ndarray:
    """Fusion-layer activations for a batch of windows.

    ``num_slices=1`` gives the final fused state; ``num_slices=3`` splits
    the per-step fused states into three slices, mean-pools each and
    concatenates them.
    """
    if num_slices not in (1, 3):
        raise ValueError("num_slices must be 1 or 3")
    rec = config.modality_state_recurrence
    if mode == "both":
        _, tr = encode_sequence(X, Y, params.enc, config.use_dw, rec)
    elif mode == "x_only":
        _, tr = encode_single_modality(X, 1, params.enc, rec)
    elif mode == "y_only":
        _, tr = encode_single_modality(Y, 2, params.enc, rec)
    else:
        raise ValueError(f"unknown feature mode {mode!r}")
    return slice_pool(tr.states("h"), num_slices)


def raw_features(X, Y, mode: str) -> np.ndarray:
    """Flattened raw windows (the no-learning reference)."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if mode == "x_only":
        return X.reshape(len(X), -1)
    if mode == "y_only":
        return Y.reshape(len(Y), -1)
    if mode == "both":
        return np.concatenate([X.reshape(len(X), -1), Y.reshape(len(Y), -1)], axis=1)
    raise ValueError(f"unknown feature mode {mode!r}")


# --- classifier ---------------------------------------------------------

@dataclass
class LogisticClassifier:
    W: np.ndarray  # (p, K)
    b: np.ndarray  # (K,)
    mean: np.ndarray
    std: np.ndarray
    loss: float
    iterations: int

    def scores(self, F):
        return ((np.asarray(F, float) - self.mean) / self.std) @ self.W + self.b

    def predict(self, F):
        return np.argmax(self.scores(F), axis=1)

    def accuracy(self, F, labels) -> float:
        return float(np.mean(self.predict(F) == np.asarray(labels)))


def _softmax_loss(W, b, F, Yoh, l2):
    S = F @ W + b
    S = S - S.max(axis=1, keepdims=True)
    P = np.exp(S)
    P /= P.sum(axis=1, keepdims=True)
    N = len(F)
    loss = -np.sum(Yoh * np.log(np.maximum(P, 1e-300))) / N + 0.5 * l2 * np.sum(W * W)
    G = (P - Yoh) / N
    return loss, F.T @ G + l2 * W, G.sum(axis=0)


def train_classifier(features, labels, num_classes: int | None = None, l2: float = 1e-2,
                     seed: int = 0, tol: float = 1e-5, max_iter: int = 5000) -> LogisticClassifier:
    """Multinomial logistic regression with an L2 penalty on the weights.

    Features are standardized; the convex objective is minimized by
    accelerated full-batch gradient descent (restarting momentum whenever
    the loss goes up) until the gradient norm drops below ``tol``.
    """
    F = np.asarray(features, float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two classes to train a classifier")
    K = int(num_classes if num_classes is not None else labels.max() + 1)
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    std[std < 1e-12] = 1.0
    F = (F - mean) / std
    N, p = F.shape
    Yoh = np.zeros((N, K))
    Yoh[np.arange(N), labels] = 1.0
    rng = make_rng(seed)
    W = rng.normal(scale=0.01, size=(p, K))
    b = np.zeros(K)
    # softmax curvature is at most 1/2 per direction
    L = 0.5 * (np.linalg.norm(F, 2) ** 2 / N + 1.0) + l2
    step = 1.0 / L
    Wv, bv = W.copy(), b.copy()
    tk = 1.0
    loss, gW, gb = _softmax_loss(W, b, F, Yoh, l2)
    it = 0
    for it in range(1, max_iter + 1):
        _, gWv, gbv = _softmax_loss(Wv, bv, F, Yoh, l2)
        Wn = Wv - step * gWv
        bn = bv - step * gbv
        new_loss, gWn, gbn = _softmax_loss(Wn, bn, F, Yoh, l2)
        if new_loss > loss:
            if tk == 1.0:
                break  # a plain step no longer decreases the loss
            # restart momentum from the last accepted point
            tk = 1.0
            Wv, bv = W, b
            continue
        gW, gb = gWn, gbn
        tn = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        Wv = Wn + (tk - 1) / tn * (Wn - W)
        bv = bn + (tk - 1) / tn * (bn - b)
        W, b, loss, tk = Wn, bn, new_loss, tn
        if np.sqrt(np.sum(gW * gW) + np.sum(gb * gb)) < tol:
            break
    return LogisticClassifier(W, b, mean, std, float(loss), it)


def confusion_matrix(pred, labels, num_classes: int) -> np.ndarray:
    C = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(C, (np.asarray(labels), np.asarray(pred)), 1)
    return C


# --- settings -----------------------------------------------------------

def run_setting(params: ModelParams, config: ModelConfig, train_set: WindowedDataset,
                test_set: WindowedDataset, setting: str | SettingSpec = "fusion",
                num_slices: int = 1, l2: float = 1e-2, seed: int = 0) -> float:
    """Train a classifier on learned features and return test accuracy."""
    spec = SettingSpec.named(setting) if isinstance(setting, str) else setting
    K = int(max(train_set.labels.max(), test_set.labels.max()) + 1)
    Ftr = extract_features(params, config, train_set.X, train_set.Y, spec.supervised_training, num_slices)
    Fte = extract_features(params, config, test_set.X, test_set.Y, spec.testing, num_slices)
    clf = train_classifier(Ftr, train_set.labels, K, l2, seed)
    return clf.accuracy(Fte, test_set.labels)


def raw_accuracy(train_set: WindowedDataset, test_set: WindowedDataset, mode: str,
                 l2: float = 1e-2, seed: int = 0) -> float:
    K = int(max(train_set.labels.max(), test_set.labels.max()) + 1)
    clf = train_classifier(raw_features(train_set.X, train_set.Y, mode), train_set.labels, K, l2, seed)
    return clf.accuracy(raw_features(test_set.X, test_set.Y, mode), test_set.labels)


def train_unimodal_gru(seqs, train_cfg: TrainConfig, beta: float = 1.0):
    """Single-modality GRU sequence autoencoder.

    Realized as the fused encoder with a one-wide, always-zero second input
    and the fused reconstruction objective only.
    """
    from .trainer import train

    seqs = np.asarray(seqs, float)
    empty = np.zeros(seqs.shape[:2] + (1,))
    res = train(seqs, empty, preset("fused", beta=beta), train_cfg)
    return res.params


def baseline_accuracy(model_x: ModelParams, model_y: ModelParams, train_set: WindowedDataset,
                      test_set: WindowedDataset, setting: str = "fusion", d_b: int | None = None,
                      l2: float = 1e-2, seed: int = 0) -> float:
    """Classify PCA-reduced final states of per-modality GRUs.

    ``fusion`` concatenates both reductions (each to ``d_b // 2``);
    ``cross-x`` / ``cross-y`` use one modality's reduction alone.
    """
    which = {"fusion": (1, 2), "cross-x": (1,), "cross-y": (2,)}.get(setting)
    if which is None:
        raise ValueError(f"setting {setting!r} is not defined for the baseline")
    d = model_x.dims[2]
    half = max(1, (d_b if d_b is not None else d) // 2)
    cfg = preset("fused")
    models = {1: model_x, 2: model_y}
    ftr, fte = [], []
    for i in which:
        A_tr = train_set.X if i == 1 else train_set.Y
        A_te = test_set.X if i == 1 else test_set.Y
        htr = extract_features(models[i], cfg, A_tr, np.zeros(A_tr.shape[:2] + (1,)))
        hte = extract_features(models[i], cfg, A_te, np.zeros(A_te.shape[:2] + (1,)))
        red, t = pca_whiten(htr, half, whiten=False)
        ftr.append(red)
        fte.append(t.apply(hte))
    K = int(max(train_set.labels.max(), test_set.labels.max()) + 1)
    clf = train_classifier(np.hstack(ftr), train_set.labels, K, l2, seed)
    return clf.accuracy(np.hstack(fte), test_set.labels)


def baseline_concat(train_set: WindowedDataset, test_set: WindowedDataset, train_cfg: TrainConfig,
                    d_b: int | None = None, l2: float = 1e-2, seed: int = 0) -> float:
    """Train one GRU autoencoder per modality, then :func:`baseline_accuracy`."""
    mx = train_unimodal_gru(train_set.X, train_cfg)
    my = train_unimodal_gru(train_set.Y, train_cfg)
    return baseline_accuracy(mx, my, train_set, test_set, "fusion", d_b, l2, seed)


def format_summary(fields: dict) -> str:
    """``key=value`` lines, in insertion order."""
    lines = []
    for k, v in fields.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out
