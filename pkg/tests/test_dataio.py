from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrrnn.dataio import (FormatError, RankError, SequencePair, WindowedDataset, inject_noise,
                            parse_dataset, pca_whiten, read_dataset, smooth, stack_frames,
                            stratified_split, synth_generate, window, window_all, write_dataset)
from corrrnn.encoder import batch_correlation
from corrrnn.evalkit import raw_accuracy
from corrrnn.numerics import make_rng

FIXTURES = Path(__file__).parent / "fixtures"


def seq(T, m=3, n=2, label=None):
    rng = make_rng(T)
    return SequencePair(rng.normal(size=(T, m)), rng.normal(size=(T, n)), label)


# --- windowing ----------------------------------------------------------

@pytest.mark.parametrize("T,count", [(8, 1), (12, 3), (5, 0)])
def test_window_counts(T, count):
    w = window(seq(T), 8, 2)
    assert len(w) == count
    if count:
        s = seq(T)
        starts = [int(np.flatnonzero((s.x == it.x[0]).all(axis=1))[0]) for it in w]
        assert starts == list(range(0, 2 * count, 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5))
def test_window_provenance(L, k):
    s = seq(L * k + L - 1, label=2)  # leftover frames never fill a window
    ds = window_all([s], L, L)
    assert np.array_equal(ds.X.reshape(-1, 3), s.x[:L * k])
    assert np.array_equal(ds.Y.reshape(-1, 2), s.y[:L * k])
    assert set(ds.labels) == {2} and set(ds.source) == {0}


def test_window_bad_args():
    with pytest.raises(ValueError):
        window(seq(8), 0, 2)


# --- PCA whitening ------------------------------------------------------

def test_pca_already_white():
    X = make_rng(0).normal(size=(20_000, 3))
    Z, _ = pca_whiten(X, 3)
    assert np.max(np.abs(np.cov(Z.T) - np.eye(3))) < 0.05


def test_pca_full_rank_identity():
    rng = make_rng(1)
    X = rng.normal(size=(500, 4)) @ rng.normal(size=(4, 4))
    Z, _ = pca_whiten(X, 4)
    assert np.max(np.abs(np.cov(Z.T) - np.eye(4))) < 1e-6


def test_pca_decorrelates_and_generalizes():
    rng = make_rng(2)
    C = np.array([[1.0, 0.8], [0.8, 1.0]])
    L = np.linalg.cholesky(C)
    X = rng.normal(size=(10_000, 2)) @ L.T
    Z, t = pca_whiten(X, 2)
    rho = np.corrcoef(Z.T)[0, 1]
    assert abs(rho) < 0.05
    held = t.apply(rng.normal(size=(10_000, 2)) @ L.T)
    cov = np.cov(held.T)
    assert abs(cov[0, 1]) < 0.1 and np.allclose(np.diag(cov), 1, atol=0.1)


def test_pca_rank_error_names_rank():
    rng = make_rng(3)
    X = rng.normal(size=(100, 2)) @ rng.normal(size=(2, 5))  # rank 2 in 5 dims
    with pytest.raises(RankError, match="rank 2"):
        pca_whiten(X, 3)


def test_pca_sign_convention():
    X = make_rng(4).normal(size=(200, 3)) * [3.0, 2.0, 1.0]
    _, t1 = pca_whiten(X, 2)
    _, t2 = pca_whiten(X.copy(), 2)
    comps = t1.components
    assert np.array_equal(comps, t2.components)
    assert np.all(comps[np.argmax(np.abs(comps), axis=0), [0, 1]] > 0)


# --- smoothing / stacking -----------------------------------------------

def test_smooth_examples():
    x = make_rng(5).normal(size=(6, 2))
    assert np.array_equal(smooth(x, 1), x)
    assert np.array_equal(smooth(np.full((5, 2), 0.75), 4), np.full((5, 2), 0.75))
    assert np.allclose(smooth(np.array([0.0, 4.0, 0.0, 4.0]), 2), [0, 2, 2, 2])


def test_stack_frames():
    x = np.arange(14.0).reshape(7, 2)
    s = stack_frames(x, 3)
    assert s.shape == (2, 6) and np.array_equal(s[1], np.arange(6.0, 12.0))


# --- synthetic generator ------------------------------------------------

def test_synth_deterministic():
    a = synth_generate(noise_sigma=0.0, seed=4)
    b = synth_generate(noise_sigma=0.0, seed=4)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert np.array_equal(a.labels, b.labels)
    c = synth_generate(noise_sigma=0.1, seed=5)
    assert not np.array_equal(a.X, c.X)


def test_synth_shapes():
    ds = synth_generate(num_classes=3, per_class=7, T=5, m=6, n=4)
    assert ds.X.shape == (21, 5, 6) and ds.Y.shape == (21, 5, 4)
    assert np.bincount(ds.labels).tolist() == [7, 7, 7]


def test_synth_shared_latent_correlates():
    # x and y have different widths; pull both back to the latent space
    ds = synth_generate(noise_sigma=0.1, seed=1)
    zx = ds.X @ np.linalg.pinv(ds.meta["P"]).T
    zy = ds.Y @ np.linalg.pinv(ds.meta["Q"]).T
    assert batch_correlation(zx.reshape(-1, 4), zy.reshape(-1, 4)) > 0.3


def test_synth_separability_stable_across_seeds():
    accs = []
    for s in range(1, 6):
        tr, te = stratified_split(synth_generate(per_class=75, noise_sigma=0.1, seed=s), 25, s)
        accs.append(raw_accuracy(tr, te, "both"))
    assert max(accs) - min(accs) < 0.05


def test_stratified_split():
    ds = synth_generate(per_class=10, seed=2)
    tr, te = stratified_split(ds, 3, seed=2)
    assert np.bincount(te.labels).tolist() == [3] * 4 and len(tr) == 28
    assert not set(tr.source) & set(te.source)


# --- noise injection ----------------------------------------------------

def test_noise_infinite_snr_is_copy():
    ds = synth_generate(per_class=5, seed=1)
    out = inject_noise(ds, 2, float("inf"))
    assert np.array_equal(out.Y, ds.Y) and out.Y is not ds.Y


def test_noise_power_at_0db():
    ds = synth_generate(per_class=20, seed=1)  # 80 windows x 8 x 12 = 7680 per modality
    ds = WindowedDataset(np.concatenate([ds.X, ds.X]), np.concatenate([ds.Y, ds.Y]),
                         np.concatenate([ds.labels, ds.labels]))
    assert ds.Y.size >= 10_000
    out = inject_noise(ds, 2, 0.0, seed=3)
    noise = out.Y - ds.Y
    assert abs(np.mean(noise ** 2) / np.mean(ds.Y ** 2) - 1) < 0.01
    assert np.array_equal(out.X, ds.X)


def test_noise_seeds_differ_same_power():
    ds = synth_generate(per_class=5, seed=1)
    a = inject_noise(ds, 1, 6.0, seed=1).X - ds.X
    b = inject_noise(ds, 1, 6.0, seed=2).X - ds.X
    assert not np.allclose(a, b)
    assert abs(np.mean(a ** 2) - np.mean(b ** 2)) < 1e-9


def test_noise_zero_power():
    ds = WindowedDataset(np.zeros((2, 3, 2)), np.ones((2, 3, 1)), [0, 1])
    with pytest.raises(ValueError):
        inject_noise(ds, 1, 0.0)


# --- CRNS ---------------------------------------------------------------

def test_crns_round_trip(tmp_path):
    ds = synth_generate(per_class=4, seed=3)
    write_dataset(ds, tmp_path / "d.crns")
    back = read_dataset(tmp_path / "d.crns")
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.Y, ds.Y)
    assert np.array_equal(back.labels, ds.labels)
    write_dataset(back, tmp_path / "e.crns")
    assert (tmp_path / "d.crns").read_bytes() == (tmp_path / "e.crns").read_bytes()


def test_crns_unlabelled(tmp_path):
    ds = WindowedDataset(np.ones((2, 3, 2)), np.zeros((2, 3, 1)), [-1, -1])
    write_dataset(ds, tmp_path / "u.crns")
    back = read_dataset(tmp_path / "u.crns")
    assert not back.has_labels and np.array_equal(back.labels, [-1, -1])


def test_crns_bad_magic():
    with pytest.raises(FormatError) as e:
        parse_dataset(b"CRNX" + bytes(30))
    assert e.value.offset == 0


def test_crns_truncated_and_trailing(tmp_path):
    ds = synth_generate(per_class=2, seed=3)
    write_dataset(ds, tmp_path / "d.crns")
    buf = (tmp_path / "d.crns").read_bytes()
    item = 4 + 4 * 8 * (20 + 12)
    with pytest.raises(FormatError) as e:
        parse_dataset(buf[:23 + 2 * item + 10])
    assert e.value.offset == 23 + 2 * item  # start of the first incomplete item
    with pytest.raises(FormatError):
        parse_dataset(buf[:10])
    with pytest.raises(FormatError) as e:
        parse_dataset(buf + b"\0")
    assert e.value.offset == len(buf)


def golden_crns_bytes():
    lines = (FIXTURES / "golden.crns.hex").read_text().splitlines()
    return bytes.fromhex("".join(l for l in lines if not l.startswith("#")).replace(" ", ""))


def test_crns_golden_fixture():
    ds = parse_dataset(golden_crns_bytes())
    assert ds.labels.tolist() == [3, 0]
    assert ds.X[0].tolist() == [[1.0, -2.5], [0.5, 3.0]]
    assert ds.Y[0].tolist() == [[2.0], [-1.0]]
    assert ds.X[1].tolist() == [[0.0, 0.0], [1.0, 1.0]]
    assert ds.Y[1].tolist() == [[0.5], [0.5]]


def test_crns_golden_rewrite(tmp_path):
    write_dataset(parse_dataset(golden_crns_bytes()), tmp_path / "g.crns")
    assert (tmp_path / "g.crns").read_bytes() == golden_crns_bytes()
