"""Smoke tests for the compiled bindings.

Each case checks the C++ numerics against an established Python
implementation: scipy's orthonormal DCT, sklearn's ROC utilities, and
direct NumPy transcriptions of the loss formulas.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.fft import dctn, idctn
from sklearn.metrics import roc_auc_score

import fdfl

rng = np.random.default_rng(7)


def blockwise(plane, fn):
    out = np.empty_like(plane)
    for i in range(0, plane.shape[0], 8):
        for j in range(0, plane.shape[1], 8):
            out[i : i + 8, j : j + 8] = fn(plane[i : i + 8, j : j + 8])
    return out


def test_block_dct_matches_scipy():
    plane = rng.uniform(0, 255, size=(24, 32))
    ours = fdfl.block_dct2d(plane)
    ref = blockwise(plane, lambda b: dctn(b, type=2, norm="ortho"))
    assert_allclose(ours, ref, atol=1e-9)

    back = fdfl.block_dct2d(ours, inverse=True)
    ref_back = blockwise(ref, lambda b: idctn(b, type=2, norm="ortho"))
    assert_allclose(back, plane, atol=1e-9)
    assert_allclose(back, ref_back, atol=1e-9)


def test_ycbcr_matches_reference_matrix():
    img = rng.uniform(0, 255, size=(4, 5, 3))
    ycc = fdfl.rgb_to_ycbcr(img)
    mat = np.array(
        [
            [0.299, 0.587, 0.114],
            [-0.168736, -0.331264, 0.5],
            [0.5, -0.418688, -0.081312],
        ]
    )
    ref = np.einsum("ij,hwj->hwi", mat, img)
    ref[..., 1:] += 128.0
    assert_allclose(ycc, ref, atol=1e-9)


def test_preprocess_shape_and_y_channel_content():
    img = rng.uniform(0, 255, size=(16, 16, 3))
    t = fdfl.preprocess_image(img)
    assert t.shape == (2, 2, 192)

    # channel u*8+v of block (i, j) is the DCT of the Y plane at that band
    y = np.einsum("hwj,j->hw", img, np.array([0.299, 0.587, 0.114]))
    coeffs = blockwise(y, lambda b: dctn(b, type=2, norm="ortho"))
    for (i, j, u, v) in [(0, 0, 0, 0), (1, 0, 3, 2), (0, 1, 7, 7)]:
        assert t[i, j, u * 8 + v] == pytest.approx(
            coeffs[i * 8 + u, j * 8 + v], abs=1e-9
        )

    black = fdfl.preprocess_image(np.zeros((16, 16, 3)))
    assert np.abs(black).max() < 1e-9


def test_stats_and_normalize():
    tensors = [rng.normal(10.0, 3.0, size=(2, 2, 192)) for _ in range(5)]
    stats = fdfl.compute_stats(tensors)
    assert stats.count == 5

    cells = np.stack(tensors).reshape(-1, 192)
    assert_allclose(stats.mean, cells.mean(axis=0), atol=1e-9)
    assert_allclose(stats.std, cells.std(axis=0), atol=1e-7)

    normed = np.stack([fdfl.normalize(t, stats) for t in tensors])
    flat = normed.reshape(-1, 192)
    assert_allclose(flat.mean(axis=0), 0.0, atol=1e-9)
    assert_allclose(flat.std(axis=0), 1.0, atol=1e-6)


def test_roc_auc_matches_sklearn():
    for n in (10, 57, 200):
        scores = np.round(rng.uniform(size=n), 2)  # provoke ties
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        ours = fdfl.roc_auc(list(scores), [int(x) for x in labels])
        ref = roc_auc_score(labels, scores)
        assert ours == pytest.approx(ref, abs=1e-12)
        full = fdfl.pauc(list(scores), [int(x) for x in labels], max_fpr=1.0)
        assert full == pytest.approx(ref, abs=1e-12)


def test_scl_forward_matches_numpy_transcription():
    B, D, m = 10, 8, 0.3
    emb = rng.normal(size=(B, D))
    labels = [0] * 5 + [1] * 5
    center = rng.normal(size=D)

    dist = np.linalg.norm(emb - center, axis=1)
    m_nat = dist[:5].mean()
    m_man = dist[5:].mean()
    hinge = m_nat - m_man + m * np.sqrt(D)
    expected = m_nat + max(hinge, 0.0)

    out = fdfl.scl_forward(emb, labels, list(center), margin=m)
    assert out["active"]
    assert out["loss"] == pytest.approx(expected, abs=1e-12)
    assert out["m_nat"] == pytest.approx(m_nat, abs=1e-12)
    assert out["m_man"] == pytest.approx(m_man, abs=1e-12)


def test_scl_backward_matches_finite_differences():
    B, D, m = 8, 6, 0.3
    emb = rng.normal(size=(B, D))
    labels = [0] * 4 + [1] * 4
    center = list(rng.normal(size=D))

    grad_emb, grad_center = fdfl.scl_backward(emb, labels, center, margin=m)
    h = 1e-6

    def loss(e):
        return fdfl.scl_forward(e, labels, center, margin=m)["loss"]

    for i in range(B):
        for j in range(D):
            bump = np.zeros_like(emb)
            bump[i, j] = h
            fd = (loss(emb + bump) - loss(emb - bump)) / (2 * h)
            assert grad_emb[i, j] == pytest.approx(fd, abs=1e-5)

    for j in range(D):
        up = center.copy()
        dn = center.copy()
        up[j] += h
        dn[j] -= h
        fd = (
            fdfl.scl_forward(emb, labels, up, margin=m)["loss"]
            - fdfl.scl_forward(emb, labels, dn, margin=m)["loss"]
        ) / (2 * h)
        assert grad_center[j] == pytest.approx(fd, abs=1e-5)


def test_synth_generate_writes_a_corpus(tmp_path):
    root = tmp_path / "corpus"
    fdfl.synth_generate(str(root), image_size=32, n_train=2, n_val=1,
                        n_test=1, frames=2, seed=11)
    for split in ("train", "val", "test"):
        assert (root / split / "manifest.jsonl").exists()
    pngs = list((root / "train").rglob("*.png"))
    assert len(pngs) == 8  # 2 videos x 2 classes x 2 frames
