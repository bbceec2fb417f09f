import numpy as np
import pytest

import jpeg_graphnet as jg


def test_dct_roundtrip():
    rng = np.random.default_rng(0)
    d = rng.uniform(-500, 500, (8, 8))
    np.testing.assert_allclose(jg.block_dct(jg.block_idct(d)), d, atol=1e-9)


def test_dct_matches_scipy():
    scipy_fft = pytest.importorskip("scipy.fft")
    f = np.random.default_rng(1).uniform(-128, 127, (8, 8))
    np.testing.assert_allclose(jg.block_dct(f), scipy_fft.dctn(f, norm="ortho"), atol=1e-9)


def test_quant_table_qf50_is_annex_k():
    t = jg.quant_table(50)
    assert t.shape == (8, 8)
    assert t[0, 0] == 16 and t[7, 7] == 99


def test_compress_decompress_fixed_point():
    ds = jg.synthesize(pairs=1, size=32, seed=3)
    c = ds.cover(0)
    plane = jg.decompress(c, ds.table)
    assert plane.shape == (32, 32)
    np.testing.assert_array_equal(jg.compress(plane, ds.table), c)


def test_embed_changes():
    ds = jg.synthesize(pairs=1, size=64, rate=0.0, seed=4)
    c = ds.cover(0)
    s = jg.embed_toy(c, 0.5, seed=9)
    assert np.count_nonzero(s != c) == int(0.25 * jg.count_nzac(c) + 0.5)
    np.testing.assert_array_equal(s[:, :, 0, 0], c[:, :, 0, 0])


def test_evaluate_pe():
    assert jg.evaluate_pe([0.1, 0.2], [0.8, 0.9])["p_e"] == 0.0
    assert jg.evaluate_pe([0.5, 0.5], [0.5])["p_e"] == 0.5


def test_srm_bank():
    k, names = jg.srm_bank()
    assert k.shape == (30, 5, 5) and len(names) == 30
    np.testing.assert_allclose(k.sum(axis=(1, 2)), 0, atol=1e-12)


def test_fold_roundtrip():
    m = np.arange(32 * 16, dtype=float).reshape(32, 16)
    nodes = jg.fold_to_blocks(m)
    assert nodes.shape == (64, 8)
    np.testing.assert_array_equal(jg.unfold_from_blocks(nodes, 32, 16), m)


def test_dataset_io(tmp_path):
    ds = jg.synthesize(pairs=2, size=16, seed=5)
    ds.save(tmp_path / "c.sgds")
    back = jg.load_dataset(tmp_path / "c.sgds")
    assert len(back) == 2 and back.h == 16
    np.testing.assert_array_equal(back.stego(1), ds.stego(1))
    assert back.planes().shape == (4, 16, 16)


def test_detector_rejects_missing_checkpoint(tmp_path):
    with pytest.raises(Exception):
        jg.Detector(tmp_path / "missing.sgck")
