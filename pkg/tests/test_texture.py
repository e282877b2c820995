import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssikit.errors import ValidationError
from ssikit.texture import (
    FEATURE_NAMES,
    FOUR_ORIENTATIONS,
    block_texture,
    features,
    glcm_for_patch,
    naive_window_features,
    quantize,
    read_block_features,
    window_features,
    write_block_features,
)

V = FEATURE_NAMES.index("variance")
CONTRAST = FEATURE_NAMES.index("contrast")


def loop_glcm(patch, offset, levels):
    """Pair enumeration with explicit loops, symmetrized and normalized."""
    dr, dc = offset
    h, w = len(patch), len(patch[0])
    P = [[0.0] * levels for _ in range(levels)]
    n = 0
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < h and 0 <= c2 < w:
                a, b = patch[r][c], patch[r2][c2]
                P[a][b] += 1
                P[b][a] += 1
                n += 2
    return [[v / n for v in row] for row in P]


def loop_features(P):
    G = len(P)
    px = [sum(P[i]) for i in range(G)]
    mu = sum(i * px[i] for i in range(G))
    var = sum((i - mu) ** 2 * px[i] for i in range(G))
    out = dict(uniformity=0.0, entropy=0.0, contrast=0.0, idm=0.0, covariance=0.0)
    for i in range(G):
        for j in range(G):
            p = P[i][j]
            out["uniformity"] += p * p
            if p > 0:
                out["entropy"] -= p * math.log(p)
            out["contrast"] += (i - j) ** 2 * p
            out["idm"] += p / (1 + (i - j) ** 2)
            out["covariance"] += (i - mu) * (j - mu) * p
    out["variance"] = var
    out["correlation"] = out["covariance"] / var if var >= 1e-12 else 0.0
    return np.array([out[name] for name in FEATURE_NAMES])


# --- quantize ---------------------------------------------------------------


def test_quantize_examples():
    assert np.all(quantize(np.full((3, 3), 77), 32) == 0)
    np.testing.assert_array_equal(quantize(np.array([[0, 255]]), 2), [[0, 1]])
    # floor(v * 4 / 256): 0, 1.56, 3.125, 3.98
    np.testing.assert_array_equal(quantize(np.array([[0, 100, 200, 255]]), 4), [[0, 1, 3, 3]])


def test_quantize_checks():
    with pytest.raises(ValidationError):
        quantize(np.zeros((2, 2), dtype=int), 1)
    with pytest.raises(ValidationError):
        quantize(np.zeros((2, 2)), 4)


@given(arrays(np.int64, (6, 7), elements=st.integers(0, 60000)), st.integers(-5000, 5000), st.integers(2, 64))
def test_quantize_shift_invariant(raster, shift, levels):
    shifted = raster + shift + 6000
    np.testing.assert_array_equal(quantize(raster, levels), quantize(shifted, levels))
    q = quantize(raster, levels)
    assert q.min() == 0 and q.max() <= levels - 1


# --- glcm and features ------------------------------------------------------


def test_constant_patch_glcm():
    P = glcm_for_patch(np.full((2, 2), 3), (0, 1), levels=4)
    expected = np.zeros((4, 4))
    expected[3, 3] = 1.0
    np.testing.assert_array_equal(P, expected)


def test_two_by_two_patch_glcm():
    # pairs (0,1) in both rows; symmetrized: P(0,1) = P(1,0) = 2/4
    P = glcm_for_patch(np.array([[0, 1], [0, 1]]), (0, 1), levels=2)
    np.testing.assert_array_equal(P, [[0.0, 0.5], [0.5, 0.0]])


def test_no_pairs_is_error():
    with pytest.raises(ValidationError):
        glcm_for_patch(np.zeros((1, 1), dtype=int), (0, 1), 2)


@given(arrays(np.int64, st.tuples(st.integers(2, 9), st.integers(2, 9)), elements=st.integers(0, 7)),
       st.sampled_from(FOUR_ORIENTATIONS + ((1, 1), (0, -1), (1, 0))))
def test_glcm_symmetric_unit_mass(patch, offset):
    P = glcm_for_patch(patch, offset, levels=8)
    np.testing.assert_array_equal(P, P.T)
    assert abs(P.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(P, loop_glcm(patch.tolist(), offset, 8), atol=1e-15)
    f = features(P)
    assert (f.contrast == 0) == bool(np.all(P[~np.eye(8, dtype=bool)] == 0))
    assert 0 < f.uniformity <= 1 and f.entropy >= 0 and f.contrast >= 0
    assert 0 < f.inverse_difference_moment <= 1 + 1e-15 and f.variance >= 0
    assert -1 - 1e-12 <= f.correlation <= 1 + 1e-12


def test_features_point_mass():
    P = np.zeros((4, 4))
    P[2, 2] = 1.0
    f = features(P)
    assert (f.uniformity, f.entropy, f.contrast, f.inverse_difference_moment) == (1.0, 0.0, 0.0, 1.0)
    assert f.variance == 0.0 and f.correlation == 0.0


def test_features_hand_example():
    # mu = 0.5, var = 0.25, cov = 2 * 0.5 * (-0.5)(0.5) = -0.25
    f = features(np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert f.contrast == pytest.approx(1.0, abs=1e-12)
    assert f.uniformity == pytest.approx(0.5, abs=1e-12)
    assert f.entropy == pytest.approx(math.log(2), abs=1e-12)
    assert f.variance == pytest.approx(0.25, abs=1e-12)
    assert f.inverse_difference_moment == pytest.approx(0.5, abs=1e-12)
    assert f.covariance == pytest.approx(-0.25, abs=1e-12)
    assert f.correlation == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_features_match_loops(seed):
    g = np.random.default_rng(seed)
    G = int(g.integers(2, 12))
    C = g.random((G, G)) * (g.random((G, G)) < 0.6)
    C[0, 0] += 0.1
    P = (C + C.T) / (C + C.T).sum()
    np.testing.assert_allclose(features(P).as_array(), loop_features(P.tolist()), rtol=0, atol=1e-12)


# --- windowed engine --------------------------------------------------------


def test_constant_raster_windows():
    grid = window_features(np.full((30, 30), 9), window=21, levels=32)
    inner = grid[10:20, 10:20].reshape(-1, len(FEATURE_NAMES))
    expected = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    np.testing.assert_array_equal(inner, np.tile(expected, (len(inner), 1)))
    assert np.isnan(grid[0, 0]).all() and np.isnan(grid[9, 15]).all()


def test_striped_raster_orientations():
    raster = np.tile(np.array([[0], [1]]), (5, 9))  # rows alternate 0/1
    horizontal = window_features(raster, 5, 2, offsets=[(0, 1)])
    vertical = window_features(raster, 5, 2, offsets=[(-1, 0)])
    diagonal = window_features(raster, 5, 2, offsets=[(-1, 1), (-1, -1)])
    averaged = window_features(raster, 5, 2)
    ok = ~np.isnan(averaged[..., 0])
    assert np.all(horizontal[ok][:, CONTRAST] == 0.0)
    assert np.all(vertical[ok][:, CONTRAST] == 1.0)
    assert np.all(diagonal[ok][:, CONTRAST] == 1.0)
    # (0 + 1 + 1 + 1) / 4
    np.testing.assert_allclose(averaged[ok][:, CONTRAST], 0.75, atol=1e-15)


def test_rotation_invariance():
    raster = np.random.default_rng(3).integers(0, 256, (24, 24))
    a = window_features(raster, 7, 16)
    b = window_features(np.rot90(raster), 7, 16)
    np.testing.assert_allclose(np.rot90(a), b, atol=1e-12, equal_nan=True)


def test_window_checks():
    with pytest.raises(ValidationError, match="smaller"):
        window_features(np.zeros((10, 10), dtype=int), 21)
    with pytest.raises(ValidationError, match="odd"):
        window_features(np.zeros((10, 10), dtype=int), 4)


@pytest.mark.parametrize("seed", range(8))
def test_engine_matches_naive(seed):
    g = np.random.default_rng(100 + seed)
    h, w = (int(v) for v in g.integers(6, 40, 2))
    window = int(g.choice([3, 5, 7, 9]))
    levels = int(g.integers(2, 33))
    raster = g.integers(0, 4096, (h, w))
    np.testing.assert_allclose(
        window_features(raster, window, levels),
        naive_window_features(raster, window, levels),
        rtol=0, atol=1e-10, equal_nan=True,
    )


def test_engine_threads_bit_identical():
    raster = np.random.default_rng(9).integers(0, 256, (80, 70))
    one = window_features(raster, 9, 32, threads=1)
    many = window_features(raster, 9, 32, threads=4)
    assert np.array_equal(one, many, equal_nan=True)


def test_threads_from_environment(monkeypatch):
    from ssikit.texture import resolve_threads

    monkeypatch.setenv("SSIKIT_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("SSIKIT_THREADS", "zero")
    with pytest.raises(ValidationError):
        resolve_threads(None)


# --- blocks -----------------------------------------------------------------


def test_single_constant_block():
    out = block_texture(np.full((25, 25), 40), np.ones((25, 25), dtype=int), window=21)
    assert out[1].features.variance == 0.0 and out[1].n_windows == 25


def test_constant_block_below_checker_block():
    raster = np.full((30, 60), 100)
    yy, xx = np.indices((30, 30))
    raster[:, 30:] = np.where((yy + xx) % 2 == 0, 20, 220)
    mask = np.ones((30, 60), dtype=int)
    mask[:, 30:] = 2
    out = block_texture(raster, mask, window=5, levels=8)
    assert out[1].features.variance < out[2].features.variance


def test_border_block_missing_and_no_valid_error():
    mask = np.ones((30, 30), dtype=int)
    mask[:, :3] = 2  # only inside the 10-pixel margin of a 21 window
    out = block_texture(np.random.default_rng(0).integers(0, 255, (30, 30)), mask, window=21)
    assert out[2].missing and out[2].features is None
    assert not out[1].missing
    with pytest.raises(ValidationError):
        block_texture(np.zeros((30, 30), dtype=int), np.zeros((30, 30), dtype=int), window=21)


def test_exclude_straddling_windows():
    raster = np.random.default_rng(1).integers(0, 255, (20, 20))
    mask = np.ones((20, 20), dtype=int)
    mask[:, 10:] = 2
    center = block_texture(raster, mask, window=5)
    strict = block_texture(raster, mask, window=5, exclude_straddling=True)
    # block 1 centers at columns 2..9; strict needs columns 2..7
    assert center[1].n_windows == 16 * 8 and strict[1].n_windows == 16 * 6


def test_mask_shape_mismatch():
    with pytest.raises(ValidationError):
        block_texture(np.zeros((5, 5), dtype=int), np.zeros((5, 6), dtype=int), window=3)


def test_feature_file_roundtrip(tmp_path):
    mask = np.ones((30, 30), dtype=int)
    mask[:, :3] = 2
    blocks = block_texture(np.random.default_rng(0).integers(0, 255, (30, 30)), mask, window=21)
    path = tmp_path / "f.csv"
    write_block_features(path, blocks, {1: "B1", 2: "B2"})
    lines = path.read_text().splitlines()
    assert lines[0] == "block_id,uniformity,entropy,contrast,idm,variance,covariance,correlation,n_windows"
    assert lines[2] == "B2,,,,,,,,0"
    back = read_block_features(path)
    assert list(back) == ["B1"]
    assert back["B1"]["variance"] == pytest.approx(blocks[1].features.variance, rel=1e-5)
