import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bfs_component, brute_dilate, brute_sqdist, dense_blur, disk
from pointprompt.errors import EmptyRegion, InvalidKernelSpec, OutOfBounds
from pointprompt.raster import (Point, argmax_distance, connected_component, dilate, distance_transform,
                                gaussian_blur_threshold, load_image, load_mask, make_kernel, save_image,
                                save_mask)

masks = st.tuples(st.integers(1, 16), st.integers(1, 16)).flatmap(
    lambda hw: arrays(bool, hw, elements=st.booleans()))


# ---- distance transform

def test_dt_single_center_pixel():
    m = np.zeros((3, 3), bool)
    m[1, 1] = True
    d = distance_transform(m)
    assert d[1, 1] == 1
    assert d.sum() == 1


def test_dt_block_center():
    m = np.zeros((7, 7), bool)
    m[1:6, 1:6] = True
    assert distance_transform(m)[3, 3] == 9


def test_dt_all_background():
    d = distance_transform(np.zeros((4, 4), bool))
    assert d.dtype == np.int64
    assert not d.any()


def test_dt_full_mask_uses_exterior():
    d = distance_transform(np.ones((5, 5), bool))
    assert d[0, 0] == 1
    assert d[2, 2] == 9


def test_dt_matches_brute_force_random():
    rng = np.random.default_rng(1234)
    for _ in range(120):
        h, w = rng.integers(1, 33, 2)
        m = rng.random((h, w)) < rng.random()
        assert np.array_equal(distance_transform(m), brute_sqdist(m))


@settings(max_examples=60, deadline=None)
@given(masks)
def test_dt_property(m):
    d = distance_transform(m)
    assert np.array_equal(d, brute_sqdist(m))
    assert (d[~m] == 0).all()


def test_dt_accepts_non_bool_input():
    m = np.zeros((5, 5), dtype=np.uint8)
    m[2, 2] = 255
    assert distance_transform(m)[2, 2] == 1


# ---- argmax

def test_argmax_block():
    m = np.zeros((7, 7), bool)
    m[1:6, 1:6] = True
    assert argmax_distance(distance_transform(m)) == Point(3, 3)


def test_argmax_single_pixel():
    m = np.zeros((5, 5), bool)
    m[1, 2] = True
    assert argmax_distance(distance_transform(m)) == (2, 1)


def test_argmax_row_major_tiebreak():
    f = np.zeros((3, 5), dtype=np.int64)
    f[1, 1] = f[1, 3] = 4
    assert argmax_distance(f) == (1, 1)
    f[0, 4] = 4
    assert argmax_distance(f) == (4, 0)


def test_argmax_empty():
    with pytest.raises(EmptyRegion):
        argmax_distance(np.zeros((3, 3), dtype=np.int64))


# ---- kernels and dilation

def test_make_kernel_examples():
    assert make_kernel(1, 6).offsets == ((0, 0),)
    assert set(make_kernel(5, 0).offsets) == {(0, 0), (1, 0), (2, 0)}
    assert set(make_kernel(3, 5).offsets) == {(0, 0), (-1, 1)}


@pytest.mark.parametrize("size", [1, 3, 5, 7, 11])
@pytest.mark.parametrize("direction", range(8))
def test_make_kernel_invariants(size, direction):
    k = make_kernel(size, direction)
    assert (0, 0) in k.offsets
    assert len(k.offsets) == size // 2 + 1
    assert all(abs(dx) <= size // 2 and abs(dy) <= size // 2 for dx, dy in k.offsets)


@pytest.mark.parametrize("size,direction", [(2, 0), (0, 0), (-3, 1), (3, 8), (3, -1), (3.5, 0)])
def test_make_kernel_invalid(size, direction):
    with pytest.raises(InvalidKernelSpec):
        make_kernel(size, direction)


def test_dilate_examples():
    m = np.zeros((10, 10), bool)
    m[5, 5] = True
    out = dilate(m, {(0, 0), (1, 0)})
    assert set(zip(*np.nonzero(out))) == {(5, 5), (5, 6)}
    assert np.array_equal(dilate(m, make_kernel(1, 0)), m)
    full = np.ones((6, 6), bool)
    assert dilate(full, make_kernel(7, 3)).all()


@settings(max_examples=80, deadline=None)
@given(masks, st.sampled_from([1, 3, 5, 7]), st.integers(0, 7))
def test_dilate_matches_brute_and_is_extensive(m, size, direction):
    k = make_kernel(size, direction)
    out = dilate(m, k)
    assert np.array_equal(out, brute_dilate(m, k.offsets))
    assert (out | m).sum() == out.sum()


@settings(max_examples=50, deadline=None)
@given(masks, st.data())
def test_dilate_monotone(a, data):
    extra = data.draw(arrays(bool, a.shape, elements=st.booleans()))
    b = a | extra
    k = make_kernel(data.draw(st.sampled_from([3, 5])), data.draw(st.integers(0, 7)))
    da, db = dilate(a, k), dilate(b, k)
    assert not (da & ~db).any()
    assert np.array_equal(dilate(dilate(a, make_kernel(1, 0)), make_kernel(1, 0)), a)


# ---- blur

def test_blur_full_mask_interior_kept():
    out = gaussian_blur_threshold(np.ones((20, 20), bool), 2.0, 0.5)
    assert out[6:14, 6:14].all()


def test_blur_empty():
    assert not gaussian_blur_threshold(np.zeros((8, 8), bool), 1.0, 0.5).any()


def test_blur_block_frozen():
    m = np.zeros((9, 9), bool)
    m[2:7, 2:7] = True
    expected = np.zeros((9, 9), bool)
    expected[2:7, 2:7] = True
    for y, x in [(2, 2), (2, 6), (6, 2), (6, 6)]:
        expected[y, x] = False
    out = gaussian_blur_threshold(m, 1.0, 0.5)
    assert np.array_equal(out, expected)
    assert np.array_equal(out, dense_blur(m, 1.0, 0.5))


@settings(max_examples=25, deadline=None)
@given(arrays(bool, (12, 14), elements=st.booleans()), st.sampled_from([0.5, 1.0, 1.7]),
       st.sampled_from([0.3, 0.5, 0.8]))
def test_blur_matches_dense_oracle(m, sigma, threshold):
    assert np.array_equal(gaussian_blur_threshold(m, sigma, threshold), dense_blur(m, sigma, threshold))


@pytest.mark.parametrize("sigma", [0.7, 1.0, 2.0])
def test_blur_of_convex_block_stays_in_dilation(sigma):
    m = np.zeros((40, 40), bool)
    m[12:25, 15:30] = True
    r = int(np.ceil(3 * sigma))
    grown = np.zeros_like(m)
    grown[12 - r:25 + r, 15 - r:30 + r] = True
    out = gaussian_blur_threshold(m, sigma, 0.5)
    assert not (out & ~grown).any()


def test_blur_rejects_bad_params():
    with pytest.raises(ValueError):
        gaussian_blur_threshold(np.ones((3, 3), bool), 0.0, 0.5)
    with pytest.raises(ValueError):
        gaussian_blur_threshold(np.ones((3, 3), bool), 1.0, 1.0)


# ---- connected components

def test_component_two_blobs():
    m = np.zeros((10, 10), bool)
    m[1:3, 1:3] = True
    m[6:9, 6:9] = True
    out = connected_component(m, (1, 1))
    assert out.sum() == 4 and out[1:3, 1:3].all()


def test_component_background_seed():
    m = np.zeros((5, 5), bool)
    m[0, 0] = True
    assert not connected_component(m, (3, 3)).any()


def test_component_l_shape_diagonal():
    m = np.zeros((6, 6), bool)
    m[0:4, 0] = True
    m[3, 0:4] = True
    m[4, 4] = True  # touches only diagonally
    out = connected_component(m, (0, 0))
    assert np.array_equal(out, bfs_component(m, (0, 0)))
    assert out.sum() == m.sum()


def test_component_out_of_bounds():
    with pytest.raises(OutOfBounds):
        connected_component(np.ones((3, 3), bool), (3, 0))


@settings(max_examples=60, deadline=None)
@given(masks, st.data())
def test_component_matches_bfs(m, data):
    y = data.draw(st.integers(0, m.shape[0] - 1))
    x = data.draw(st.integers(0, m.shape[1] - 1))
    assert np.array_equal(connected_component(m, (x, y)), bfs_component(m, (x, y)))


# ---- PNG I/O

def test_png_roundtrip(tmp_path):
    m = disk(20, 30, 10, 10, 6)
    save_mask(tmp_path / "m.png", m)
    assert np.array_equal(load_mask(tmp_path / "m.png"), m)
    from PIL import Image
    with Image.open(tmp_path / "m.png") as im:
        assert im.mode == "L"
        assert set(np.unique(np.array(im))) == {0, 255}
    img = np.random.default_rng(0).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    save_image(tmp_path / "i.png", img)
    assert np.array_equal(load_image(tmp_path / "i.png"), img)
