import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fastpyca import fast
from fastpyca.fast import (
    DetectorParams,
    Label,
    build_lut,
    compute_masks,
    corner_response,
    detect_crf,
    label_pixel,
    max_circular_runs,
)
from fastpyca.image import GrayImage

from oracles import CIRCLE, circular_run, naive_crf, ring

BOUNDED = DetectorParams()
CLASSIC = DetectorParams.classic()
LUT_B = build_lut(BOUNDED)
LUT_C = build_lut(CLASSIC)

patches = arrays(np.uint8, (7, 7))


def _ring_patch(center, values):
    patch = np.full((7, 7), center, dtype=np.int32)
    for (dx, dy), v in zip(CIRCLE, values):
        patch[3 + dy, 3 + dx] = v
    return patch


def test_circle_matches_geometric_construction():
    assert list(fast.CIRCLE) == CIRCLE


@pytest.mark.parametrize(
    "ic, ip, expected",
    [
        (100, 130, Label.BRIGHT),
        (100, 110, Label.SIMILAR),
        (120, 100, Label.SIMILAR),  # exactly epsilon apart
        (121, 100, Label.DARK),
        (100, 120, Label.SIMILAR),
        (0, 255, Label.BRIGHT),
    ],
)
def test_label_pixel(ic, ip, expected):
    assert label_pixel(ic, ip, 20) is expected


def test_masks_all_bright():
    m = compute_masks(_ring_patch(100, [130] * 16), 20)
    assert (m.bright, m.dark) == (0xFFFF, 0)


def test_masks_constant_patch():
    m = compute_masks(np.full((7, 7), 77), 20)
    assert (m.bright, m.dark) == (0, 0)


def test_masks_alternating():
    # even circle indices +30, odd -30; frozen from the oracle's labelling
    m = compute_masks(_ring_patch(100, [130, 70] * 8), 20)
    assert (m.bright, m.dark) == (0x5555, 0xAAAA)
    assert m.bright & m.dark == 0


@settings(max_examples=300, deadline=None)
@given(patches, st.integers(1, 255))
def test_masks_disjoint_and_match_labels(patch, eps):
    m = compute_masks(patch, eps)
    assert m.bright & m.dark == 0
    c = int(patch[3, 3])
    for i, v in enumerate(ring(patch, 3, 3)):
        assert bool(m.bright >> i & 1) == (v - c > eps)
        assert bool(m.dark >> i & 1) == (c - v > eps)


@pytest.mark.parametrize(
    "mask, corner",
    [(0xFFFF, False), (0x01FF, True), (0xE007, False), (0x1FFF, True), (0x3FFF, False), (0x00FF, False)],
)
def test_lut_examples(mask, corner):
    assert LUT_B.accepts(mask) is corner


def test_lut_wraparound_run():
    assert LUT_B.run_table[0xE007] == 6
    assert LUT_B.run_table[0xF00F] == 8
    # bits 12..15 and 0..4 -> nine in a row across the wrap
    assert LUT_B.accepts(0xF01F)


def test_classic_lut_accepts_full_ring():
    assert LUT_C.accepts(0xFFFF)
    assert not LUT_C.accepts(0x00FF)


@settings(max_examples=500)
@given(st.integers(0, 0xFFFF))
def test_run_length_matches_scanner(mask):
    assert int(max_circular_runs(np.array([mask]))[0]) == circular_run(mask)


@settings(max_examples=300)
@given(st.integers(0, 0xFFFF), st.integers(0, 15))
def test_run_length_rotation_invariant(mask, k):
    rot = ((mask << k) | (mask >> (16 - k))) & 0xFFFF
    assert LUT_B.run_table[rot] == LUT_B.run_table[mask]


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(p_max=16)
    with pytest.raises(ValueError):
        DetectorParams(p_min=10, p_max=9)
    with pytest.raises(ValueError):
        DetectorParams(epsilon=0)
    with pytest.raises(ValueError):
        DetectorParams(epsilon=256)
    assert CLASSIC.upper == 16 and BOUNDED.upper == 13


def test_corner_response_examples():
    assert corner_response(np.full((7, 7), 50)) == 0
    assert corner_response(_ring_patch(100, [130, 70] * 8)) == 480


@settings(max_examples=200)
@given(patches)
def test_corner_response_matches_sum(patch):
    c = int(patch[3, 3])
    assert corner_response(patch) == sum(abs(c - v) for v in ring(patch, 3, 3))


def _square_image():
    px = np.full((40, 40), 20, dtype=np.uint8)
    px[10:30, 10:30] = 200
    return GrayImage(px)


def test_square_corners_only():
    img = _square_image()
    crf = detect_crf(img, BOUNDED, LUT_B).responses
    np.testing.assert_array_equal(crf, naive_crf(img.pixels))
    ys, xs = np.nonzero(crf)
    assert len(ys) > 0
    corners = np.array([(10, 10), (10, 29), (29, 10), (29, 29)])
    for y, x in zip(ys, xs):
        assert np.min(np.abs(corners - (y, x)).max(axis=1)) <= 2
    # edge midpoints
    for y, x in [(10, 20), (29, 20), (20, 10), (20, 29)]:
        assert crf[y, x] == 0


def test_shot_noise_pixel():
    px = np.full((21, 21), 60, dtype=np.uint8)
    px[10, 10] = 250
    img = GrayImage(px)
    assert compute_masks(px[7:14, 7:14], 20).dark == 0xFFFF
    assert detect_crf(img, BOUNDED, LUT_B).responses[10, 10] == 0
    assert detect_crf(img, CLASSIC, LUT_C).responses[10, 10] == 16 * 190
    assert detect_crf(img, BOUNDED, LUT_B).responses.sum() == 0


def test_border_is_zero_and_size_checked():
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, (30, 25), dtype=np.uint8))
    crf = detect_crf(img, CLASSIC, LUT_C).responses
    assert crf[:3].sum() == crf[-3:].sum() == crf[:, :3].sum() == crf[:, -3:].sum() == 0
    with pytest.raises(ValueError):
        detect_crf(GrayImage(np.zeros((6, 20), dtype=np.uint8)), BOUNDED, LUT_B)


def test_lut_params_mismatch():
    img = GrayImage(np.zeros((10, 10), dtype=np.uint8))
    with pytest.raises(ValueError, match="different detector params"):
        detect_crf(img, CLASSIC, LUT_B)


def test_out_buffer_is_reused():
    img = _square_image()
    out = np.full((40, 40), 99, dtype=np.int32)
    crf = detect_crf(img, BOUNDED, LUT_B, out=out)
    assert crf.responses is out
    np.testing.assert_array_equal(out, naive_crf(img.pixels))


def test_matches_naive_on_random_images():
    rng = np.random.default_rng(2024)
    for i in range(100):
        px = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        if i % 2:
            # smooth blobs give realistic long runs, not only salt and pepper
            px = (np.kron(rng.integers(0, 256, (8, 8)), np.ones((8, 8)))).astype(np.uint8)
        img = GrayImage(px)
        np.testing.assert_array_equal(detect_crf(img, BOUNDED, LUT_B).responses, naive_crf(px))
        if i < 20:
            np.testing.assert_array_equal(detect_crf(img, CLASSIC, LUT_C).responses, naive_crf(px, pmax=None))


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(7, 24), st.integers(7, 24))), st.integers(9, 15))
def test_bounded_subset_of_looser_bound(px, pmax):
    img = GrayImage(px)
    tight = detect_crf(img, DetectorParams(p_max=min(pmax, 13)), None).responses
    loose = detect_crf(img, DetectorParams(p_max=pmax), None).responses
    classic = detect_crf(img, CLASSIC, LUT_C).responses
    assert np.all((tight > 0) <= (loose > 0))
    assert np.all((loose > 0) <= (classic > 0))
    # responses agree wherever both fire
    both = (tight > 0)
    np.testing.assert_array_equal(tight[both], classic[both])


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(7, 30), st.integers(7, 30))), st.integers(1, 3))
def test_rotation_equivariance(px, k):
    a = detect_crf(GrayImage(np.rot90(px, k)), BOUNDED, LUT_B).responses
    b = np.rot90(detect_crf(GrayImage(px), BOUNDED, LUT_B).responses, k)
    np.testing.assert_array_equal(a, b)
