import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastpyca.config import PipelineConfig
from fastpyca.evaluate import (
    EVAL_CONFIG,
    SWEEP_ANGLES,
    corpus,
    corpus_sweep,
    detect_scene,
    feature_count_vs_scales,
    match_greedy,
    mean_margin,
    noise_response_stats,
    repeatability,
    rotation_sweep,
    sweep_csv,
)
from fastpyca.fast import DetectorParams, detect_crf
from fastpyca.pyca import CellConfig, Keypoint
from fastpyca.scene import SceneGenerationError, generate_scene, rotate_scene


@pytest.fixture(scope="module")
def scene():
    return generate_scene(7)


def test_generation_is_deterministic(scene):
    again = generate_scene(7)
    assert again.image == scene.image
    assert again.gt_corners == scene.gt_corners and again.noise_points == scene.noise_points
    assert generate_scene(8).image != scene.image


def test_no_noise_requested():
    assert generate_scene(1, n_noise=0).noise_points == []


def test_single_square_has_four_corners():
    s = generate_scene(3, n_polygons=1, n_noise=0, shapes=("square",))
    assert len(s.gt_corners) == 4


def test_generation_errors():
    with pytest.raises(SceneGenerationError):
        generate_scene(0, n_polygons=60, dims=(64, 64), max_tries=300)
    with pytest.raises(ValueError):
        generate_scene(0, dims=(63, 100))


def _angle_at(prev, cur, nxt):
    a = np.subtract(prev, cur)
    b = np.subtract(nxt, cur)
    return math.degrees(math.acos(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))))


@pytest.mark.parametrize("seed", range(5))
def test_scene_geometry(seed):
    s = generate_scene(seed)
    h, w = s.image.height, s.image.width
    centre = ((w - 1) / 2, (h - 1) / 2)
    radius = min(h, w) / 2
    corners = s.gt_corners
    for x, y in corners + s.noise_points:
        assert math.hypot(x - centre[0], y - centre[1]) < radius
    for nx, ny in s.noise_points:
        assert min(math.hypot(nx - cx, ny - cy) for cx, cy in corners) >= 10
        assert s.image.pixels[int(ny), int(nx)] == 255
    assert s.background in range(90, 111)
    # polygon interiors sit at least 3 * epsilon away from the background
    vals = np.unique(s.image.pixels)
    assert vals.min() <= s.background - 60 or vals[vals < 255].max() >= s.background + 60


def test_vertex_angles_in_range():
    for seed in range(20):
        s = generate_scene(seed, n_polygons=1, n_noise=0, shapes=("parallelogram",))
        v = s.gt_corners
        for i in range(4):
            assert 60 <= _angle_at(v[i - 1], v[i], v[(i + 1) % 4]) <= 120


def test_rotate_zero_is_identity(scene):
    assert rotate_scene(scene, 0) == scene


def test_rotate_ninety_is_exact(scene):
    r = rotate_scene(scene, 90)
    # counter-clockwise as displayed is numpy's rot90 for a square image
    np.testing.assert_array_equal(r.image.pixels, np.rot90(scene.image.pixels))
    c = (scene.image.width - 1) / 2
    assert r.gt_corners == [(c + (y - c), c - (x - c)) for x, y in scene.gt_corners]


def _rotate_complex(points, angle, centre):
    # independent formulation: flip to y-up, multiply by e^{i theta}, flip back
    cx, cy = centre
    rot = cmath.exp(1j * math.radians(angle))
    out = []
    for x, y in points:
        z = complex(x - cx, -(y - cy)) * rot
        out.append((cx + z.real, cy - z.imag))
    return out


@pytest.mark.parametrize("angle", [37, -113, 175])
def test_rotate_matches_independent_matrix(scene, angle):
    r = rotate_scene(scene, angle)
    c = ((scene.image.width - 1) / 2, (scene.image.height - 1) / 2)
    expected = _rotate_complex(scene.gt_corners, angle, c)
    assert len(r.gt_corners) == len(expected)
    for (x, y), (ex, ey) in zip(r.gt_corners, expected):
        assert abs(x - ex) <= 0.5 and abs(y - ey) <= 0.5


def test_rotate_out_of_range_angle(scene):
    with pytest.raises(ValueError):
        rotate_scene(scene, 181)


def test_rotated_labels_follow_the_image(scene):
    # the bright noise pixels move with the image
    r = rotate_scene(scene, 37)
    for x, y in r.noise_points:
        xi, yi = int(round(x)), int(round(y))
        assert r.image.pixels[yi - 1:yi + 2, xi - 1:xi + 2].max() > r.background + 40


def test_repeatability_examples():
    gt = [(10.0, 10.0), (30.0, 12.0), (50.0, 40.0)]
    assert repeatability(gt, gt).f1 == 1.0
    r = repeatability([], gt)
    assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
    r = repeatability([(10.0, 11.0), (90.0, 90.0)], gt)
    assert (r.precision, r.recall) == (0.5, 1 / 3)
    assert r.f1 == pytest.approx(2 * 0.5 / 3 / (0.5 + 1 / 3))
    with pytest.raises(ValueError):
        repeatability(gt, gt, match_radius=0)


def test_repeatability_accepts_keypoints():
    kps = [Keypoint(1, 10, 10, 5)]
    # level-1 (10, 10) at zeta 1.2 projects to (12, 12)
    assert repeatability(kps, [(12, 12)], zeta=1.2).f1 == 1.0


def test_greedy_matching_is_one_to_one():
    det = np.array([[0.0, 0.0], [0.5, 0.0]])
    gt = np.array([[0.4, 0.0]])
    assert match_greedy(det, gt, 3) == [(1, 0)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 30))
def test_small_perturbation_keeps_f1(seed, n):
    rng = np.random.default_rng(seed)
    # points on a 10 px grid so perturbed neighbours cannot steal each other's match
    cells = rng.choice(400, size=n, replace=False)
    gt = [(10.0 * (c % 20), 10.0 * (c // 20)) for c in cells]
    ang = rng.uniform(0, 2 * math.pi, n)
    rad = rng.uniform(0, 1, n)
    det = [(x + r * math.cos(a), y + r * math.sin(a)) for (x, y), a, r in zip(gt, ang, rad)]
    assert repeatability(det, gt, 3).f1 == 1.0
    # symmetry of the measure
    assert repeatability(det, det).f1 == 1.0


def test_sweep_has_fifteen_angles(scene):
    assert list(SWEEP_ANGLES) == list(range(-175, 176, 25)) and len(SWEEP_ANGLES) == 15
    res = rotation_sweep(scene, "bounded")
    assert [r.angle for r in res] == list(SWEEP_ANGLES)
    assert all(0 <= r.f1 <= 1 for r in res)
    text = sweep_csv(res)
    assert text.splitlines()[0] == "angle,precision,recall,f1" and len(text.splitlines()) == 16


@pytest.mark.parametrize("seed", range(3))
def test_noise_free_scene_modes_agree(seed):
    s = generate_scene(seed, n_noise=0)
    b = detect_crf(s.image, DetectorParams(), None).responses
    c = detect_crf(s.image, DetectorParams.classic(), None).responses
    np.testing.assert_array_equal(b, c)
    assert rotation_sweep(s, "bounded", [0])[0].f1 == rotation_sweep(s, "classic", [0])[0].f1


def test_noisy_scene_bounded_wins(scene):
    (b,), (c,) = rotation_sweep(scene, "bounded", [0]), rotation_sweep(scene, "classic", [0])
    assert b.f1 > c.f1
    assert b.recall == pytest.approx(c.recall)


def test_bounded_detections_subset_of_classic():
    for s in corpus(3, seed=20):
        for angle in (0, 50):
            r = rotate_scene(s, angle)
            b = detect_crf(r.image, DetectorParams(), None).responses
            c = detect_crf(r.image, DetectorParams.classic(), None).responses
            assert np.all((b > 0) <= (c > 0))


def test_noise_stats():
    stats = noise_response_stats(corpus(3, seed=40))
    assert stats.total == 60
    assert stats.bounded_suppression_rate >= 0.95
    assert stats.classic_false_positive_rate > 0.5


def test_corpus_sweep_and_margin():
    scenes = corpus(2, seed=3)
    b = corpus_sweep(scenes, "bounded", [0, 100])
    c = corpus_sweep(scenes, "classic", [0, 100])
    assert [r.angle for r in b] == [0, 100]
    assert mean_margin(b, c) > 0
    assert math.isnan(mean_margin([], []))


def test_feature_count_reduction_with_scales():
    img = generate_scene(5, n_polygons=12, n_noise=0, dims=(240, 432)).image
    rows = feature_count_vs_scales(img, PipelineConfig(cell=CellConfig(8, 8)), [1, 2, 4, 8])
    assert [r.scales for r in rows] == [1, 2, 4, 8]
    assert rows[0].raw == rows[0].final
    for r in rows[1:]:
        assert r.final < r.raw


def test_eval_config_detects_each_corner_once(scene):
    clean = generate_scene(7, n_noise=0)
    kps = detect_scene(clean, EVAL_CONFIG)
    assert repeatability(kps, clean.gt_corners).f1 == 1.0
