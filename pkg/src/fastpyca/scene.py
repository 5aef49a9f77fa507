"""Synthetic corner scenes: filled polygons with known vertices plus shot noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .image import GrayImage

SHAPES = ("square", "parallelogram", "pentagon")
_SUPERSAMPLE = 4
# keeps shot noise out of every polygon's 7x7 detection window
_NOISE_EDGE_GAP = 5
_NOISE_SPACING = 8


class SceneGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticScene:
    image: GrayImage
    gt_corners: list[tuple[float, float]]
    noise_points: list[tuple[float, float]]
    background: int = 0


def _polygon(shape: str, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Vertices centred on the origin, before rotation and placement."""
    if shape == "square":
        t = np.deg2rad([45, 135, 225, 315])
        return radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    if shape == "parallelogram":
        # interior angles alpha and 180 - alpha, both inside [60, 120]
        alpha = np.deg2rad(rng.uniform(65, 90))
        a = radius * rng.uniform(0.9, 1.2)
        b = radius * rng.uniform(0.9, 1.2)
        u = np.array([a, 0.0])
        v = b * np.array([math.cos(alpha), math.sin(alpha)])
        pts = np.array([[0, 0], u, u + v, v])
        return pts - pts.mean(axis=0)
    if shape == "pentagon":
        t = np.deg2rad(np.arange(5) * 72 + 90)
        return radius * np.stack([np.cos(t), np.sin(t)], axis=1)
    raise ValueError(f"unknown shape {shape!r}")


def _rotate(pts: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return pts @ np.array([[c, s], [-s, c]])


def _inside_convex(verts: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Points strictly on the interior side of every edge of a convex polygon."""
    nxt = np.roll(verts, -1, axis=0)
    edge = nxt - verts
    rel = pts[:, None, :] - verts[None, :, :]
    cross = edge[None, :, 0] * rel[..., 1] - edge[None, :, 1] * rel[..., 0]
    return np.all(cross > 0, axis=1) | np.all(cross < 0, axis=1)


def _render(polys, shape, background, intensities) -> np.ndarray:
    """Area-sampled rendering so edges carry partial-coverage values."""
    h, w = shape
    k = _SUPERSAMPLE
    sub = (np.arange(w * k) + 0.5) / k - 0.5, (np.arange(h * k) + 0.5) / k - 0.5
    xx, yy = np.meshgrid(*sub)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    canvas = np.full((h * k, w * k), float(background))
    for verts, val in zip(polys, intensities):
        lo = np.floor(verts.min(axis=0)) - 1
        hi = np.ceil(verts.max(axis=0)) + 1
        box = (pts[:, 0] >= lo[0]) & (pts[:, 0] <= hi[0]) & (pts[:, 1] >= lo[1]) & (pts[:, 1] <= hi[1])
        idx = np.flatnonzero(box)
        inside = _inside_convex(verts, pts[idx])
        canvas.ravel()[idx[inside]] = val
    img = canvas.reshape(h, k, w, k).mean(axis=(1, 3))
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def generate_scene(seed: int, n_polygons: int = 4, n_noise: int = 20,
                   dims: tuple[int, int] = (160, 160), shapes=SHAPES,
                   epsilon: int = 20, max_tries: int = 2000) -> SyntheticScene:
    """Random non-overlapping polygons and isolated 1-2 pixel noise blobs.

    Everything is placed inside the disc inscribed in the image so any rotation
    about the centre keeps it in frame. Polygon/background contrast is at least
    3 * ``epsilon``; noise blobs are saturated white on a mid-grey background.
    """
    h, w = dims
    if h < 64 or w < 64:
        raise ValueError(f"scene must be at least 64x64, got {w}x{h}")
    rng = np.random.default_rng(seed)
    center = np.array([(w - 1) / 2, (h - 1) / 2])
    disc = min(h, w) / 2 - 6
    background = int(rng.integers(90, 111))

    placed: list[tuple[np.ndarray, float]] = []
    polys, intensities = [], []
    tries = 0
    while len(polys) < n_polygons:
        tries += 1
        if tries > max_tries:
            raise SceneGenerationError(f"could only place {len(polys)} of {n_polygons} polygons in {w}x{h}")
        radius = rng.uniform(9, 15)
        shape = shapes[int(rng.integers(len(shapes)))]
        r = rng.uniform(0, disc - radius - 2)
        phi = rng.uniform(0, 2 * math.pi)
        c = center + r * np.array([math.cos(phi), math.sin(phi)])
        if any(np.hypot(*(c - pc)) < radius + pr + 8 for pc, pr in placed):
            continue
        # axis-unaligned: keep the orientation away from multiples of 90 degrees
        theta = math.radians(rng.uniform(8, 82) + 90 * int(rng.integers(4)))
        verts = _rotate(_polygon(shape, radius, rng), theta) + c
        placed.append((c, float(np.max(np.hypot(*(verts - c).T)))))
        polys.append(verts)
        contrast = int(rng.integers(3 * epsilon + 10, 3 * epsilon + 60))
        intensities.append(background + contrast if rng.random() < 0.5 else background - contrast)

    corners = [tuple(map(float, v)) for verts in polys for v in verts]

    noise: list[tuple[float, float]] = []
    tries = 0
    while len(noise) < n_noise:
        tries += 1
        if tries > max_tries:
            raise SceneGenerationError(f"could only place {len(noise)} of {n_noise} noise points in {w}x{h}")
        r = rng.uniform(0, disc - 2)
        phi = rng.uniform(0, 2 * math.pi)
        p = np.round(center + r * np.array([math.cos(phi), math.sin(phi)]))
        if any(np.hypot(*(p - pc)) < pr + _NOISE_EDGE_GAP for pc, pr in placed):
            continue
        if any(math.hypot(p[0] - cx, p[1] - cy) < 10 for cx, cy in corners):
            continue
        if any(math.hypot(p[0] - nx, p[1] - ny) < _NOISE_SPACING for nx, ny in noise):
            continue
        noise.append((float(p[0]), float(p[1])))

    pixels = _render(polys, dims, background, intensities)
    for x, y in noise:
        xi, yi = int(x), int(y)
        pixels[yi, xi] = 255
        if rng.random() < 0.5:
            dx, dy = ((1, 0), (0, 1), (1, 1))[int(rng.integers(3))]
            pixels[yi + dy, xi + dx] = 255

    return SyntheticScene(GrayImage(pixels), corners, noise, background)


def _rotation(angle: float) -> tuple[float, float]:
    """(cos, sin), exact at multiples of 90 degrees."""
    quarter = angle / 90.0
    if quarter == int(quarter):
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(quarter) % 4]
    t = math.radians(angle)
    return math.cos(t), math.sin(t)


def rotate_points(points, angle: float, center: tuple[float, float]) -> list[tuple[float, float]]:
    """Counter-clockwise (as displayed, y down) rotation of (x, y) points about ``center``."""
    c, s = _rotation(angle)
    cx, cy = center
    out = []
    for x, y in points:
        dx, dy = x - cx, y - cy
        out.append((cx + c * dx + s * dy, cy - s * dx + c * dy))
    return out


def rotate_scene(scene: SyntheticScene, angle: float) -> SyntheticScene:
    """Rotate the image about its centre (bilinear, background fill) and carry the labels along."""
    if not -180 <= angle <= 180:
        raise ValueError(f"angle must be in [-180, 180], got {angle}")
    if angle == 0:
        return scene
    img = scene.image
    h, w = img.height, img.width
    center = ((w - 1) / 2, (h - 1) / 2)
    c, s = _rotation(angle)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - center[0], yy - center[1]
    # inverse map: output pixel -> source position
    src_x = center[0] + c * dx - s * dy
    src_y = center[1] + s * dx + c * dy
    out = ndimage.map_coordinates(img.pixels.astype(np.float64), [src_y, src_x], order=1,
                                  mode="constant", cval=float(scene.background))
    pixels = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)

    def in_bounds(pts):
        return [(x, y) for x, y in pts if 0 <= x <= w - 1 and 0 <= y <= h - 1]

    return replace(
        scene,
        image=GrayImage(pixels),
        gt_corners=in_bounds(rotate_points(scene.gt_corners, angle, center)),
        noise_points=in_bounds(rotate_points(scene.noise_points, angle, center)),
    )
