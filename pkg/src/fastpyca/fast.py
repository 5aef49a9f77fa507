"""FAST segment test with bounded rectification.

Each pixel's 16-pixel Bresenham circle is encoded as two 16-bit masks (bright,
dark). A 65536-entry table answers "is the longest circular run of set bits in
[p_min, p_max]?" so detection is two table lookups per pixel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .image import GrayImage, check_min_size

N_SEG = 16
RADIUS = 3

# (dx, dy) with y pointing down; index 0 is the topmost pixel, then clockwise.
CIRCLE = (
    (0, -3), (1, -3), (2, -2), (3, -1),
    (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1),
    (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)


class Label(enum.IntEnum):
    DARK = -1
    SIMILAR = 0
    BRIGHT = 1


@dataclass(frozen=True)
class DetectorParams:
    """Thresholds for the segment test.

    With ``bounded=False`` the upper bound is dropped and the detector behaves
    like classic FAST (any run of at least ``p_min`` is a corner).
    """

    epsilon: int = 20
    p_min: int = 9
    p_max: int = 13
    bounded: bool = True
    n_seg: int = field(default=N_SEG, init=False)

    def __post_init__(self):
        if not 0 < self.epsilon < 256:
            raise ValueError(f"epsilon must be in (0, 256), got {self.epsilon}")
        if not 1 <= self.p_min < N_SEG + 1:
            raise ValueError(f"p_min must be in [1, {N_SEG}], got {self.p_min}")
        if self.bounded and not self.p_min <= self.p_max < N_SEG:
            raise ValueError(
                f"need p_min <= p_max < {N_SEG} for bounded rectification, "
                f"got p_min={self.p_min}, p_max={self.p_max}"
            )

    @classmethod
    def classic(cls, epsilon: int = 20, p_min: int = 9) -> DetectorParams:
        return cls(epsilon=epsilon, p_min=p_min, p_max=N_SEG, bounded=False)

    @property
    def upper(self) -> int:
        """Effective maximum accepted run length."""
        return self.p_max if self.bounded else N_SEG


def label_pixel(center: int, other: int, epsilon: int) -> Label:
    # |diff| == epsilon is SIMILAR: both inequalities are strict
    diff = int(center) - int(other)
    if diff < -epsilon:
        return Label.BRIGHT
    if diff > epsilon:
        return Label.DARK
    return Label.SIMILAR


@dataclass(frozen=True)
class SegmentMasks:
    bright: int
    dark: int


def _circle_values(patch) -> np.ndarray:
    patch = np.asarray(patch, dtype=np.int32)
    if patch.shape != (7, 7):
        raise ValueError(f"expected a 7x7 patch, got {patch.shape}")
    return np.array([patch[RADIUS + dy, RADIUS + dx] for dx, dy in CIRCLE], dtype=np.int32)


def compute_masks(patch, epsilon: int) -> SegmentMasks:
    """Bit i of ``bright``/``dark`` is set when circle pixel i is brighter/darker than the centre by more than epsilon."""
    patch = np.asarray(patch, dtype=np.int32)
    ring = _circle_values(patch)
    center = int(patch[RADIUS, RADIUS])
    bright = dark = 0
    for i, v in enumerate(ring):
        lab = label_pixel(center, int(v), epsilon)
        if lab is Label.BRIGHT:
            bright |= 1 << i
        elif lab is Label.DARK:
            dark |= 1 << i
    return SegmentMasks(bright, dark)


def corner_response(patch) -> int:
    """Sum of |I_c - I_p| over all 16 circle pixels."""
    patch = np.asarray(patch, dtype=np.int32)
    return int(np.abs(_circle_values(patch) - patch[RADIUS, RADIUS]).sum())


def max_circular_runs(masks: np.ndarray) -> np.ndarray:
    """Longest run of consecutive set bits in each 16-bit mask, wrapping bit 15 -> bit 0."""
    m = np.asarray(masks, dtype=np.uint32) & 0xFFFF
    runs = np.zeros(m.shape, dtype=np.uint8)
    acc = m.copy()
    for k in range(1, N_SEG + 1):
        # acc holds the AND of k consecutive rotations; nonzero means a run >= k exists
        runs[acc != 0] = k
        rot = ((m >> k) | (m << (N_SEG - k))) & 0xFFFF
        acc &= rot
    return runs


@dataclass(frozen=True, eq=False)
class CornerLut:
    table: np.ndarray
    run_table: np.ndarray
    params: DetectorParams

    def accepts(self, mask: int) -> bool:
        return bool(self.table[mask & 0xFFFF])


def build_lut(params: DetectorParams) -> CornerLut:
    runs = max_circular_runs(np.arange(1 << N_SEG, dtype=np.uint32))
    table = (runs >= params.p_min) & (runs <= params.upper)
    table.setflags(write=False)
    runs.setflags(write=False)
    return CornerLut(table, runs, params)


@dataclass(frozen=True, eq=False)
class CrfMatrix:
    """Corner response per pixel; 0 means not a corner."""

    responses: np.ndarray

    @property
    def width(self) -> int:
        return self.responses.shape[1]

    @property
    def height(self) -> int:
        return self.responses.shape[0]


def segment_masks(img: GrayImage, epsilon: int):
    """Bright/dark masks and SAD responses for every interior pixel, as (H-6, W-6) arrays."""
    px = img.pixels.astype(np.int32)
    h, w = px.shape
    center = px[RADIUS:h - RADIUS, RADIUS:w - RADIUS]
    bright = np.zeros(center.shape, dtype=np.uint32)
    dark = np.zeros(center.shape, dtype=np.uint32)
    sad = np.zeros(center.shape, dtype=np.int32)
    for i, (dx, dy) in enumerate(CIRCLE):
        ring = px[RADIUS + dy:h - RADIUS + dy, RADIUS + dx:w - RADIUS + dx]
        diff = center - ring
        bright |= (diff < -epsilon).astype(np.uint32) << i
        dark |= (diff > epsilon).astype(np.uint32) << i
        sad += np.abs(diff)
    return bright, dark, sad


def detect_crf(img: GrayImage, params: DetectorParams, lut: CornerLut | None = None,
               out: np.ndarray | None = None) -> CrfMatrix:
    """Corner response matrix for one image.

    A pixel is a corner when either its bright or its dark mask passes the
    table. ``out`` may supply an (H, W) int32 array to write into, so callers
    can reuse storage across frames.
    """
    check_min_size(img)
    if lut is None:
        lut = build_lut(params)
    elif lut.params != params:
        raise ValueError("lookup table was built for different detector params")

    bright, dark, sad = segment_masks(img, params.epsilon)
    corner = lut.table[bright] | lut.table[dark]

    if out is None:
        out = np.zeros((img.height, img.width), dtype=np.int32)
    else:
        if out.shape != (img.height, img.width) or out.dtype != np.int32:
            raise ValueError("out must be an int32 array matching the image shape")
        out.fill(0)
    out[RADIUS:img.height - RADIUS, RADIUS:img.width - RADIUS] = np.where(corner, sad, 0)
    return CrfMatrix(out)
