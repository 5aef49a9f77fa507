"""Pyramidal culling and aggregation.

Feature culling keeps the strongest corner of every non-overlapping cell of a
CRF matrix. Aggregation projects the per-level survivors onto the native
scale, scores each native pixel by summed response (k_r) and number of
contributing levels (k_l), and runs a sparse non-maximal suppression over the
occupied pixels only.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fast import CornerLut, CrfMatrix, DetectorParams, build_lut, detect_crf
from .image import Pyramid


@dataclass(frozen=True, order=True)
class Keypoint:
    # field order gives the (level, y, x) sort used for pipeline output
    level: int
    y: int
    x: int
    response: int = field(compare=False)

    def __post_init__(self):
        if self.response <= 0:
            raise ValueError(f"keypoint response must be positive, got {self.response}")
        if self.level < 0 or self.x < 0 or self.y < 0:
            raise ValueError(f"negative keypoint coordinate: {self}")


@dataclass(frozen=True)
class CellConfig:
    cell_h: int = 32
    cell_w: int = 32

    def __post_init__(self):
        if self.cell_h < 1 or self.cell_w < 1:
            raise ValueError(f"cell dims must be >= 1, got {self.cell_h}x{self.cell_w}")

    @classmethod
    def parse(cls, text: str) -> CellConfig:
        h, _, w = text.lower().partition("x")
        return cls(int(h), int(w or h))


@dataclass(frozen=True)
class NmsConfig:
    q: int = 3

    def __post_init__(self):
        if self.q < 1 or self.q % 2 == 0:
            raise ValueError(f"NMS window must be odd and >= 1, got {self.q}")


# ---------------------------------------------------------------------------
# Feature culling
# ---------------------------------------------------------------------------

def _responses(crf) -> np.ndarray:
    return crf.responses if isinstance(crf, CrfMatrix) else np.asarray(crf)


def feature_cull(crf, cfg: CellConfig, level: int = 0) -> list[Keypoint]:
    """Strongest corner in each cell, scanning cells in row-major order.

    Ties resolve to the smallest (y, x) inside the cell. Partial cells on the
    right and bottom edges are culled like full ones.
    """
    resp = _responses(crf)
    h, w = resp.shape
    ch, cw = cfg.cell_h, cfg.cell_w
    ny, nx = -(-h // ch), -(-w // cw)

    padded = np.full((ny * ch, nx * cw), -1, dtype=np.int64)
    padded[:h, :w] = resp
    cells = padded.reshape(ny, ch, nx, cw).transpose(0, 2, 1, 3).reshape(ny, nx, ch * cw)
    # argmax returns the first maximum, i.e. row-major smallest (y, x) within the cell
    idx = cells.argmax(axis=2)
    best = np.take_along_axis(cells, idx[..., None], axis=2)[..., 0]

    cy, cx = np.nonzero(best > 0)
    local = idx[cy, cx]
    ys = cy * ch + local // cw
    xs = cx * cw + local % cw
    vals = best[cy, cx]
    return [Keypoint(level, int(y), int(x), int(v)) for y, x, v in zip(ys, xs, vals)]


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def project_to_native(kp: Keypoint, zeta: float, dims: tuple[int, int] | None = None) -> tuple[int, int]:
    """Native-scale (x, y) of a keypoint: round-half-up of x_n * zeta**n, clamped to ``dims`` = (H, W)."""
    s = zeta ** kp.level
    x0 = _round_half_up(kp.x * s)
    y0 = _round_half_up(kp.y * s)
    if dims is not None:
        h, w = dims
        x0 = min(max(x0, 0), w - 1)
        y0 = min(max(y0, 0), h - 1)
    return x0, y0


@dataclass(frozen=True, eq=False)
class AggregationScores:
    """k_r / k_l score maps over the native image plus per-pixel provenance.

    ``occupancy`` maps a native (y, x) to the keypoints that project onto it;
    it stands in for the dense N_s x H x W response volume.
    """

    k_r: np.ndarray
    k_l: np.ndarray
    occupancy: dict[tuple[int, int], tuple[Keypoint, ...]]

    @property
    def shape(self) -> tuple[int, int]:
        return self.k_r.shape


def aggregate_scores(per_level: Iterable[Iterable[Keypoint]], zeta: float,
                     dims: tuple[int, int]) -> AggregationScores:
    h, w = dims
    k_r = np.zeros((h, w), dtype=np.int64)
    k_l = np.zeros((h, w), dtype=np.int32)
    occ: dict[tuple[int, int], list[Keypoint]] = {}
    for kps in per_level:
        for kp in kps:
            x0, y0 = project_to_native(kp, zeta, dims)
            k_r[y0, x0] += kp.response
            k_l[y0, x0] += 1
            occ.setdefault((y0, x0), []).append(kp)
    occupancy = {p: tuple(sorted(v)) for p, v in sorted(occ.items())}
    return AggregationScores(k_r, k_l, occupancy)


def sparse_nms(scores: AggregationScores, cfg: NmsConfig = NmsConfig()) -> list[Keypoint]:
    """Single-pass suppression over occupied pixels.

    An occupied pixel is dropped when some other occupied pixel in its q x q
    window has strictly larger k_r and at least equal k_l. Every keypoint of a
    surviving pixel is returned at its original level.
    """
    h, w = scores.shape
    r = cfg.q // 2
    k_r, k_l = scores.k_r, scores.k_l
    out: list[Keypoint] = []
    for (y, x), kps in scores.occupancy.items():
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        win_r = k_r[y0:y1, x0:x1]
        win_l = k_l[y0:y1, x0:x1]
        # unoccupied pixels have k_r == 0 and can never beat a positive k_r
        if np.any((win_r > k_r[y, x]) & (win_l >= k_l[y, x])):
            continue
        out.extend(kps)
    return sorted(out)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineResult:
    keypoints: list[Keypoint]
    per_level: list[list[Keypoint]]
    scores: AggregationScores | None = None

    @property
    def raw_count(self) -> int:
        return sum(len(k) for k in self.per_level)


def detect_level(img, params: DetectorParams, lut: CornerLut, cfg: CellConfig, level: int) -> list[Keypoint]:
    return feature_cull(detect_crf(img, params, lut), cfg, level)


def run_pipeline(pyramid: Pyramid, params: DetectorParams, cfg: CellConfig,
                 nms: NmsConfig = NmsConfig(), lut: CornerLut | None = None,
                 executor: Executor | None = None, aggregate_single: bool = False) -> PipelineResult:
    """CRF + culling on every level, then aggregation across levels.

    With a single level there is nothing to aggregate and the culled keypoints
    are returned as-is, unless ``aggregate_single`` asks for the sparse NMS to
    run anyway (useful to merge corners split across neighbouring cells).
    ``executor`` optionally runs the per-level stages concurrently; output does
    not depend on it.
    """
    if lut is None:
        lut = build_lut(params)
    levels = range(len(pyramid))
    if executor is None:
        per_level = [detect_level(pyramid[n], params, lut, cfg, n) for n in levels]
    else:
        futures = [executor.submit(detect_level, pyramid[n], params, lut, cfg, n) for n in levels]
        per_level = [f.result() for f in futures]

    if len(pyramid) == 1 and not aggregate_single:
        return PipelineResult(sorted(per_level[0]), per_level)
    native = pyramid[0]
    scores = aggregate_scores(per_level, pyramid.scale_factor, (native.height, native.width))
    return PipelineResult(sparse_nms(scores, nms), per_level, scores)


def pyca_pipeline(pyramid: Pyramid, params: DetectorParams, cfg: CellConfig,
                  nms: NmsConfig = NmsConfig(), **kwargs) -> list[Keypoint]:
    return run_pipeline(pyramid, params, cfg, nms, **kwargs).keypoints


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

FIELDS = ("level", "x", "y", "response", "k_r", "k_l")


def _rows(kps: Sequence[Keypoint], zeta: float, scores: AggregationScores | None):
    for kp in kps:
        if scores is None:
            k_r, k_l = kp.response, 1
        else:
            x0, y0 = project_to_native(kp, zeta, scores.shape)
            k_r, k_l = int(scores.k_r[y0, x0]), int(scores.k_l[y0, x0])
        yield kp.level, kp.x, kp.y, kp.response, k_r, k_l


def format_keypoints(kps: Sequence[Keypoint], zeta: float = 1.2,
                     scores: AggregationScores | None = None) -> str:
    """One ``level x y response k_r k_l`` line per keypoint."""
    return "".join(" ".join(str(v) for v in row) + "\n" for row in _rows(kps, zeta, scores))


def keypoints_csv(kps: Sequence[Keypoint], zeta: float = 1.2,
                  scores: AggregationScores | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    writer.writerows(_rows(kps, zeta, scores))
    return buf.getvalue()


def parse_keypoints(text: str) -> list[tuple[Keypoint, int, int]]:
    """Inverse of :func:`format_keypoints`: (keypoint, k_r, k_l) per line."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        level, x, y, resp, k_r, k_l = map(int, parts)
        out.append((Keypoint(level, y, x, resp), k_r, k_l))
    return out
