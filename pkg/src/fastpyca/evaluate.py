"""Repeatability under rotation, noise-suppression rates and feature counts per scale setting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .config import PipelineConfig
from .fast import build_lut, detect_crf
from .image import build_pyramid
from .pyca import CellConfig, Keypoint, project_to_native, run_pipeline
from .scene import SyntheticScene, generate_scene, rotate_scene

# -175 .. 175 in steps of 25
SWEEP_ANGLES = tuple(range(-175, 176, 25))

# single scale isolates the corner rule; the 5x5 NMS merges corner clusters split across cells
EVAL_CONFIG = PipelineConfig(scales=1, cell=CellConfig(5, 5), q=5, nms_single=True)


@dataclass(frozen=True)
class RepeatabilityResult:
    angle: float
    precision: float
    recall: float
    f1: float
    match_radius: float
    n_detections: int = 0
    n_gt: int = 0
    matched: int = 0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _xy(points, zeta: float) -> np.ndarray:
    out = []
    for p in points:
        if isinstance(p, Keypoint):
            out.append(project_to_native(p, zeta))
        else:
            out.append((float(p[0]), float(p[1])))
    return np.asarray(out, dtype=np.float64).reshape(-1, 2)


def match_greedy(det: np.ndarray, gt: np.ndarray, radius: float) -> list[tuple[int, int]]:
    """One-to-one matching, closest pairs first; ties broken by (detection, gt) index."""
    if len(det) == 0 or len(gt) == 0:
        return []
    d = np.hypot(det[:, None, 0] - gt[None, :, 0], det[:, None, 1] - gt[None, :, 1])
    i, j = np.nonzero(d <= radius)
    order = np.lexsort((j, i, d[i, j]))
    used_d, used_g, pairs = set(), set(), []
    for k in order:
        a, b = int(i[k]), int(j[k])
        if a in used_d or b in used_g:
            continue
        used_d.add(a)
        used_g.add(b)
        pairs.append((a, b))
    return pairs


def repeatability(detections, gt, match_radius: float = 3.0, angle: float = 0.0,
                  zeta: float = 1.2) -> RepeatabilityResult:
    """Precision/recall/F1 of ``detections`` against ground-truth (x, y) points.

    Detections may be :class:`Keypoint` (projected to native scale) or plain
    (x, y) pairs.
    """
    if match_radius <= 0:
        raise ValueError("match_radius must be positive")
    det = _xy(detections, zeta)
    ref = _xy(gt, zeta)
    matched = len(match_greedy(det, ref, match_radius))
    p = matched / len(det) if len(det) else 0.0
    r = matched / len(ref) if len(ref) else 0.0
    return RepeatabilityResult(angle, p, r, _f1(p, r), match_radius, len(det), len(ref), matched)


def detect_scene(scene: SyntheticScene, cfg: PipelineConfig, lut=None) -> list[Keypoint]:
    pyr = build_pyramid(scene.image, cfg.zeta, cfg.scales)
    return run_pipeline(pyr, cfg.detector, cfg.cell, cfg.nms, lut=lut,
                        aggregate_single=cfg.nms_single).keypoints


def rotation_sweep(scene: SyntheticScene, detector_mode: str = "bounded",
                   angles: Iterable[float] = SWEEP_ANGLES, cfg: PipelineConfig = EVAL_CONFIG,
                   match_radius: float = 3.0) -> list[RepeatabilityResult]:
    cfg = cfg.with_mode(detector_mode)
    lut = build_lut(cfg.detector)
    out = []
    for angle in angles:
        rotated = rotate_scene(scene, angle)
        kps = detect_scene(rotated, cfg, lut)
        out.append(repeatability(kps, rotated.gt_corners, match_radius, angle, cfg.zeta))
    return out


def sweep_csv(results: Sequence[RepeatabilityResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("angle", "precision", "recall", "f1"))
    for r in results:
        writer.writerow((f"{r.angle:g}", f"{r.precision:.4f}", f"{r.recall:.4f}", f"{r.f1:.4f}"))
    return buf.getvalue()


def corpus(n_scenes: int, seed: int = 0, **kwargs) -> list[SyntheticScene]:
    """``n_scenes`` scenes with seeds seed, seed+1, ..."""
    return [generate_scene(seed + i, **kwargs) for i in range(n_scenes)]


def corpus_sweep(scenes: Sequence[SyntheticScene], detector_mode: str,
                 angles: Sequence[float] = SWEEP_ANGLES, cfg: PipelineConfig = EVAL_CONFIG,
                 match_radius: float = 3.0) -> list[RepeatabilityResult]:
    """Mean precision/recall/F1 per angle over a set of scenes."""
    per_scene = [rotation_sweep(s, detector_mode, angles, cfg, match_radius) for s in scenes]
    out = []
    for k, angle in enumerate(angles):
        rows = [res[k] for res in per_scene]
        out.append(RepeatabilityResult(
            angle,
            float(np.mean([r.precision for r in rows])),
            float(np.mean([r.recall for r in rows])),
            float(np.mean([r.f1 for r in rows])),
            match_radius,
            sum(r.n_detections for r in rows),
            sum(r.n_gt for r in rows),
            sum(r.matched for r in rows),
        ))
    return out


@dataclass(frozen=True)
class NoiseStats:
    total: int
    fired_bounded: int
    fired_classic: int

    @property
    def bounded_suppression_rate(self) -> float:
        return 1.0 - self.fired_bounded / self.total if self.total else 1.0

    @property
    def classic_false_positive_rate(self) -> float:
        return self.fired_classic / self.total if self.total else 0.0


def noise_response_stats(scenes: Iterable[SyntheticScene], eps: int = 20, pmin: int = 9,
                         pmax: int = 13) -> NoiseStats:
    """Count injected noise pixels that get a positive raw corner response under each rule."""
    base = PipelineConfig(eps=eps, pmin=pmin, pmax=pmax)
    bounded, classic = base.with_mode("bounded").detector, base.with_mode("classic").detector
    lut_b, lut_c = build_lut(bounded), build_lut(classic)
    total = fired_b = fired_c = 0
    for scene in scenes:
        crf_b = detect_crf(scene.image, bounded, lut_b).responses
        crf_c = detect_crf(scene.image, classic, lut_c).responses
        for x, y in scene.noise_points:
            xi, yi = int(round(x)), int(round(y))
            total += 1
            fired_b += int(crf_b[yi, xi] > 0)
            fired_c += int(crf_c[yi, xi] > 0)
    return NoiseStats(total, fired_b, fired_c)


@dataclass(frozen=True)
class ScaleCount:
    scales: int
    raw: int
    final: int


def feature_count_vs_scales(image, cfg: PipelineConfig, scales: Iterable[int]) -> list[ScaleCount]:
    """Culled (pre-aggregation) and final keypoint counts for each pyramid depth."""
    lut = build_lut(cfg.detector)
    out = []
    for n in scales:
        c = replace(cfg, scales=n)
        res = run_pipeline(build_pyramid(image, c.zeta, n), c.detector, c.cell, c.nms, lut=lut,
                           aggregate_single=c.nms_single)
        out.append(ScaleCount(n, res.raw_count, len(res.keypoints)))
    return out


def mean_margin(bounded: Sequence[RepeatabilityResult], classic: Sequence[RepeatabilityResult]) -> float:
    return float(np.mean([b.f1 - c.f1 for b, c in zip(bounded, classic)])) if bounded else math.nan
