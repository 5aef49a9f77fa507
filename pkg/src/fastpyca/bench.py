"""Per-stage wall-clock timing of the detection pipeline."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .fast import build_lut, detect_crf
from .image import GrayImage, build_pyramid
from .pyca import aggregate_scores, feature_cull, sparse_nms
from .ssm import BufferPool

STAGES = ("pyramid", "crf", "fc", "pfa")


@dataclass
class BenchReport:
    samples: dict[str, list[float]] = field(default_factory=lambda: {s: [] for s in STAGES})
    features: list[int] = field(default_factory=list)
    alloc_events: int = 0

    @property
    def frames(self) -> int:
        return len(self.features)

    def summary(self) -> list[tuple[str, int, float, float]]:
        """(stage, samples, median ms, p95 ms) for every stage that ran."""
        rows = []
        for stage in STAGES:
            t = self.samples[stage]
            if t:
                ms = np.asarray(t) * 1e3
                rows.append((stage, len(t), float(np.median(ms)), float(np.percentile(ms, 95))))
        return rows

    def stage_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("stage", "samples", "median_ms", "p95_ms"))
        for stage, n, med, p95 in self.summary():
            w.writerow((stage, n, f"{med:.4f}", f"{p95:.4f}"))
        return buf.getvalue()

    def frames_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("frame", "features"))
        w.writerows(enumerate(self.features))
        return buf.getvalue()


def bench_pipeline(images: Sequence[GrayImage], cfg: PipelineConfig, repeats: int = 5,
                   pool: BufferPool | None = None) -> BenchReport:
    """Run the full pipeline ``repeats`` times per image and record stage timings.

    CRF matrices are written into pooled buffers, so after the first frame at a
    given resolution no further allocations happen for them.
    """
    if repeats < 3:
        raise ValueError(f"need at least 3 repeats for a median/p95, got {repeats}")
    pool = pool or BufferPool()
    params = cfg.detector
    lut = build_lut(params)
    report = BenchReport()
    clock = time.perf_counter

    for img in images:
        for rep in range(repeats):
            t0 = clock()
            pyr = build_pyramid(img, cfg.zeta, cfg.scales)
            t1 = clock()

            crf_time = fc_time = 0.0
            per_level = []
            for n, level in enumerate(pyr.levels):
                with pool.request(f"crf{n}", level.height * level.width * 4) as handle:
                    out = handle.array(np.int32, (level.height, level.width))
                    a = clock()
                    crf = detect_crf(level, params, lut, out=out)
                    b = clock()
                    per_level.append(feature_cull(crf, cfg.cell, n))
                    c = clock()
                    del out, crf
                crf_time += b - a
                fc_time += c - b

            t2 = clock()
            if len(pyr) > 1 or cfg.nms_single:
                scores = aggregate_scores(per_level, cfg.zeta, (img.height, img.width))
                kps = sparse_nms(scores, cfg.nms)
            else:
                kps = per_level[0]
            t3 = clock()

            report.samples["pyramid"].append(t1 - t0)
            report.samples["crf"].append(crf_time)
            report.samples["fc"].append(fc_time)
            report.samples["pfa"].append(t3 - t2)
            if rep == 0:
                report.features.append(len(kps))

    report.alloc_events = pool.total_alloc_events
    return report
