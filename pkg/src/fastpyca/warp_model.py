"""Thread and warp accounting for per-cell max reduction on a GPU.

Nothing here launches a kernel. The planners count how many threads and warps
each culling scheme would occupy for one cell and how many of those threads do
useful work; ``simulate_mlpt_cull`` executes the MLPT reduction order on the
CPU so the accounting can be checked against the actual culling result.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .pyca import CellConfig, Keypoint


class WarpAccountingError(ValueError):
    pass


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class GpuSpec:
    warp_size: int = 32
    block_x: int = 128

    def __post_init__(self):
        if self.warp_size < 1:
            raise ValueError("warp_size must be >= 1")
        if self.block_x < self.warp_size or self.block_x % self.warp_size:
            raise ValueError(f"block_x ({self.block_x}) must be a multiple of warp_size ({self.warp_size})")


class Scheme(str, enum.Enum):
    MLPT = "MLPT"
    LOG2 = "log2"
    NAIVE_BLOCK_PER_CELL = "naive"
    TEWA = "TEWA"


@dataclass(frozen=True)
class CullingPlan:
    scheme: Scheme
    cell: CellConfig
    n_max: int | None
    n_t: int
    threads_per_cell: int
    total_threads: int
    n_w: int
    passes: int
    eta_w: Fraction
    cells_per_warp: int = 1

    @property
    def n_ta(self) -> int:
        return self.total_threads

    @property
    def eta_w_pct(self) -> float:
        return float(self.eta_w) * 100.0


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def warp_efficiency(n_ta: int, n_w: int, gpu: GpuSpec = GpuSpec()) -> Fraction:
    """Active threads over allocated warp lanes, as an exact fraction."""
    if n_w < 1 or n_ta < 0:
        raise WarpAccountingError(f"invalid counts n_ta={n_ta}, n_w={n_w}")
    if n_ta > gpu.warp_size * n_w:
        raise WarpAccountingError(f"{n_ta} active threads do not fit in {n_w} warps of {gpu.warp_size}")
    return Fraction(n_ta, gpu.warp_size * n_w)


def mlpt_threads_per_column(cell_h: int, n_max: int) -> int:
    # written as min(1, .) in the source formula, which is always 1; max() matches the reported tables
    return max(1, _ceil_div(cell_h, n_max))


def plan_mlpt(cell: CellConfig, n_max: int, gpu: GpuSpec = GpuSpec()) -> CullingPlan:
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    n_t = mlpt_threads_per_column(cell.cell_h, n_max)
    threads = cell.cell_w * n_t
    n_w = _ceil_div(threads, gpu.warp_size)
    return CullingPlan(Scheme.MLPT, cell, n_max, n_t, threads, threads, n_w, 1,
                       warp_efficiency(threads, n_w, gpu))


def plan_log2(cell: CellConfig, gpu: GpuSpec = GpuSpec()) -> CullingPlan:
    """Tree reduction: two locations per thread, ceil(log2 c_h) passes."""
    if cell.cell_h < 2:
        raise ValueError(f"log2 reduction needs cell_h >= 2, got {cell.cell_h}")
    n_t = _ceil_div(cell.cell_h, 2)
    threads = cell.cell_w * n_t
    n_w = _ceil_div(threads, gpu.warp_size)
    passes = math.ceil(math.log2(cell.cell_h))
    return CullingPlan(Scheme.LOG2, cell, None, n_t, threads, threads, n_w, passes,
                       warp_efficiency(threads, n_w, gpu))


def plan_naive(cell: CellConfig, gpu: GpuSpec = GpuSpec()) -> CullingPlan:
    """One thread block per cell, one thread per pixel."""
    threads = cell.cell_h * cell.cell_w
    n_w = _ceil_div(threads, gpu.warp_size)
    passes = math.ceil(math.log2(threads)) if threads > 1 else 1
    return CullingPlan(Scheme.NAIVE_BLOCK_PER_CELL, cell, None, cell.cell_h, threads, threads, n_w,
                       passes, warp_efficiency(threads, n_w, gpu))


def plan_tewa(cell: CellConfig, n_max: int = 10, gpu: GpuSpec = GpuSpec()) -> CullingPlan:
    """MLPT threads per cell, with as many whole cells as fit packed into each warp.

    Cells that need more than one warp occupy ceil(threads / W) warps of
    their own; a cell needing more than ``block_x`` threads cannot be launched.
    """
    n_t = mlpt_threads_per_column(cell.cell_h, n_max)
    tpc = cell.cell_w * n_t
    if tpc > gpu.block_x:
        raise CapacityError(f"cell needs {tpc} threads, more than block.x={gpu.block_x}")
    if tpc <= gpu.warp_size:
        per_warp = gpu.warp_size // tpc
        n_ta, n_w = per_warp * tpc, 1
    else:
        per_warp = 0
        n_ta, n_w = tpc, _ceil_div(tpc, gpu.warp_size)
    return CullingPlan(Scheme.TEWA, cell, n_max, n_t, tpc, n_ta, n_w, 1,
                       warp_efficiency(n_ta, n_w, gpu), cells_per_warp=per_warp)


# ---------------------------------------------------------------------------
# Published reference rows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReferenceRow:
    scheme: Scheme
    cell_h: int
    cell_w: int
    n_max: int | None
    n_t: int | None
    threads: int
    n_w: int
    eta_pct: int | None = None


# MLPT vs log2 comparison (threads and warps for a single cell)
TABLE_I = (
    ReferenceRow(Scheme.LOG2, 20, 32, None, 10, 320, 10),
    ReferenceRow(Scheme.MLPT, 20, 32, 5, 4, 160, 5),
    ReferenceRow(Scheme.LOG2, 50, 32, None, 25, 800, 25),
    ReferenceRow(Scheme.MLPT, 50, 32, 5, 4, 320, 10),
    ReferenceRow(Scheme.LOG2, 100, 32, None, 50, 1600, 50),
    ReferenceRow(Scheme.MLPT, 100, 32, 10, 10, 320, 10),
)

# naive block-per-cell vs packed warps; threads column is N_ta
TABLE_II = (
    ReferenceRow(Scheme.NAIVE_BLOCK_PER_CELL, 3, 3, None, None, 9, 1, 28),
    ReferenceRow(Scheme.TEWA, 3, 3, 10, None, 30, 1, 94),
    ReferenceRow(Scheme.NAIVE_BLOCK_PER_CELL, 5, 5, None, None, 25, 1, 78),
    ReferenceRow(Scheme.TEWA, 5, 5, 10, None, 30, 1, 94),
    ReferenceRow(Scheme.NAIVE_BLOCK_PER_CELL, 7, 7, None, None, 49, 2, 76),
    ReferenceRow(Scheme.TEWA, 7, 7, 10, None, 28, 1, 88),
)


def plan_for(row: ReferenceRow, gpu: GpuSpec = GpuSpec()) -> CullingPlan:
    cell = CellConfig(row.cell_h, row.cell_w)
    if row.scheme is Scheme.MLPT:
        return plan_mlpt(cell, row.n_max, gpu)
    if row.scheme is Scheme.LOG2:
        return plan_log2(cell, gpu)
    if row.scheme is Scheme.TEWA:
        return plan_tewa(cell, row.n_max, gpu)
    return plan_naive(cell, gpu)


def table_plans(table: int, gpu: GpuSpec = GpuSpec()) -> list[tuple[CullingPlan, ReferenceRow]]:
    rows = {1: TABLE_I, 2: TABLE_II}[table]
    return [(plan_for(r, gpu), r) for r in rows]


def discrepancies(plan: CullingPlan, ref: ReferenceRow) -> list[str]:
    """Fields where the model disagrees with the published row (percentages compared after rounding)."""
    out = []
    if ref.n_t is not None and plan.n_t != ref.n_t:
        out.append(f"N_t model={plan.n_t} published={ref.n_t}")
    if plan.total_threads != ref.threads:
        out.append(f"threads model={plan.total_threads} published={ref.threads}")
    if plan.n_w != ref.n_w:
        out.append(f"N_w model={plan.n_w} published={ref.n_w}")
    if ref.eta_pct is not None and abs(plan.eta_w_pct - ref.eta_pct) > 1.0:
        out.append(f"eta_w model={plan.eta_w_pct:.2f}% published={ref.eta_pct}%")
    return out


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

COLUMNS = ("scheme", "c_h", "c_w", "N_max", "N_t", "threads", "N_w", "passes", "eta_w_exact", "eta_w_pct")
REFERENCE_COLUMNS = ("published_N_t", "published_threads", "published_N_w", "published_eta_pct", "discrepancy")


def _plan_row(p: CullingPlan) -> list:
    return [p.scheme.value, p.cell.cell_h, p.cell.cell_w, "" if p.n_max is None else p.n_max,
            p.n_t, p.total_threads, p.n_w, p.passes, str(p.eta_w), f"{p.eta_w_pct:.2f}"]


def _ref_row(p: CullingPlan, r: ReferenceRow) -> list:
    blank = lambda v: "" if v is None else v  # noqa: E731
    return [blank(r.n_t), r.threads, r.n_w, blank(r.eta_pct), "; ".join(discrepancies(p, r))]


def report(plans: Sequence[CullingPlan], references: Sequence[ReferenceRow] | None = None) -> tuple[str, str]:
    """Render plans as an aligned text table and as CSV.

    When ``references`` is given (one per plan) the published figures are
    appended along with a description of any mismatch.
    """
    if references is not None and len(references) != len(plans):
        raise ValueError("need exactly one reference row per plan")
    header = list(COLUMNS) + (list(REFERENCE_COLUMNS) if references is not None else [])
    rows = []
    for i, p in enumerate(plans):
        row = _plan_row(p)
        if references is not None:
            row += _ref_row(p, references[i])
        rows.append([str(v) for v in row])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)

    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines) + "\n", buf.getvalue()


# ---------------------------------------------------------------------------
# CPU execution of the MLPT reduction order
# ---------------------------------------------------------------------------

def _better(a, b):
    """Pick the stronger (value, y, x) candidate; ties go to the smaller (y, x)."""
    if a is None:
        return b
    if b is None:
        return a
    if b[0] > a[0] or (b[0] == a[0] and (b[1], b[2]) < (a[1], a[2])):
        return b
    return a


def mlpt_reduce_cell(cell: np.ndarray, n_max: int, y0: int = 0, x0: int = 0):
    """Reduce one cell the way the MLPT kernel would, returning (value, y, x) or None.

    Vertical pass: each column is split into chunks of ``n_max`` rows, one
    thread per chunk writes its partial maximum to scratch, and the column's
    first thread combines them. Horizontal pass: ceil(c_w / n_max) threads walk
    the column maxima at a stride equal to the thread count, then thread 0
    combines their partials.
    """
    ch, cw = cell.shape
    n_t = mlpt_threads_per_column(ch, n_max)

    scratch = [[None] * cw for _ in range(n_t)]
    for t in range(n_t):
        for j in range(cw):
            best = None
            for i in range(t * n_max, min((t + 1) * n_max, ch)):
                best = _better(best, (int(cell[i, j]), y0 + i, x0 + j))
            scratch[t][j] = best

    col_max = [None] * cw
    for j in range(cw):
        for t in range(n_t):
            col_max[j] = _better(col_max[j], scratch[t][j])

    n_h = _ceil_div(cw, n_max)
    partial = [None] * n_h
    for t in range(n_h):
        for j in range(t, cw, n_h):
            partial[t] = _better(partial[t], col_max[j])
    result = None
    for p in partial:
        result = _better(result, p)
    if result is None or result[0] <= 0:
        return None
    return result


def simulate_mlpt_cull(responses: np.ndarray, cfg: CellConfig, n_max: int, level: int = 0) -> list[Keypoint]:
    resp = np.asarray(responses)
    h, w = resp.shape
    out = []
    for y0 in range(0, h, cfg.cell_h):
        for x0 in range(0, w, cfg.cell_w):
            cell = resp[y0:y0 + cfg.cell_h, x0:x0 + cfg.cell_w]
            best = mlpt_reduce_cell(cell, n_max, y0, x0)
            if best is not None:
                out.append(Keypoint(level, best[1], best[2], best[0]))
    return out
