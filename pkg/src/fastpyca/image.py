"""Grayscale rasters, PGM I/O and multiscale pyramids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# Smallest window a radius-3 Bresenham circle fits in.
MIN_SIDE = 7


class PgmError(ValueError):
    """Malformed PGM payload. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PyramidConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel image, stored row-major as an (H, W) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_bytes(cls, width: int, height: int, data) -> GrayImage:
        buf = np.frombuffer(bytes(data), dtype=np.uint8)
        if buf.size != width * height:
            raise ValueError(f"data length {buf.size} != {width}x{height}")
        return cls(buf.reshape(height, width).copy())

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def check_min_size(img: GrayImage) -> None:
    if img.width < MIN_SIDE or img.height < MIN_SIDE:
        raise ValueError(f"image {img.width}x{img.height} is smaller than {MIN_SIDE}x{MIN_SIDE}")


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

_WS = b" \t\r\n\v\f"


def _header_tokens(payload: bytes, count: int, start: int):
    """Read ``count`` whitespace-separated ASCII integers, skipping ``#`` comments.

    Returns the tokens with their offsets, and the offset just past the last one.
    """
    pos = start
    out = []
    n = len(payload)
    while len(out) < count:
        while pos < n and payload[pos] in _WS:
            pos += 1
        if pos < n and payload[pos] == ord("#"):
            while pos < n and payload[pos] not in b"\r\n":
                pos += 1
            continue
        if pos >= n:
            raise PgmError("unexpected end of header", pos)
        tok_start = pos
        while pos < n and payload[pos] not in _WS and payload[pos] != ord("#"):
            pos += 1
        tok = payload[tok_start:pos]
        if not tok.isdigit():
            raise PgmError(f"expected an unsigned integer, got {tok[:16]!r}", tok_start)
        out.append((int(tok), tok_start))
    return out, pos


def load_pgm(payload: bytes) -> GrayImage:
    """Decode a binary (P5) or ASCII (P2) PGM with maxval <= 255.

    Pixel values are returned as stored; no rescaling to 255 is applied.
    """
    payload = bytes(payload)
    if len(payload) < 2:
        raise PgmError("payload too short for a magic number", len(payload))
    magic = payload[:2]
    if magic not in (b"P5", b"P2"):
        raise PgmError(f"unsupported magic {magic!r}", 0)

    tokens, pos = _header_tokens(payload, 3, 2)
    (w, w_off), (h, h_off), (maxval, m_off) = tokens
    if w == 0:
        raise PgmError("width must be positive", w_off)
    if h == 0:
        raise PgmError("height must be positive", h_off)
    if maxval == 0 or maxval > 255:
        raise PgmError(f"maxval {maxval} not in [1, 255]", m_off)
    n = w * h

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(payload) or payload[pos] not in _WS:
            raise PgmError("missing whitespace after maxval", pos)
        start = pos + 1
        raster = payload[start:start + n]
        if len(raster) < n:
            raise PgmError(f"truncated raster: expected {n} bytes, got {len(raster)}", start + len(raster))
        values = np.frombuffer(raster, dtype=np.uint8)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise PgmError(f"pixel value {values[bad[0]]} exceeds maxval {maxval}", start + int(bad[0]))
        return GrayImage(values.reshape(h, w).copy())

    vals = []
    for _ in range(n):
        try:
            tokens, pos = _header_tokens(payload, 1, pos)
        except PgmError as exc:
            if "end of header" in str(exc):
                raise PgmError(f"truncated raster: expected {n} samples, got {len(vals)}", exc.offset) from None
            raise
        v, off = tokens[0]
        if v > maxval:
            raise PgmError(f"pixel value {v} exceeds maxval {maxval}", off)
        vals.append(v)
    return GrayImage(np.asarray(vals, dtype=np.uint8).reshape(h, w))


def encode_pgm(img: GrayImage, binary: bool = True) -> bytes:
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n255\n".encode("ascii")
    if binary:
        return header + img.pixels.tobytes()
    rows = (" ".join(str(int(v)) for v in row) for row in img.pixels)
    return header + ("\n".join(rows) + "\n").encode("ascii")


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path, img: GrayImage, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img, binary))


# ---------------------------------------------------------------------------
# Pyramid
# ---------------------------------------------------------------------------

def level_shape(height: int, width: int, zeta: float, n: int) -> tuple[int, int]:
    """(H, W) of level ``n``: floor(native / zeta**n), always from the native size."""
    s = zeta ** n
    # guard against 299.99999999 style float results for exact divisions
    return int(math.floor(height / s + 1e-9)), int(math.floor(width / s + 1e-9))


def resample_bilinear(pixels: np.ndarray, shape: tuple[int, int], scale: float) -> np.ndarray:
    """Bilinear resample with pixel-centre alignment: src = (dst + 0.5) * scale - 0.5."""
    h, w = shape
    ys = (np.arange(h, dtype=np.float64) + 0.5) * scale - 0.5
    xs = (np.arange(w, dtype=np.float64) + 0.5) * scale - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    out = ndimage.map_coordinates(pixels.astype(np.float64), [yy, xx], order=1, mode="nearest")
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class Pyramid:
    levels: tuple[GrayImage, ...]
    scale_factor: float
    num_scales: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "num_scales", len(self.levels))

    def __getitem__(self, n: int) -> GrayImage:
        return self.levels[n]

    def __len__(self):
        return len(self.levels)

    def scale(self, n: int) -> float:
        return self.scale_factor ** n


def build_pyramid(img: GrayImage, zeta: float, num_scales: int) -> Pyramid:
    """Build ``num_scales`` levels, level n resampled from the native image by zeta**n."""
    if not zeta > 1.0:
        raise PyramidConfigError(f"scale factor must be > 1, got {zeta}")
    if num_scales < 1:
        raise PyramidConfigError(f"num_scales must be >= 1, got {num_scales}")

    shapes = [level_shape(img.height, img.width, zeta, n) for n in range(num_scales)]
    for n, (h, w) in enumerate(shapes):
        if h < MIN_SIDE or w < MIN_SIDE:
            raise PyramidConfigError(
                f"level {n} would be {w}x{h}, below the {MIN_SIDE}x{MIN_SIDE} minimum"
            )

    levels = [GrayImage(img.pixels.copy())]
    for n in range(1, num_scales):
        levels.append(GrayImage(resample_bilinear(img.pixels, shapes[n], zeta ** n)))
    return Pyramid(tuple(levels), zeta)
