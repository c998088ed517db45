"""RGB rasters and the channel-unrolled plane-matrix layout.

A message image of ``m`` pixel rows and ``n`` columns is handled in two
shapes: the decoded raster (``m x n`` pixels, three 8-bit channels each)
and the plane matrix, a ``3m x n`` uint8 matrix where pixel row ``i``
occupies three consecutive rows holding its R, G and B values. All
compression machinery downstream works on plane matrices.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError

# Lossless formats only: LSB payloads do not survive lossy re-encoding.
SUPPORTED_FORMATS = {"PNG", "BMP"}

_SUFFIX_TO_FORMAT = {".png": "PNG", ".bmp": "BMP"}

# PIL modes we can faithfully reduce to 8-bit RGB.
_CONVERTIBLE_MODES = {"1", "L", "LA", "P", "RGB", "RGBA"}


@dataclass(frozen=True)
class RgbRaster:
    """Immutable 8-bit RGB image: ``pixels`` has shape (height, width, 3)."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"empty raster {self.width}x{self.height}")
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_pixels(cls, pixels: np.ndarray) -> "RgbRaster":
        pixels = np.asarray(pixels, dtype=np.uint8)
        return cls(width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)

    @property
    def channels(self) -> np.ndarray:
        """Flat channel sequence in raster order: R,G,B per pixel, row-major."""
        return self.pixels.reshape(-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RgbRaster):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.pixels, other.pixels))

    __hash__ = None  # type: ignore[assignment]


def load_image(path) -> RgbRaster:
    """Decode a PNG or BMP file into an RgbRaster.

    Grayscale images are expanded by channel replication; an alpha channel
    is dropped. Anything that is not an 8-bit PNG/BMP is rejected.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in SUPPORTED_FORMATS:
                raise ImageFormatError(
                    f"{path}: unsupported format {im.format!r} (PNG or BMP required)"
                )
            if im.mode not in _CONVERTIBLE_MODES:
                raise ImageFormatError(
                    f"{path}: unsupported pixel mode {im.mode!r} (8-bit only)"
                )
            rgb = im.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a decodable image: {exc}") from exc
    return RgbRaster.from_pixels(pixels)


def save_image(raster: RgbRaster, path) -> None:
    """Write ``raster`` losslessly; the suffix picks PNG or BMP.

    The file is written to a temporary sibling and renamed into place, so a
    failed save never leaves a partial file at ``path``.
    """
    path = Path(path)
    fmt = _SUFFIX_TO_FORMAT.get(path.suffix.lower())
    if fmt is None:
        raise ImageFormatError(
            f"{path}: unsupported suffix {path.suffix!r} (use .png or .bmp)"
        )
    im = Image.fromarray(np.asarray(raster.pixels), mode="RGB")
    tmp = path.parent / f".{path.name}.{os.getpid()}.tmp"
    try:
        with open(tmp, "wb") as fh:
            im.save(fh, format=fmt)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def to_plane_matrix(raster: RgbRaster) -> np.ndarray:
    """Unroll a raster into the 3m x n plane matrix.

    Pixel row i (0-based) becomes rows 3i (R), 3i+1 (G), 3i+2 (B).
    """
    return np.ascontiguousarray(
        raster.pixels.transpose(0, 2, 1).reshape(3 * raster.height, raster.width)
    )


def from_plane_matrix(matrix: np.ndarray) -> RgbRaster:
    """Exact inverse of :func:`to_plane_matrix`."""
    matrix = np.asarray(matrix, dtype=np.uint8)
    if matrix.ndim != 2:
        raise ValueError(f"plane matrix must be 2-D, got shape {matrix.shape}")
    rows, cols = matrix.shape
    if rows % 3 != 0:
        raise ValueError(f"plane matrix row count {rows} not divisible by 3")
    pixels = matrix.reshape(rows // 3, 3, cols).transpose(0, 2, 1)
    return RgbRaster.from_pixels(pixels)
