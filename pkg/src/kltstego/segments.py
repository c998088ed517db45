"""Fixed-height row-band segmentation of the plane matrix.

A segment covers ``s`` consecutive message pixel rows, i.e. ``3s`` plane
rows. Segments are independent of each other, so each one is compressed
on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Segment:
    """One 3s x n band of the (padded) plane matrix."""

    index: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.uint8)
        if data.ndim != 2 or data.shape[0] % 3 != 0 or data.shape[0] == 0:
            raise ValueError(f"segment data shape {data.shape} is not 3s x n")
        if self.index < 0:
            raise ValueError(f"negative segment index {self.index}")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Segment):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.data, other.data)

    __hash__ = None  # type: ignore[assignment]


def pad_rows(matrix: np.ndarray, s: int) -> tuple[np.ndarray, int]:
    """Pad the plane matrix so its pixel-row count is a multiple of ``s``.

    Padding replicates the last true pixel row (its R, G, B plane rows are
    copied as a unit), which keeps the padded band statistically close to
    real content instead of injecting a black border. Returns the padded
    matrix and the original pixel-row count, which the payload header
    records so the decoder can truncate.
    """
    if s < 1:
        raise ValueError(f"segment row count must be >= 1, got {s}")
    matrix = np.asarray(matrix, dtype=np.uint8)
    rows = matrix.shape[0]
    if rows % 3 != 0 or rows == 0:
        raise ValueError(f"plane matrix row count {rows} not a positive multiple of 3")
    m = rows // 3
    target_m = math.ceil(m / s) * s
    if target_m == m:
        return matrix, m
    last_pixel_row = matrix[3 * (m - 1): 3 * m, :]
    padding = np.tile(last_pixel_row, (target_m - m, 1))
    return np.vstack([matrix, padding]), m


def split_segments(matrix: np.ndarray, s: int) -> list[Segment]:
    """Cut the padded plane matrix into ceil(m/s) segments of 3s rows each."""
    if s < 1:
        raise ValueError(f"segment row count must be >= 1, got {s}")
    matrix = np.asarray(matrix, dtype=np.uint8)
    rows = matrix.shape[0]
    band = 3 * s
    if rows == 0 or rows % band != 0:
        raise ValueError(
            f"plane matrix row count {rows} not divisible by 3s = {band}; pad first"
        )
    return [
        Segment(index=i, data=matrix[i * band:(i + 1) * band, :])
        for i in range(rows // band)
    ]


def join_segments(segments: list[Segment], original_m: int) -> np.ndarray:
    """Concatenate segments top-to-bottom and drop the padding rows."""
    if not segments:
        raise ValueError("no segments to join")
    shape = segments[0].data.shape
    for pos, seg in enumerate(segments):
        if seg.index != pos:
            raise ValueError(f"segment index {seg.index} at position {pos}; "
                             "segments must be consecutive from 0")
        if seg.data.shape != shape:
            raise ValueError(f"segment {pos} shape {seg.data.shape} != {shape}")
    if original_m < 1 or 3 * original_m > shape[0] * len(segments):
        raise ValueError(f"original row count {original_m} out of range")
    stacked = np.vstack([seg.data for seg in segments])
    return stacked[: 3 * original_m, :]
