"""Per-segment KLT codec: statistics, Jacobi eigensolver, quantization.

Encoding a 3s x n segment (M = 3s):

1. column statistics: mean vector (length M) and M x M covariance with a
   1/n divisor;
2. eigendecomposition of the covariance by cyclic Jacobi rotations,
   eigenvalues sorted descending;
3. rank selection: an explicit k, or the smallest k capturing a target
   fraction of the eigenvalue energy;
4. projection P = Vk' (A - mean) onto the leading k eigenvectors;
5. quantization: P to 8 bits against its min/max (stored as float32),
   the basis to int16 via a 32767 scale, the mean to 16-bit 8.8
   fixed point.

Decoding reverses the linear maps and rounds back to uint8. All rounding
is half-away-from-zero so encoders on any platform produce bit-identical
codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConvergenceError

BASIS_SCALE = 32767          # int16 full scale for unit-norm basis entries
MEAN_SCALE = 256             # 8.8 fixed point for the segment mean
PROJ_LEVELS = 255            # projection is normalized onto [0, 255]

_JACOBI_MAX_SWEEPS = 100
_JACOBI_REL_TOL = 1e-10      # off-diagonal Frobenius norm vs input norm


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round halves away from zero (0.5 -> 1, -0.5 -> -1), elementwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class SegmentStats:
    """Column mean and covariance of one segment."""

    mean: np.ndarray        # (M,) float64
    covariance: np.ndarray  # (M, M) float64, exactly symmetric


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray  # (M,) float64
    basis: np.ndarray        # (M, M) float64, eigenvectors as columns


@dataclass(frozen=True, eq=False)
class SegmentCode:
    """Quantized form of one segment: everything the decoder needs."""

    k: int
    mean_q: np.ndarray    # (M,) uint16, 8.8 fixed point
    min_p: float          # float32-exact projection minimum
    max_p: float          # float32-exact projection maximum
    basis_q: np.ndarray   # (M, k) int16
    proj_q: np.ndarray    # (k, n) uint8

    def __post_init__(self):
        mean_q = np.asarray(self.mean_q, dtype=np.uint16)
        basis_q = np.asarray(self.basis_q, dtype=np.int16)
        proj_q = np.asarray(self.proj_q, dtype=np.uint8)
        m = mean_q.shape[0]
        if basis_q.shape != (m, self.k):
            raise ValueError(f"basis shape {basis_q.shape} != ({m}, {self.k})")
        if proj_q.ndim != 2 or proj_q.shape[0] != self.k:
            raise ValueError(f"projection shape {proj_q.shape} has wrong rank")
        if not 1 <= self.k <= m:
            raise ValueError(f"rank {self.k} outside [1, {m}]")
        if np.any(basis_q == np.iinfo(np.int16).min):
            raise ValueError("basis entry magnitude exceeds 32767")
        if not self.min_p <= self.max_p:  # also rejects NaN
            raise ValueError(f"min_p {self.min_p} > max_p {self.max_p}")
        for name, value in (("min_p", self.min_p), ("max_p", self.max_p)):
            if float(np.float32(value)) != value:
                raise ValueError(f"{name} {value!r} is not float32-exact")
        for field, arr in (("mean_q", mean_q), ("basis_q", basis_q), ("proj_q", proj_q)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)

    @property
    def rows(self) -> int:
        """Segment plane-row count M = 3s."""
        return self.mean_q.shape[0]

    @property
    def cols(self) -> int:
        return self.proj_q.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegmentCode):
            return NotImplemented
        return (self.k == other.k
                and self.min_p == other.min_p
                and self.max_p == other.max_p
                and np.array_equal(self.mean_q, other.mean_q)
                and np.array_equal(self.basis_q, other.basis_q)
                and np.array_equal(self.proj_q, other.proj_q))


def segment_stats(segment: np.ndarray) -> SegmentStats:
    """Mean and covariance of the segment's columns (1/n divisor).

    The n columns are the sample vectors; the covariance is symmetrized
    explicitly so downstream rotations see an exactly symmetric matrix.
    """
    data = np.asarray(segment, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 1:
        raise ValueError(f"segment shape {data.shape} is not M x n with n >= 1")
    n = data.shape[1]
    mean = data.mean(axis=1)
    centered = data - mean[:, None]
    cov = (centered @ centered.T) / n
    cov = (cov + cov.T) / 2.0
    return SegmentStats(mean=mean, covariance=cov)


@numba.njit(cache=True)
def _jacobi_sweeps(a, v, tol_off, max_sweeps):  # pragma: no cover - compiled
    m = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(m - 1):
            for q in range(p + 1, m):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) <= tol_off:
            return sweep
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(m):  # columns p, q of A (A <- A J)
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(m):  # rows p, q of A (A <- J' A)
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = c * api - s * aqi
                    a[q, i] = s * api + c * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(m):  # accumulate V <- V J
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    off = 0.0
    for p in range(m - 1):
        for q in range(p + 1, m):
            off += 2.0 * a[p, q] * a[p, q]
    if math.sqrt(off) <= tol_off:
        return max_sweeps
    return -1


def jacobi_eigen(covariance: np.ndarray) -> EigenSystem:
    """Diagonalize a symmetric matrix with cyclic-by-row Jacobi rotations.

    Convergence: off-diagonal Frobenius norm <= 1e-10 times the input
    Frobenius norm, within 100 sweeps; a rotation is applied whenever the
    pivot is nonzero. Failure to converge signals a non-symmetric or
    pathological input. Eigenvalues come back descending (stable ties) and
    each eigenvector column is oriented so its largest-magnitude entry
    (lowest index on ties) is nonnegative, which makes the decomposition
    bit-deterministic.
    """
    a = np.array(covariance, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"matrix shape {a.shape} is not square")
    m = a.shape[0]
    v = np.eye(m)
    tol = _JACOBI_REL_TOL * float(np.linalg.norm(a))
    sweeps = _jacobi_sweeps(a, v, tol, _JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi did not converge in {_JACOBI_MAX_SWEEPS} sweeps; "
            "input is likely not symmetric"
        )
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    anchor = np.argmax(np.abs(v), axis=0)
    flip = v[anchor, np.arange(m)] < 0.0
    v[:, flip] *= -1.0
    return EigenSystem(eigenvalues=lam, basis=v)


def select_rank(eigenvalues: np.ndarray, *, rank: int | None = None,
                tau: float | None = None) -> int:
    """Pick the retained rank.

    Exactly one policy applies: an explicit ``rank`` (capped at M), or the
    smallest k whose leading eigenvalues hold at least fraction ``tau`` of
    the total energy. Tiny negative eigenvalues are treated as zero; if all
    energy is zero the rank degenerates to 1.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    m = lam.shape[0]
    if (rank is None) == (tau is None):
        raise ValueError("exactly one of rank= or tau= must be given")
    if rank is not None:
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        return min(rank, m)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"energy fraction must be in (0, 1], got {tau}")
    cum = np.cumsum(np.clip(lam, 0.0, None))
    total = cum[-1]
    if total <= 0.0:
        return 1
    return int(np.searchsorted(cum, tau * total, side="left")) + 1


def project(segment: np.ndarray, eigen: EigenSystem, mean: np.ndarray,
            k: int) -> np.ndarray:
    """Coordinates of the mean-centered columns in the leading-k eigenbasis."""
    data = np.asarray(segment, dtype=np.float64)
    basis_k = eigen.basis[:, :k]
    return basis_k.T @ (data - np.asarray(mean, dtype=np.float64)[:, None])


def quantize_projection(p: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Map the projection linearly onto 8-bit levels.

    The stored extrema are float32 (that is how the wire carries them), so
    quantization is performed against the float32-rounded values to keep
    encode and decode consistent. A constant projection collapses to all
    zeros with min == max.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty projection")
    min_p = float(np.float32(p.min()))
    max_p = float(np.float32(p.max()))
    if max_p == min_p:
        return np.zeros(p.shape, dtype=np.uint8), min_p, max_p
    levels = round_half_away((p - min_p) / (max_p - min_p) * PROJ_LEVELS)
    return np.clip(levels, 0, PROJ_LEVELS).astype(np.uint8), min_p, max_p


def quantize_basis(basis_k: np.ndarray) -> np.ndarray:
    """Scale unit-norm basis entries by 32767 and round to int16."""
    basis_k = np.asarray(basis_k, dtype=np.float64)
    limit = np.max(np.abs(basis_k)) if basis_k.size else 0.0
    if limit > 1.0 + 1e-9:
        raise ValueError(f"basis entry magnitude {limit} > 1; basis not orthonormal")
    return round_half_away(basis_k * BASIS_SCALE).astype(np.int16)


def quantize_mean(mean: np.ndarray) -> np.ndarray:
    """Mean vector to 16-bit 8.8 fixed point ([0, 255] with 1/256 steps)."""
    mean = np.asarray(mean, dtype=np.float64)
    if np.any(mean < 0.0) or np.any(mean > 255.0):
        raise ValueError("mean outside [0, 255]")
    return round_half_away(mean * MEAN_SCALE).astype(np.uint16)


def dequantize(code: SegmentCode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Invert the three quantizers: returns (projection, basis, mean)."""
    span = code.max_p - code.min_p
    proj = code.proj_q.astype(np.float64) * (span / PROJ_LEVELS) + code.min_p
    basis = code.basis_q.astype(np.float64) / BASIS_SCALE
    mean = code.mean_q.astype(np.float64) / MEAN_SCALE
    return proj, basis, mean


def reconstruct_segment(code: SegmentCode) -> np.ndarray:
    """Approximate the original 3s x n segment from its code."""
    proj, basis, mean = dequantize(code)
    real = basis @ proj + mean[:, None]
    return np.clip(round_half_away(real), 0, 255).astype(np.uint8)


def encode_segment(segment: np.ndarray, *, rank: int | None = None,
                   tau: float | None = None) -> SegmentCode:
    """Full encode chain for one segment: stats, eigen, rank, quantize."""
    stats = segment_stats(segment)
    eigen = jacobi_eigen(stats.covariance)
    k = select_rank(eigen.eigenvalues, rank=rank, tau=tau)
    p = project(segment, eigen, stats.mean, k)
    proj_q, min_p, max_p = quantize_projection(p)
    return SegmentCode(
        k=k,
        mean_q=quantize_mean(stats.mean),
        min_p=min_p,
        max_p=max_p,
        basis_q=quantize_basis(eigen.basis[:, :k]),
        proj_q=proj_q,
    )


def compression_rate(k_total: int, s: int, n: int, num_segments: int,
                     original_m: int | None = None) -> tuple[float, float]:
    """Compression rates for a whole message.

    ``paper_rate`` is the 4k/3s byte-count argument with k averaged over
    segments: stored reals at 4 bytes each versus 3s raw bytes per column.
    ``byte_rate`` is exact: serialized payload bytes (header, per-segment
    rank/mean/extrema, basis, projection) divided by the raw message size
    3*m*n; ``original_m`` defaults to the padded row count s*num_segments.
    """
    if min(k_total, s, n, num_segments) < 1:
        raise ValueError("all arguments must be positive")
    from .payload import stream_bit_length  # runtime import avoids a cycle

    paper_rate = 4.0 * (k_total / num_segments) / (3.0 * s)
    m = s * num_segments if original_m is None else original_m
    avg_k, rem = divmod(k_total, num_segments)
    ks = [avg_k + (1 if i < rem else 0) for i in range(num_segments)]
    payload_bytes = stream_bit_length(n, s, ks) / 8.0
    byte_rate = payload_bytes / (3.0 * m * n)
    return paper_rate, byte_rate
