"""Reconstruction quality, compressed-size accounting, rate-distortion sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import archive as _archive
from . import pipeline
from .core import ErrorBoundSpec, FieldDescriptor, SdqzError


@dataclass(frozen=True)
class QualityReport:
    rmse: float
    psnr_db: float  # inf when the reconstruction is exact
    max_abs_error: float
    value_range: float


@dataclass(frozen=True)
class SizeReport:
    original_bytes: int
    compressed_bytes: int
    n_points: int

    @property
    def compression_ratio(self) -> float:
        return self.original_bytes / self.compressed_bytes

    @property
    def bitrate(self) -> float:
        """Compressed bits per original value."""
        return 8.0 * self.compressed_bytes / self.n_points


@dataclass(frozen=True)
class RdPoint:
    """One rate-distortion sweep row; ``error`` set when the bound failed."""

    eb: float
    bitrate: float = math.nan
    cr: float = math.nan
    psnr_db: float = math.nan
    max_abs_err: float = math.nan
    n_outliers: int | None = None
    error: str | None = None


def quality(orig, recon) -> QualityReport:
    """RMSE, max error, and PSNR = 20*log10(range / RMSE) in dB.

    An exact reconstruction reports infinite PSNR; a zero-range original with
    a nonzero RMSE has no defined PSNR and raises.
    """
    a = np.asarray(orig, dtype=np.float64).ravel()
    b = np.asarray(recon, dtype=np.float64).ravel()
    if a.size != b.size:
        raise SdqzError(f"length mismatch: {a.size} vs {b.size} values")
    if a.size == 0:
        raise SdqzError("cannot score empty arrays")
    if not np.isfinite(a).all():
        raise SdqzError("original array contains nonfinite values")
    diff = a - b
    rmse = float(np.sqrt(np.mean(diff * diff)))
    max_err = float(np.max(np.abs(diff)))
    rng = float(a.max() - a.min())
    if rmse == 0.0:
        psnr = math.inf
    elif rng == 0.0:
        raise SdqzError("PSNR undefined: zero value range with nonzero error")
    else:
        psnr = 20.0 * math.log10(rng / rmse)
    return QualityReport(rmse=rmse, psnr_db=psnr, max_abs_error=max_err, value_range=rng)


def size_report(fd: FieldDescriptor, archive_bytes) -> SizeReport:
    """Compression ratio and bitrate from the whole serialized archive size."""
    compressed = len(archive_bytes) if isinstance(archive_bytes, (bytes, bytearray)) \
        else int(archive_bytes)
    if compressed <= 0:
        raise SdqzError("archive size must be positive")
    return SizeReport(original_bytes=fd.nbytes, compressed_bytes=compressed,
                      n_points=fd.n_points)


def rd_sweep(data, fd: FieldDescriptor, specs, cap: int = 1024,
             chunk_size: int | None = None, workers: int | None = None) -> list[RdPoint]:
    """Full compress/decompress/score pass per error bound, in the given order.

    A bound that cannot be applied produces a row carrying its error message;
    the sweep continues with the remaining bounds.
    """
    specs = list(specs)
    if not specs:
        raise SdqzError("sweep needs at least one error bound")
    arr = np.asarray(data)
    rows: list[RdPoint] = []
    for spec in specs:
        if not isinstance(spec, ErrorBoundSpec):
            spec = ErrorBoundSpec("abs", float(spec))
        try:
            blob = pipeline.compress(arr, fd.dims, eb=spec.magnitude, mode=spec.mode,
                                     cap=cap, chunk_size=chunk_size, workers=workers)
            ar = _archive.deserialize(blob)
            recon = pipeline.decompress_archive(ar, workers=workers)
            q = quality(arr, recon)
            s = size_report(fd, len(blob))
            rows.append(RdPoint(
                eb=ar.header.eb_resolved, bitrate=s.bitrate, cr=s.compression_ratio,
                psnr_db=q.psnr_db, max_abs_err=q.max_abs_error,
                n_outliers=ar.header.n_outliers,
            ))
        except SdqzError as exc:
            rows.append(RdPoint(eb=float(spec.magnitude), error=str(exc)))
    return rows


def sweep_csv(rows: list[RdPoint]) -> str:
    """CSV with header ``eb,bitrate,cr,psnr_db,max_abs_err,n_outliers``."""
    lines = ["eb,bitrate,cr,psnr_db,max_abs_err,n_outliers"]
    for r in rows:
        if r.error is not None:
            lines.append(f"{r.eb:.12g},nan,nan,nan,nan,nan")
        else:
            lines.append(
                f"{r.eb:.12g},{r.bitrate:.6g},{r.cr:.6g},{r.psnr_db:.6g},"
                f"{r.max_abs_err:.12g},{r.n_outliers}"
            )
    return "\n".join(lines) + "\n"
