"""Self-describing binary container for one compressed field.

Layout (little-endian, no padding between fields or sections):

    header     magic "SDQZ" | version u8 | dtype u8 (0=f32, 1=f64) |
               ndims u8 | eb_mode u8 (0=abs, 1=valrel) | dims 3*u64 |
               eb_resolved f64 | eb_specified f64 | cap u32 |
               block_shape 3*u32 | deflate_chunk_size u32 | unit_width u8 |
               n_outliers u64 | n_chunks u64 | payload_bytes u64
    sections   bitwidth table (cap * u8)
               outliers (n_outliers * { index u64, prequant value f64 })
               chunk bit lengths (n_chunks * u32)
               payload bytes

Unused trailing dims/block extents are stored as 1.  Only the per-symbol
bitwidths are persisted: the canonical codebook is rebuilt from them on
decode, bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import ErrorBoundSpec, QuantConfig, SdqzError
from .dualquant import QuantOutput
from .huffman import DeflatedStream, select_unit_width

MAGIC = b"SDQZ"
VERSION = 1

_HEADER = struct.Struct("<4s4B3Q2d5IB3Q")
HEADER_SIZE = _HEADER.size  # 93

_EB_MODES = {"abs": 0, "valrel": 1}
_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

_OUTLIER_DTYPE = np.dtype([("index", "<u8"), ("value", "<f8")])


class ArchiveFormatError(SdqzError):
    """The byte stream is not a valid archive."""


@dataclass(frozen=True)
class ArchiveHeader:
    dtype_code: int
    ndims: int
    eb_mode: int
    dims: tuple[int, int, int]
    eb_resolved: float
    eb_specified: float
    cap: int
    block_shape: tuple[int, int, int]
    chunk_size: int
    unit_width: int
    n_outliers: int
    n_chunks: int
    payload_bytes: int

    @property
    def field_dims(self) -> tuple[int, ...]:
        return self.dims[: self.ndims]

    @property
    def n_points(self) -> int:
        n = 1
        for d in self.field_dims:
            n *= d
        return n

    @property
    def np_dtype(self) -> np.dtype:
        return _CODE_DTYPES[self.dtype_code]

    @property
    def total_bytes(self) -> int:
        """Full archive size implied by the header."""
        return (HEADER_SIZE + self.cap + 16 * self.n_outliers
                + 4 * self.n_chunks + self.payload_bytes)


@dataclass
class Archive:
    header: ArchiveHeader
    bitwidths: np.ndarray         # uint8, length cap
    outlier_indices: np.ndarray   # uint64
    outlier_values: np.ndarray    # float64
    chunk_bit_lengths: np.ndarray  # uint32
    payload: bytes


def serialize(qout: QuantOutput, ds: DeflatedStream, bitwidths, cfg: QuantConfig,
              eb_spec: ErrorBoundSpec, dtype) -> bytes:
    """Assemble the archive bytes; identical inputs give identical bytes."""
    dtype = np.dtype(dtype).newbyteorder("<")
    if dtype not in _DTYPE_CODES:
        raise SdqzError(f"unsupported dtype {dtype} (float32/float64 only)")
    bw = np.ascontiguousarray(np.asarray(bitwidths, dtype=np.uint8))
    if bw.size != cfg.cap:
        raise SdqzError(f"bitwidth table has {bw.size} entries, cap is {cfg.cap}")
    n = qout.codes.size
    n_chunks = int(ds.chunk_bit_lengths.size)
    if n_chunks != -(-n // ds.chunk_size):
        raise SdqzError(
            f"{n_chunks} chunks inconsistent with {n} codes at chunk size {ds.chunk_size}"
        )
    expect_payload = int(((ds.chunk_bit_lengths.astype(np.int64) + 7) >> 3).sum())
    if expect_payload != len(ds.payload):
        raise SdqzError(
            f"payload is {len(ds.payload)} bytes, chunk lengths require {expect_payload}"
        )
    ndims = len(qout.dims)
    if not 1 <= ndims <= 3:
        raise SdqzError(f"archives hold rank 1-3 fields, got rank {ndims}")

    dims3 = tuple(qout.dims) + (1,) * (3 - ndims)
    bs3 = tuple(cfg.block_shape) + (1,) * (3 - ndims)
    max_bw = int(bw.max()) if bw.any() else 0
    if max_bw == 0:
        raise SdqzError("bitwidth table has no present symbols")
    header = _HEADER.pack(
        MAGIC, VERSION, _DTYPE_CODES[dtype], ndims, _EB_MODES[eb_spec.mode],
        *dims3, cfg.eb, eb_spec.magnitude, cfg.cap, *bs3,
        ds.chunk_size, select_unit_width(max_bw),
        qout.n_outliers, n_chunks, len(ds.payload),
    )
    outliers = np.empty(qout.n_outliers, dtype=_OUTLIER_DTYPE)
    outliers["index"] = qout.outlier_indices
    outliers["value"] = qout.outlier_values
    return b"".join((
        header,
        bw.tobytes(),
        outliers.tobytes(),
        np.ascontiguousarray(ds.chunk_bit_lengths, dtype="<u4").tobytes(),
        ds.payload,
    ))


def parse_header(buf: bytes, offset: int = 0) -> ArchiveHeader:
    """Decode and validate the fixed-size header at ``offset``."""
    if len(buf) - offset < HEADER_SIZE:
        raise ArchiveFormatError(
            f"short read: {len(buf) - offset} bytes, header needs {HEADER_SIZE}"
        )
    fields = _HEADER.unpack_from(buf, offset)
    (magic, version, dtype_code, ndims, eb_mode,
     d0, d1, d2, eb_resolved, eb_specified, cap,
     b0, b1, b2, chunk_size, unit_width,
     n_outliers, n_chunks, payload_bytes) = fields
    if magic != MAGIC:
        raise ArchiveFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise ArchiveFormatError(f"unsupported dtype code {dtype_code}")
    if not 1 <= ndims <= 3:
        raise ArchiveFormatError(f"unsupported rank {ndims}")
    if eb_mode not in (0, 1):
        raise ArchiveFormatError(f"unknown error-bound mode {eb_mode}")
    if unit_width not in (32, 64):
        raise ArchiveFormatError(f"unsupported unit width {unit_width}")
    header = ArchiveHeader(
        dtype_code=dtype_code, ndims=ndims, eb_mode=eb_mode,
        dims=(d0, d1, d2), eb_resolved=eb_resolved, eb_specified=eb_specified,
        cap=cap, block_shape=(b0, b1, b2), chunk_size=chunk_size,
        unit_width=unit_width, n_outliers=n_outliers, n_chunks=n_chunks,
        payload_bytes=payload_bytes,
    )
    if header.n_points <= 0:
        raise ArchiveFormatError("dims product must be positive")
    if cap < 4 or cap > 65536 or cap & (cap - 1):
        raise ArchiveFormatError(f"cap {cap} is not a power of two in [4, 65536]")
    if not (eb_resolved > 0):
        raise ArchiveFormatError("resolved error bound must be positive")
    if chunk_size < 1:
        raise ArchiveFormatError("chunk size must be >= 1")
    return header


def deserialize(buf: bytes) -> Archive:
    """Parse and validate one whole archive; rejects trailing bytes."""
    h = parse_header(buf)
    if len(buf) < h.total_bytes:
        raise ArchiveFormatError(
            f"short read: {len(buf)} bytes, header promises {h.total_bytes}"
        )
    if len(buf) > h.total_bytes:
        raise ArchiveFormatError(
            f"{len(buf) - h.total_bytes} trailing bytes after the archive"
        )
    off = HEADER_SIZE
    bw = np.frombuffer(buf, dtype=np.uint8, count=h.cap, offset=off)
    off += h.cap
    outliers = np.frombuffer(buf, dtype=_OUTLIER_DTYPE, count=h.n_outliers, offset=off)
    off += 16 * h.n_outliers
    chunk_bits = np.frombuffer(buf, dtype="<u4", count=h.n_chunks, offset=off)
    off += 4 * h.n_chunks
    payload = buf[off:off + h.payload_bytes]

    widths = bw[bw > 0].astype(np.int64)
    if widths.size == 0:
        raise ArchiveFormatError("bitwidth table has no present symbols")
    max_bw = int(widths.max())
    if max_bw > 64 - 8:
        raise ArchiveFormatError(f"bitwidth {max_bw} exceeds the supported maximum")
    if widths.size >= 2:
        kraft = int(sum(int(c) << (max_bw - b)
                        for b, c in enumerate(np.bincount(widths).tolist()) if b))
        if kraft != 1 << max_bw:
            raise ArchiveFormatError("bitwidth table violates Kraft equality")
    if select_unit_width(max_bw) != h.unit_width:
        raise ArchiveFormatError(
            f"unit width {h.unit_width} disagrees with maximum bitwidth {max_bw}"
        )

    idx = outliers["index"].astype(np.uint64)
    if idx.size:
        if int(idx.max()) >= h.n_points:
            raise ArchiveFormatError("outlier index out of range")
        if np.any(np.diff(idx.astype(np.int64)) <= 0):
            raise ArchiveFormatError("outlier indices not strictly ascending")

    expect_payload = int(((chunk_bits.astype(np.int64) + 7) >> 3).sum())
    if expect_payload != h.payload_bytes:
        raise ArchiveFormatError(
            f"payload of {h.payload_bytes} bytes disagrees with chunk bit lengths "
            f"({expect_payload} bytes)"
        )
    if h.n_chunks != -(-h.n_points // h.chunk_size):
        raise ArchiveFormatError(
            f"{h.n_chunks} chunks inconsistent with {h.n_points} points "
            f"at chunk size {h.chunk_size}"
        )

    return Archive(
        header=h,
        bitwidths=bw.copy(),
        outlier_indices=idx,
        outlier_values=outliers["value"].astype(np.float64),
        chunk_bit_lengths=chunk_bits.astype(np.uint32),
        payload=bytes(payload),
    )
