"""End-to-end compress/decompress built from the stage modules."""

from __future__ import annotations

import numpy as np

from . import archive as _archive
from .core import ErrorBoundSpec, QuantConfig, SdqzError, describe_field, resolve_error_bound
from .dualquant import QuantOutput, compress_field, reconstruct_field
from .huffman import (DeflatedStream, build_tree, canonize, default_chunk_size,
                      deflate, encode, histogram)
from .huffman import inflate as _inflate


def compress(data, dims=None, *, eb: float, mode: str = "abs", cap: int = 1024,
             block_shape: tuple[int, ...] | None = None,
             chunk_size: int | None = None, workers: int | None = None) -> bytes:
    """Compress a 1-3D floating-point field into archive bytes.

    ``dims`` defaults to the array's own shape; flat input needs it spelled
    out.  ``eb`` is interpreted per ``mode``: an absolute bound, or a
    fraction of the field's value range.
    """
    arr = np.asarray(data)
    if dims is None:
        dims = arr.shape if arr.ndim > 1 else (arr.size,)
    fd = describe_field(arr, dims)
    if fd.rank > 3:
        raise SdqzError(f"rank {fd.rank} fields are not supported (1-3)")
    spec = ErrorBoundSpec(mode, eb)
    cfg = QuantConfig.for_rank(resolve_error_bound(spec, fd), fd.rank,
                               cap=cap, block_shape=block_shape)
    qout = compress_field(arr, fd, cfg, workers=workers)
    freq = histogram(qout.codes, cfg.cap, workers=workers)
    bitwidths = build_tree(freq)
    codebook, _ = canonize(bitwidths)
    units = encode(qout.codes, codebook)
    ds = deflate(units, chunk_size or default_chunk_size(qout.codes.size))
    return _archive.serialize(qout, ds, bitwidths, cfg, spec, fd.dtype)


def decompress_archive(ar: _archive.Archive, workers: int | None = None) -> np.ndarray:
    """Reconstruct the field held by a parsed archive, shaped, archive dtype."""
    h = ar.header
    cfg = QuantConfig(eb=h.eb_resolved, cap=h.cap,
                      block_shape=h.block_shape[:h.ndims])
    _, reverse = canonize(ar.bitwidths)
    ds = DeflatedStream(h.chunk_size, ar.chunk_bit_lengths, ar.payload)
    codes = _inflate(ds, reverse, h.n_points, workers=workers)
    qout = QuantOutput(codes=codes, outlier_indices=ar.outlier_indices,
                       outlier_values=ar.outlier_values, dims=h.field_dims, cfg=cfg)
    values = reconstruct_field(qout, cfg, workers=workers)
    return values.reshape(h.field_dims).astype(h.np_dtype)


def decompress(blob: bytes, workers: int | None = None) -> np.ndarray:
    """Parse archive bytes and reconstruct the field."""
    return decompress_archive(_archive.deserialize(blob), workers=workers)
