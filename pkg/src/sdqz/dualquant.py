"""Lossy stage: two-phase quantization around a blockwise Lorenzo predictor.

Phase one (prequantization) snaps every value onto the lattice of multiples
of ``2*eb``; this is the only place error enters and it is bounded by ``eb``
per point.  Phase two (postquantization) predicts each lattice value from its
already-prequantized neighbors and turns the integer residual into a code in
``[1, cap)``; residuals outside the code range are captured verbatim as
outliers (code 0).  Because prediction on the encode side reads prequantized
values, not reconstructed ones, every point's code depends only on the input
and blocks can be processed in any order or in parallel.

Reconstruction inverts the residuals block by block.  Within a block it is
inherently sequential (each value feeds its successors' predictions), which
here is expressed as a cumulative sum per axis plus one correction per
outlier, in raster order.

Blocks get one leading layer of zero padding per axis, so points on a block's
leading faces are predicted from zeros and the predictor degrades gracefully
to the lower-dimensional form there.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import CorruptionError, FieldDescriptor, QuantConfig, SdqzError, partition_blocks

CODE_DTYPE = np.uint32


@dataclass
class PrequantField:
    """Values snapped to the 2*eb lattice, stored as exact integers in float64."""

    values: np.ndarray  # float64, flat
    dims: tuple[int, ...]

    @property
    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.dims)


@dataclass
class QuantOutput:
    """Full output of the lossy stage: codes plus the verbatim outlier list."""

    codes: np.ndarray            # uint32, flat, code 0 marks an outlier
    outlier_indices: np.ndarray  # uint64, strictly ascending flat indices
    outlier_values: np.ndarray   # float64, prequantized units
    dims: tuple[int, ...]
    cfg: QuantConfig

    @property
    def n_outliers(self) -> int:
        return int(self.outlier_indices.size)


def prequantize(data, eb: float, dims: tuple[int, ...] | None = None) -> PrequantField:
    """Round ``data / (2*eb)`` to the nearest integer, half away from zero.

    The result is kept in float64 so large quotients cannot overflow an
    integer type; reconstruction is ``value * 2*eb`` and deviates from the
    input by at most ``eb``.
    """
    arr = np.asarray(data)
    if not (eb > 0 and math.isfinite(eb)):
        raise SdqzError("error bound must be positive")
    if not np.isfinite(arr).all():
        raise SdqzError("cannot prequantize nonfinite values")
    if dims is None:
        dims = arr.shape if arr.ndim > 1 else (arr.size,)
    x = arr.astype(np.float64).ravel() / (2.0 * eb)
    q = np.copysign(np.floor(np.abs(x) + 0.5), x)
    return PrequantField(values=q, dims=tuple(int(d) for d in dims))


def pad_block(block: np.ndarray) -> np.ndarray:
    """Prediction context for one block: a leading zero layer on every axis."""
    block = np.asarray(block, dtype=np.float64)
    padded = np.zeros(tuple(e + 1 for e in block.shape))
    padded[(slice(1, None),) * block.ndim] = block
    return padded


def lorenzo_predict(padded: np.ndarray, coords: tuple[int, ...]) -> float:
    """First-order Lorenzo prediction of one point from its padded context.

    ``coords`` are block-local (unpadded); neighbor ``a-1`` therefore sits at
    padded index ``a``.  The +-1 coefficients sum to one, so constant inputs
    predict exactly and integer inputs yield integer predictions.
    """
    r = padded.ndim
    if len(coords) != r:
        raise SdqzError(f"got {len(coords)} coordinates for a rank-{r} context")
    if r == 1:
        (a,) = coords
        return float(padded[a])
    if r == 2:
        a, b = coords
        return float(padded[a, b + 1] + padded[a + 1, b] - padded[a, b])
    if r == 3:
        a, b, c = coords
        return float(
            padded[a, b + 1, c + 1] + padded[a + 1, b, c + 1] + padded[a + 1, b + 1, c]
            - padded[a, b, c + 1] - padded[a, b + 1, c] - padded[a + 1, b, c]
            + padded[a, b, c]
        )
    raise SdqzError(f"rank {r} not supported (1-3)")


def _predict_all(padded: np.ndarray, rank: int) -> np.ndarray:
    """Vectorized Lorenzo prediction over the last ``rank`` axes.

    ``padded`` may carry leading batch axes (one entry per block); the
    trailing axes are block extents + 1.
    """
    if rank == 1:
        return padded[..., :-1]
    if rank == 2:
        return padded[..., :-1, 1:] + padded[..., 1:, :-1] - padded[..., :-1, :-1]
    return (
        padded[..., :-1, 1:, 1:] + padded[..., 1:, :-1, 1:] + padded[..., 1:, 1:, :-1]
        - padded[..., :-1, :-1, 1:] - padded[..., :-1, 1:, :-1] - padded[..., 1:, :-1, :-1]
        + padded[..., :-1, :-1, :-1]
    )


def postquantize_block(padded: np.ndarray, cfg: QuantConfig):
    """Residual-code one padded block.

    Returns ``(codes, outlier_local_indices, outlier_values)``: residuals
    strictly inside ``(-radius, radius)`` become ``residual + radius``; the
    rest become code 0 with the prequantized value recorded verbatim.  Every
    point is independent of every other point's output.
    """
    rank = padded.ndim
    radius = cfg.radius
    inner = padded[(slice(1, None),) * rank]
    delta = inner - _predict_all(padded, rank)
    in_cap = (delta > -radius) & (delta < radius)
    codes = np.where(in_cap, delta + radius, 0.0).astype(CODE_DTYPE)
    local = np.flatnonzero(~in_cap)
    return codes, local, inner.reshape(-1)[local]


def _blockify(field: np.ndarray, block_shape: tuple[int, ...]) -> np.ndarray:
    """View a padded field as (grid axes..., block axes...)."""
    r = field.ndim
    shape: list[int] = []
    for d, b in zip(field.shape, block_shape):
        shape.extend((d // b, b))
    perm = tuple(range(0, 2 * r, 2)) + tuple(range(1, 2 * r, 2))
    return field.reshape(shape).transpose(perm)


def _unblockify(blocks: np.ndarray, padded_shape: tuple[int, ...]) -> np.ndarray:
    r = len(padded_shape)
    perm: list[int] = []
    for i in range(r):
        perm.extend((i, r + i))
    return blocks.transpose(perm).reshape(padded_shape)


def _padded_shape(shape: tuple[int, ...], block_shape: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(-(-d // b) * b for d, b in zip(shape, block_shape))


def _compress_region(dq: np.ndarray, cfg: QuantConfig):
    """Dual-quantize one shaped region of prequantized values.

    Trailing zero padding up to whole blocks only ever sits after the real
    data along each axis, so it never feeds a real point's prediction.
    """
    rank = dq.ndim
    bs = cfg.block_shape
    radius = cfg.radius
    pshape = _padded_shape(dq.shape, bs)
    buf = np.zeros(pshape)
    buf[tuple(slice(0, d) for d in dq.shape)] = dq
    blocks = _blockify(buf, bs)
    padded = np.zeros(blocks.shape[:rank] + tuple(b + 1 for b in bs))
    padded[(Ellipsis,) + (slice(1, None),) * rank] = blocks
    delta = blocks - _predict_all(padded, rank)
    in_cap = (delta > -radius) & (delta < radius)
    codes6 = np.where(in_cap, delta + radius, 0.0).astype(CODE_DTYPE)
    trim = tuple(slice(0, d) for d in dq.shape)
    codes = _unblockify(codes6, pshape)[trim]
    mask = ~_unblockify(in_cap, pshape)[trim]
    idx = np.flatnonzero(mask.reshape(-1))
    return codes, idx, dq.reshape(-1)[idx]


def _reconstruct_region(codes: np.ndarray, out_idx: np.ndarray, out_vals: np.ndarray,
                        cfg: QuantConfig) -> np.ndarray:
    """Invert dual-quantization for one shaped region, in prequantized units.

    The in-cap residuals are the blockwise finite differences of the
    prequantized field, so a cumulative sum per axis inverts them in one
    vectorized pass.  Each outlier then contributes one correction: restoring
    its verbatim value is equivalent to fixing its (unknown) residual, which
    adds a constant over the block's trailing box.  Raster order makes each
    correction final before any later point that depends on it is read.
    """
    rank = codes.ndim
    bs = cfg.block_shape
    radius = cfg.radius
    pshape = _padded_shape(codes.shape, bs)
    resid = np.zeros(pshape)
    region = tuple(slice(0, d) for d in codes.shape)
    resid[region] = np.where(codes == 0, 0.0, codes.astype(np.float64) - radius)
    acc = _blockify(resid, bs)
    for ax in range(rank, 2 * rank):
        acc = np.cumsum(acc, axis=ax)
    if out_idx.size:
        coords = np.unravel_index(out_idx, codes.shape)
        grid = [(c // b).tolist() for c, b in zip(coords, bs)]
        local = [(c % b).tolist() for c, b in zip(coords, bs)]
        vals = out_vals.tolist()
        for k in range(len(vals)):
            at = tuple(g[k] for g in grid) + tuple(l[k] for l in local)
            box = tuple(g[k] for g in grid) + tuple(slice(l[k], None) for l in local)
            acc[box] += vals[k] - acc[at]
    return _unblockify(acc, pshape)[region]


def _row_slabs(dims: tuple[int, ...], block0: int, workers: int):
    """Contiguous runs of block rows along axis 0, one per worker."""
    nblocks0 = -(-dims[0] // block0)
    workers = max(1, min(workers, nblocks0))
    bounds = np.linspace(0, nblocks0, workers + 1, dtype=np.int64)
    slabs = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > lo:
            slabs.append((int(lo) * block0, min(int(hi) * block0, dims[0])))
    return slabs


def compress_field(data, fd: FieldDescriptor, cfg: QuantConfig,
                   workers: int | None = None) -> QuantOutput:
    """Prequantize then residual-code a whole field over its block grid.

    The output is deterministic and identical for any ``workers`` count or
    block processing order; workers > 1 splits the block grid into row slabs
    handled concurrently.
    """
    partition_blocks(fd, cfg)  # validates rank agreement
    arr = np.asarray(data)
    if arr.size != fd.n_points:
        raise SdqzError(f"data has {arr.size} values, descriptor expects {fd.n_points}")
    dq = prequantize(arr, cfg.eb, fd.dims).shaped
    slabs = _row_slabs(fd.dims, cfg.block_shape[0], workers or 1)
    if len(slabs) == 1:
        codes, idx, vals = _compress_region(dq, cfg)
        return QuantOutput(codes.reshape(-1), idx.astype(np.uint64),
                           vals.astype(np.float64), fd.dims, cfg)

    row_stride = math.prod(fd.dims[1:])
    codes = np.empty(fd.n_points, dtype=CODE_DTYPE)
    with ThreadPoolExecutor(max_workers=len(slabs)) as pool:
        parts = list(pool.map(lambda s: _compress_region(dq[s[0]:s[1]], cfg), slabs))
    idx_parts, val_parts = [], []
    for (lo, hi), (c, idx, vals) in zip(slabs, parts):
        codes[lo * row_stride:hi * row_stride] = c.reshape(-1)
        idx_parts.append(idx + lo * row_stride)
        val_parts.append(vals)
    all_idx = np.concatenate(idx_parts) if idx_parts else np.empty(0, np.int64)
    all_vals = np.concatenate(val_parts) if val_parts else np.empty(0, np.float64)
    return QuantOutput(codes, all_idx.astype(np.uint64), all_vals.astype(np.float64),
                       fd.dims, cfg)


def _validate_output(qout: QuantOutput, cfg: QuantConfig) -> None:
    n = math.prod(qout.dims)
    if qout.codes.size != n:
        raise CorruptionError(f"code array has {qout.codes.size} entries, expected {n}")
    if qout.codes.size and int(qout.codes.max()) >= cfg.cap:
        raise CorruptionError("quantization code out of range for cap")
    idx = qout.outlier_indices
    if idx.size != qout.outlier_values.size:
        raise CorruptionError("outlier index/value lengths differ")
    if idx.size:
        if int(idx.max()) >= n:
            raise CorruptionError("outlier index out of range")
        if np.any(np.diff(idx.astype(np.int64)) <= 0):
            raise CorruptionError("outlier indices must be strictly ascending")
        if np.any(qout.codes[idx] != 0):
            raise CorruptionError("outlier entry at a position whose code is not 0")
    n_zero = int(np.count_nonzero(qout.codes == 0))
    if n_zero != idx.size:
        raise CorruptionError(
            f"{n_zero} zero codes but {idx.size} outlier entries"
        )


def reconstruct_field(qout: QuantOutput, cfg: QuantConfig | None = None,
                      workers: int | None = None) -> np.ndarray:
    """Rebuild the field from codes and outliers; flat float64, error <= eb.

    Blocks decode independently (parallel across row slabs); inside a block
    the reconstruction is sequential by nature and exact in integer
    arithmetic, so the only deviation from the original is the
    prequantization rounding.
    """
    cfg = cfg or qout.cfg
    _validate_output(qout, cfg)
    shaped = qout.codes.reshape(qout.dims)
    slabs = _row_slabs(qout.dims, cfg.block_shape[0], workers or 1)
    scale = 2.0 * cfg.eb
    if len(slabs) == 1:
        dq = _reconstruct_region(shaped, qout.outlier_indices.astype(np.int64),
                                 qout.outlier_values, cfg)
        return dq.reshape(-1) * scale

    row_stride = math.prod(qout.dims[1:])
    idx = qout.outlier_indices.astype(np.int64)
    out = np.empty(math.prod(qout.dims))

    def run(slab):
        lo, hi = slab
        a, b = np.searchsorted(idx, (lo * row_stride, hi * row_stride))
        return _reconstruct_region(shaped[lo:hi], idx[a:b] - lo * row_stride,
                                   qout.outlier_values[a:b], cfg)

    with ThreadPoolExecutor(max_workers=len(slabs)) as pool:
        parts = list(pool.map(run, slabs))
    for (lo, hi), dq in zip(slabs, parts):
        out[lo * row_stride:hi * row_stride] = dq.reshape(-1)
    return out * scale
