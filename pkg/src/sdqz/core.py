"""Shared foundations: field description, error-bound resolution, block grids.

Everything downstream (quantization, entropy coding, the archive format)
works in terms of the types defined here.  All functions are pure and safe
to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Default per-axis block extents by rank.
DEFAULT_BLOCK_SHAPES: dict[int, tuple[int, ...]] = {
    1: (32,),
    2: (16, 16),
    3: (8, 8, 8),
}

MIN_CAP = 4
MAX_CAP = 65536


class SdqzError(Exception):
    """Base class for all library errors."""


class CorruptionError(SdqzError):
    """Compressed data violates a structural invariant and cannot be decoded."""


def _as_dims(dims) -> tuple[int, ...]:
    out = tuple(int(d) for d in dims)
    if not out:
        raise SdqzError("dims must contain at least one extent")
    if any(d < 1 for d in out):
        raise SdqzError(f"all extents must be >= 1, got {out}")
    return out


@dataclass(frozen=True)
class FieldDescriptor:
    """Dimensions, element type, and value statistics of one input array."""

    dims: tuple[int, ...]
    n_points: int
    value_min: float
    value_max: float
    contains_nonfinite: bool
    dtype: np.dtype

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def value_range(self) -> float:
        return self.value_max - self.value_min

    @property
    def nbytes(self) -> int:
        return self.n_points * self.dtype.itemsize


@dataclass(frozen=True)
class ErrorBoundSpec:
    """User-facing error bound: absolute, or relative to the value range."""

    mode: str  # "abs" | "valrel"
    magnitude: float

    def __post_init__(self):
        if self.mode not in ("abs", "valrel"):
            raise SdqzError(f"unknown error-bound mode {self.mode!r} (use 'abs' or 'valrel')")


@dataclass(frozen=True)
class QuantConfig:
    """Resolved absolute error bound plus quantizer and block geometry."""

    eb: float
    cap: int = 1024
    block_shape: tuple[int, ...] = field(default=DEFAULT_BLOCK_SHAPES[3])

    def __post_init__(self):
        if not (self.eb > 0 and math.isfinite(self.eb)):
            raise SdqzError("error bound must be positive and finite")
        if self.cap < MIN_CAP or self.cap > MAX_CAP or self.cap & (self.cap - 1):
            raise SdqzError(
                f"cap must be a power of two in [{MIN_CAP}, {MAX_CAP}], got {self.cap}"
            )
        object.__setattr__(self, "block_shape", _as_dims(self.block_shape))

    @property
    def radius(self) -> int:
        return self.cap // 2

    @classmethod
    def for_rank(cls, eb: float, rank: int, cap: int = 1024,
                 block_shape: tuple[int, ...] | None = None) -> "QuantConfig":
        """Build a config with the default block shape for a 1-3D field."""
        if block_shape is None:
            try:
                block_shape = DEFAULT_BLOCK_SHAPES[rank]
            except KeyError:
                raise SdqzError(f"no default block shape for rank {rank} (supported: 1-3)")
        elif len(block_shape) != rank:
            raise SdqzError(
                f"block_shape rank {len(block_shape)} does not match field rank {rank}"
            )
        return cls(eb=eb, cap=cap, block_shape=tuple(block_shape))


@dataclass(frozen=True)
class BlockGrid:
    """Partition of a field into equal blocks; boundary blocks may be partial."""

    dims: tuple[int, ...]
    block_shape: tuple[int, ...]
    blocks_per_axis: tuple[int, ...]

    @property
    def total_blocks(self) -> int:
        return math.prod(self.blocks_per_axis)

    def block_extents(self, coords: tuple[int, ...]) -> tuple[int, ...]:
        """True extents of the block at grid coordinates (partial at the edges)."""
        return tuple(
            min(b, d - c * b)
            for c, b, d in zip(coords, self.block_shape, self.dims)
        )


def describe_field(data, dims) -> FieldDescriptor:
    """Scan a flat array and record its dims, dtype, min/max and finiteness.

    Raises if the data length does not match the product of ``dims``.
    """
    arr = np.asarray(data)
    dims = _as_dims(dims)
    n = math.prod(dims)
    if arr.size != n:
        raise SdqzError(
            f"data has {arr.size} values but dims {'x'.join(map(str, dims))} require {n}"
        )
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    finite = bool(np.isfinite(arr).all())
    return FieldDescriptor(
        dims=dims,
        n_points=n,
        value_min=float(arr.min()),
        value_max=float(arr.max()),
        contains_nonfinite=not finite,
        dtype=arr.dtype,
    )


def resolve_error_bound(spec: ErrorBoundSpec, fd: FieldDescriptor) -> float:
    """Turn an error-bound spec into an absolute bound in data units."""
    if fd.contains_nonfinite:
        raise SdqzError("field contains NaN/Inf values and cannot be compressed")
    if not (spec.magnitude > 0 and math.isfinite(spec.magnitude)):
        raise SdqzError("error bound must be positive")
    if spec.mode == "abs":
        return float(spec.magnitude)
    rng = fd.value_range
    if rng == 0.0:
        raise SdqzError(
            "value-range-relative bound is undefined on a constant field; "
            "use an absolute error bound instead"
        )
    return float(spec.magnitude) * rng


def partition_blocks(fd: FieldDescriptor, cfg: QuantConfig) -> BlockGrid:
    """Cover the field with a grid of blocks via per-axis ceiling division."""
    if len(cfg.block_shape) != fd.rank:
        raise SdqzError(
            f"block_shape rank {len(cfg.block_shape)} does not match field rank {fd.rank}"
        )
    per_axis = tuple(-(-d // b) for d, b in zip(fd.dims, cfg.block_shape))
    return BlockGrid(dims=fd.dims, block_shape=cfg.block_shape, blocks_per_axis=per_axis)
