"""Lossless entropy stage: canonical Huffman coding over quantization codes.

The forward table is an array of fixed-width units (32 or 64 bits, picked
from the longest codeword actually produced): the codeword sits in the low
bits, its bitwidth in the top 8 bits.  Encoding is then a pure table gather;
deflating concatenates the gathered codewords MSB-first into independent,
byte-aligned chunks and records every chunk's exact bit length.

Codewords are assigned canonically (symbols sorted by bitwidth, then index;
codes count up, shifting left whenever the width grows), so the decoder
needs only the per-symbol bitwidths to rebuild the exact table.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import CorruptionError, SdqzError
from .dualquant import CODE_DTYPE

#: Top bits of a packed unit reserved for the codeword bitwidth.
WIDTH_FIELD_BITS = 8
#: Longest codeword a 64-bit unit can carry next to its width field.
MAX_CODEWORD_BITS = 64 - WIDTH_FIELD_BITS


@dataclass
class Codebook:
    """Forward table: one packed bitwidth+codeword unit per symbol."""

    entries: np.ndarray  # uint32 or uint64, zero entry == absent symbol
    unit_width: int      # 32 | 64

    @property
    def cap(self) -> int:
        return int(self.entries.size)

    @property
    def bitwidths(self) -> np.ndarray:
        return (self.entries >> np.uint64(self.unit_width - WIDTH_FIELD_BITS)).astype(np.uint8)

    @property
    def codewords(self) -> np.ndarray:
        mask = np.uint64((1 << (self.unit_width - WIDTH_FIELD_BITS)) - 1)
        return self.entries.astype(np.uint64) & mask


@dataclass
class ReverseCodebook:
    """Canonical decode tables: no tree needed, bitwidths determine everything.

    ``symbols`` is sorted by (bitwidth, symbol); codewords of width ``b``
    map onto ``symbols[offsets[b]:offsets[b+1]]`` starting at
    ``first_codes[b]``.
    """

    first_codes: np.ndarray  # uint64, index = bitwidth
    offsets: np.ndarray      # int64, index = bitwidth, one-past-end sentinel
    symbols: np.ndarray      # uint32
    max_bitwidth: int


@dataclass
class DeflatedStream:
    """Dense bitstream: byte-aligned chunks of MSB-first concatenated codes."""

    chunk_size: int
    chunk_bit_lengths: np.ndarray  # uint32, exact bits per chunk
    payload: bytes


def histogram(codes, cap: int, workers: int | None = None) -> np.ndarray:
    """Exact frequency of each quantization code; code >= cap is corruption.

    With ``workers`` > 1 the input is split into per-worker ranges that are
    counted privately and summed, which is exact and order-independent.
    """
    codes = np.asarray(codes)
    freq = np.zeros(cap, dtype=np.int64)
    if codes.size == 0:
        return freq
    if int(codes.min()) < 0 or int(codes.max()) >= cap:
        raise CorruptionError(f"quantization code outside [0, {cap})")
    w = max(1, int(workers or 1))
    if w == 1:
        return np.bincount(codes.ravel(), minlength=cap).astype(np.int64)
    parts = np.array_split(codes.ravel(), w)
    with ThreadPoolExecutor(max_workers=w) as pool:
        counts = list(pool.map(lambda p: np.bincount(p, minlength=cap), parts))
    return np.sum(counts, axis=0).astype(np.int64)


def build_tree(freq) -> np.ndarray:
    """Optimal prefix-code bitwidths for every present symbol.

    Ties in the merge queue break on (weight, smallest contained symbol), so
    the result is platform-independent.  A lone present symbol still gets one
    bit.  Absent symbols get bitwidth 0.
    """
    freq = np.asarray(freq, dtype=np.int64)
    present = np.flatnonzero(freq > 0)
    bits = np.zeros(freq.size, dtype=np.uint8)
    if present.size == 0:
        raise SdqzError("cannot build a code from an all-zero histogram")
    if present.size == 1:
        bits[present[0]] = 1
        return bits

    n_leaves = int(present.size)
    heap = [(int(freq[s]), int(s), i) for i, s in enumerate(present)]
    heapq.heapify(heap)
    merges: list[tuple[int, int]] = []
    next_id = n_leaves
    while len(heap) > 1:
        w1, m1, a = heapq.heappop(heap)
        w2, m2, b = heapq.heappop(heap)
        merges.append((a, b))
        heapq.heappush(heap, (w1 + w2, min(m1, m2), next_id))
        next_id += 1

    depth = np.zeros(next_id, dtype=np.int64)
    for k in range(len(merges) - 1, -1, -1):
        a, b = merges[k]
        depth[a] = depth[b] = depth[n_leaves + k] + 1
    bits[present] = depth[:n_leaves]
    return bits


def select_unit_width(max_bitwidth: int) -> int:
    """32-bit units when every codeword fits, 64-bit otherwise."""
    if max_bitwidth < 1:
        raise SdqzError("maximum bitwidth must be >= 1")
    if max_bitwidth > MAX_CODEWORD_BITS:
        raise SdqzError(
            f"codeword bitwidth {max_bitwidth} exceeds the supported maximum "
            f"of {MAX_CODEWORD_BITS}"
        )
    return 32 if max_bitwidth <= 32 - WIDTH_FIELD_BITS else 64


def canonize(bitwidths) -> tuple[Codebook, ReverseCodebook]:
    """Assign canonical codewords for the given bitwidths.

    Bitwidths are taken as-is (lengths never change here), so the total
    encoded size is exactly what the tree construction chose.
    """
    bw = np.asarray(bitwidths, dtype=np.uint8)
    present = np.flatnonzero(bw)
    if present.size == 0:
        raise SdqzError("cannot canonize an empty codebook")
    widths = bw[present].astype(np.int64)
    max_bw = int(widths.max())
    unit = select_unit_width(max_bw)

    counts = np.bincount(widths, minlength=max_bw + 1)
    if present.size >= 2:
        kraft = sum(int(c) << (max_bw - b) for b, c in enumerate(counts.tolist()) if b)
        if kraft != 1 << max_bw:
            raise SdqzError("bitwidth table violates Kraft equality")

    order = np.lexsort((present, widths))
    symbols = present[order].astype(CODE_DTYPE)
    sorted_widths = widths[order]

    first_codes = np.zeros(max_bw + 1, dtype=np.uint64)
    code = 0
    for b in range(2, max_bw + 1):
        code = (code + int(counts[b - 1])) << 1
        first_codes[b] = code
    offsets = np.zeros(max_bw + 2, dtype=np.int64)
    offsets[1:] = np.cumsum(counts)

    rank = np.arange(symbols.size, dtype=np.int64) - offsets[sorted_widths]
    codewords = first_codes[sorted_widths] + rank.astype(np.uint64)
    packed = (sorted_widths.astype(np.uint64) << np.uint64(unit - WIDTH_FIELD_BITS)) | codewords

    entries = np.zeros(bw.size, dtype=np.uint64)
    entries[symbols] = packed
    if unit == 32:
        entries = entries.astype(np.uint32)
    return (
        Codebook(entries=entries, unit_width=unit),
        ReverseCodebook(first_codes=first_codes, offsets=offsets,
                        symbols=symbols, max_bitwidth=max_bw),
    )


def encode(codes, cb: Codebook) -> np.ndarray:
    """Gather one packed unit per code; absent symbols are corruption."""
    codes = np.asarray(codes)
    if codes.size == 0:
        return np.empty(0, dtype=cb.entries.dtype)
    if int(codes.min()) < 0 or int(codes.max()) >= cb.cap:
        raise CorruptionError(f"quantization code outside [0, {cb.cap})")
    out = cb.entries[codes.ravel()]
    if not out.all():  # bitwidth 0 packs to an all-zero unit
        raise CorruptionError("code has no codebook entry (zero frequency at build time)")
    return out


def default_chunk_size(n_codes: int) -> int:
    """Codes per deflate chunk, aiming at roughly 2e4 chunks overall."""
    if n_codes <= 0:
        return 256
    raw = n_codes / 2e4
    size = 1 << max(0, math.ceil(math.log2(raw))) if raw > 1 else 1
    return min(65536, max(256, size))


# Cap on codes expanded per vectorized deflate pass; bounds transient memory.
_DEFLATE_BATCH = 1 << 20


def deflate(packed, chunk_size: int) -> DeflatedStream:
    """Concatenate packed codewords MSB-first into byte-aligned chunks.

    Each chunk covers ``chunk_size`` consecutive codes (the last may be
    short); its final byte is zero-padded.  Chunks never share state, so any
    grouping of them onto workers reproduces the same bytes.
    """
    if chunk_size < 1:
        raise SdqzError("chunk_size must be >= 1")
    packed = np.asarray(packed)
    n = int(packed.size)
    if n == 0:
        return DeflatedStream(int(chunk_size), np.zeros(0, dtype=np.uint32), b"")
    unit = packed.dtype.itemsize * 8
    units = packed.astype(np.uint64).ravel()
    bw = (units >> np.uint64(unit - WIDTH_FIELD_BITS)).astype(np.int64)
    if int(bw.min()) < 1:
        raise CorruptionError("packed unit with zero bitwidth")
    cw = units & np.uint64((1 << (unit - WIDTH_FIELD_BITS)) - 1)

    n_chunks = -(-n // chunk_size)
    starts = np.arange(n_chunks, dtype=np.int64) * chunk_size
    ends = np.minimum(starts + chunk_size, n)
    cum = np.cumsum(bw)
    code_start = cum - bw
    chunk_bits = cum[ends - 1] - code_start[starts]
    byte_starts = np.zeros(n_chunks + 1, dtype=np.int64)
    np.cumsum((chunk_bits + 7) >> 3, out=byte_starts[1:])

    chunks_per_batch = max(1, _DEFLATE_BATCH // chunk_size)
    pieces = []
    for c0 in range(0, n_chunks, chunks_per_batch):
        c1 = min(c0 + chunks_per_batch, n_chunks)
        lo, hi = int(starts[c0]), int(ends[c1 - 1])
        bwb = bw[lo:hi]
        local_start = code_start[lo:hi] - code_start[lo]
        chunk_of = (np.arange(lo, hi, dtype=np.int64) - lo) // chunk_size
        # bit position of each code inside this batch's padded byte run
        pos0 = ((byte_starts[c0 + chunk_of] - byte_starts[c0]) * 8
                + local_start - local_start[starts[c0 + chunk_of] - lo])
        total_bits = int(bwb.sum())
        idx = np.repeat(np.arange(hi - lo, dtype=np.int64), bwb)
        j = np.arange(total_bits, dtype=np.int64) - np.repeat(local_start, bwb)
        shift = (bwb[idx] - 1 - j).astype(np.uint64)
        bitvals = ((cw[lo:hi][idx] >> shift) & np.uint64(1)).astype(np.uint8)
        bitpos = np.repeat(pos0, bwb) + j
        stream = np.zeros(int(byte_starts[c1] - byte_starts[c0]) * 8, dtype=np.uint8)
        stream[bitpos] = bitvals
        pieces.append(np.packbits(stream).tobytes())

    return DeflatedStream(int(chunk_size), chunk_bits.astype(np.uint32), b"".join(pieces))


def _decode_limits(rb: ReverseCodebook) -> np.ndarray:
    """Left-aligned exclusive upper bound of each bitwidth's code range."""
    w = rb.max_bitwidth
    counts = np.diff(rb.offsets)
    limits = np.zeros(w, dtype=np.uint64)
    for b in range(1, w + 1):
        limits[b - 1] = (int(rb.first_codes[b]) + int(counts[b])) << (w - b)
    return limits


def _inflate_range(buf, byte_starts, bit_lengths, n_per_chunk, chunk_size,
                   lo, hi, rb, limits, out):
    """Decode chunks [lo, hi) in lockstep, one codeword per chunk per step."""
    w = rb.max_bitwidth
    m = hi - lo
    counts = n_per_chunk[lo:hi]
    budget = bit_lengths[lo:hi]
    base = byte_starts[lo:hi] * 8
    cur = np.zeros(m, dtype=np.int64)
    eight = np.arange(8, dtype=np.int64)
    for k in range(int(counts.max())):
        a = m if counts[-1] > k else m - 1  # only the final chunk can be short
        gbit = base[:a] + cur[:a]
        window = buf[(gbit >> 3)[:, None] + eight].view(">u8").ravel()
        peek = (window << (gbit & 7).astype(np.uint64)) >> np.uint64(64 - w)
        b = np.searchsorted(limits, peek, side="right").astype(np.int64) + 1
        if int(b.max()) > w:
            raise CorruptionError("bit pattern matches no codeword bitwidth")
        ncur = cur[:a] + b
        if np.any(ncur > budget[:a]):
            raise CorruptionError("chunk bit budget exhausted mid-codeword")
        top = peek >> (np.uint64(w) - b.astype(np.uint64))
        sym = rb.offsets[b] + (top - rb.first_codes[b]).astype(np.int64)
        out[(np.arange(lo, lo + a, dtype=np.int64)) * chunk_size + k] = rb.symbols[sym]
        cur[:a] = ncur
    if np.any(cur != budget):
        raise CorruptionError("decoded bits disagree with recorded chunk length")


def inflate(ds: DeflatedStream, rb: ReverseCodebook, n_codes: int,
            workers: int | None = None) -> np.ndarray:
    """Exact inverse of encode + deflate; decodes chunk by chunk.

    Inside a chunk each codeword's end position depends on the previous one,
    so chunks are the parallel unit: any partition of them across workers
    yields the same codes.
    """
    bits = np.asarray(ds.chunk_bit_lengths, dtype=np.int64)
    n_chunks = int(bits.size)
    if n_codes == 0:
        if n_chunks or ds.payload:
            raise CorruptionError("nonempty stream for zero codes")
        return np.empty(0, dtype=CODE_DTYPE)
    if ds.chunk_size < 1 or n_chunks != -(-n_codes // ds.chunk_size):
        raise CorruptionError(
            f"{n_chunks} chunks inconsistent with {n_codes} codes of chunk size {ds.chunk_size}"
        )
    byte_starts = np.zeros(n_chunks + 1, dtype=np.int64)
    np.cumsum((bits + 7) >> 3, out=byte_starts[1:])
    if int(byte_starts[-1]) != len(ds.payload):
        raise CorruptionError(
            f"payload is {len(ds.payload)} bytes, chunk lengths require {int(byte_starts[-1])}"
        )
    n_per_chunk = np.full(n_chunks, ds.chunk_size, dtype=np.int64)
    n_per_chunk[-1] = n_codes - (n_chunks - 1) * ds.chunk_size

    buf = np.frombuffer(ds.payload + b"\0" * 8, dtype=np.uint8)
    limits = _decode_limits(rb)
    out = np.empty(n_codes, dtype=CODE_DTYPE)

    w = max(1, min(int(workers or 1), n_chunks))
    if w == 1:
        _inflate_range(buf, byte_starts, bits, n_per_chunk, ds.chunk_size,
                       0, n_chunks, rb, limits, out)
        return out
    bounds = np.linspace(0, n_chunks, w + 1, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=w) as pool:
        futures = [
            pool.submit(_inflate_range, buf, byte_starts, bits, n_per_chunk,
                        ds.chunk_size, int(lo), int(hi), rb, limits, out)
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
        ]
        for f in futures:
            f.result()
    return out
