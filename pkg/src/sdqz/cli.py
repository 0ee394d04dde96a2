"""Command-line front end: compress, decompress, analyze, sweep, gen.

Raw inputs are little-endian binary floats; dims strings are x-separated
with the slowest axis first and describe row-major storage.  Diagnostics go
to stderr, machine-readable key=value and CSV output to stdout.  4D inputs
are folded along the leading axis into a batch of 3D fields, stored as
consecutive self-describing archives in one file.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import archive as _archive
from . import metrics, pipeline
from .core import ErrorBoundSpec, SdqzError, describe_field
from .synthetic import PROFILES, generate_field

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _parse_dims(text: str, max_rank: int = 4) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise SdqzError(f"cannot parse dims {text!r} (expected e.g. 512x512x512)")
    if not 1 <= len(dims) <= max_rank or any(d < 1 for d in dims):
        raise SdqzError(f"dims {text!r} must list 1-{max_rank} positive extents")
    return dims


def _workers(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    elif os.environ.get("SDQZ_THREADS"):
        try:
            n = int(os.environ["SDQZ_THREADS"])
        except ValueError:
            raise SdqzError(f"SDQZ_THREADS={os.environ['SDQZ_THREADS']!r} is not an integer")
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise SdqzError("thread count must be >= 1")
    return n


def _load_raw(path: str, dims: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
    data = np.fromfile(path, dtype=dtype)
    need = int(np.prod(dims))
    if data.size != need:
        raise SdqzError(
            f"{path} holds {data.size} {dtype.name} values but dims "
            f"{'x'.join(map(str, dims))} require {need}"
        )
    return data.reshape(dims)


def _slabs(data: np.ndarray) -> list[np.ndarray]:
    """Leading-axis batch for 4D input; rank 1-3 passes through whole."""
    return list(data) if data.ndim == 4 else [data]


def _cmd_compress(args) -> int:
    dims = _parse_dims(args.dims)
    data = _load_raw(args.input, dims, _DTYPES[args.dtype])
    workers = _workers(args)
    t0 = time.perf_counter()
    blobs = [
        pipeline.compress(slab, eb=args.eb, mode=args.mode, cap=args.cap,
                          chunk_size=args.chunk_size, workers=workers)
        for slab in _slabs(data)
    ]
    wall = time.perf_counter() - t0
    out = b"".join(blobs)
    with open(args.output, "wb") as fh:
        fh.write(out)
    n_outliers = sum(_archive.parse_header(b).n_outliers for b in blobs)
    report = metrics.size_report(describe_field(data, dims), len(out))
    print(f"cr={report.compression_ratio:.6g} bitrate={report.bitrate:.6g} "
          f"outlier_pct={100.0 * n_outliers / data.size:.6g} wall_s={wall:.6g}")
    return 0


def _iter_archives(blob: bytes):
    offset = 0
    while offset < len(blob):
        header = _archive.parse_header(blob, offset)
        size = header.total_bytes
        yield _archive.deserialize(blob[offset:offset + size])
        offset += size


def _cmd_decompress(args) -> int:
    with open(args.input, "rb") as fh:
        blob = fh.read()
    workers = _workers(args)
    total = 0
    with open(args.output, "wb") as fh:
        for ar in _iter_archives(blob):
            raw = pipeline.decompress_archive(ar, workers=workers).tobytes()
            fh.write(raw)
            total += len(raw)
    print(f"bytes_written={total}")
    return 0


def _cmd_analyze(args) -> int:
    dims = _parse_dims(args.dims)
    dtype = _DTYPES[args.dtype]
    orig = _load_raw(args.orig, dims, dtype)
    recon = _load_raw(args.recon, dims, dtype)
    q = metrics.quality(orig, recon)
    print(f"psnr_db={q.psnr_db:.6g} rmse={q.rmse:.12g} "
          f"max_abs_err={q.max_abs_error:.12g} range={q.value_range:.12g}")
    return 0


def _cmd_sweep(args) -> int:
    dims = _parse_dims(args.dims)
    data = _load_raw(args.input, dims, _DTYPES[args.dtype])
    workers = _workers(args)
    try:
        magnitudes = [float(s) for s in args.ebs.split(",") if s]
    except ValueError:
        raise SdqzError(f"cannot parse --ebs {args.ebs!r} (expected e.g. 1e-2,1e-3)")
    if not magnitudes:
        raise SdqzError("--ebs lists no error bounds")
    specs = [ErrorBoundSpec(args.mode, m) for m in magnitudes]

    if data.ndim == 4:
        rows = _sweep_batch(data, specs, args.cap, workers)
    else:
        fd = describe_field(data, dims)
        rows = metrics.rd_sweep(data, fd, specs, cap=args.cap, workers=workers)
    for row in rows:
        if row.error is not None:
            print(f"sweep: eb={row.eb:g} failed: {row.error}", file=sys.stderr)
    csv = metrics.sweep_csv(rows)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return 0 if any(r.error is None for r in rows) else 1


def _sweep_batch(data: np.ndarray, specs, cap: int, workers: int) -> list[metrics.RdPoint]:
    """Per-bound sweep over a 4D batch: sizes summed, quality over all slabs."""
    rows = []
    for spec in specs:
        try:
            blobs = [pipeline.compress(s, eb=spec.magnitude, mode=spec.mode,
                                       cap=cap, workers=workers) for s in _slabs(data)]
            recon = np.concatenate([
                pipeline.decompress(b, workers=workers).ravel() for b in blobs
            ])
            q = metrics.quality(data, recon)
            total = sum(len(b) for b in blobs)
            headers = [_archive.parse_header(b) for b in blobs]
            rows.append(metrics.RdPoint(
                eb=max(h.eb_resolved for h in headers),
                bitrate=8.0 * total / data.size,
                cr=data.nbytes / total,
                psnr_db=q.psnr_db, max_abs_err=q.max_abs_error,
                n_outliers=sum(h.n_outliers for h in headers),
            ))
        except SdqzError as exc:
            rows.append(metrics.RdPoint(eb=float(spec.magnitude), error=str(exc)))
    return rows


def _cmd_gen(args) -> int:
    dims = _parse_dims(args.dims, max_rank=3)
    field = generate_field(args.profile, dims, seed=args.seed, value=args.value)
    raw = field.astype(_DTYPES[args.dtype]).tobytes()
    with open(args.output, "wb") as fh:
        fh.write(raw)
    print(f"bytes_written={len(raw)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdqz",
        description="Error-bounded lossy compressor for raw floating-point arrays.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, dims_help):
        p.add_argument("--dims", required=True, help=dims_help)
        p.add_argument("--dtype", choices=sorted(_DTYPES), default="f32",
                       help="element type of the raw file (default f32)")

    p = sub.add_parser("compress", help="raw binary -> .sdqz archive")
    p.add_argument("-i", "--input", required=True, help="raw little-endian float file")
    p.add_argument("-o", "--output", required=True, help="archive to write")
    add_common(p, "extents, slowest axis first, e.g. 512x512x512 (4D folds into 3D slabs)")
    p.add_argument("--mode", choices=("abs", "valrel"), default="abs",
                   help="error bound interpretation (default abs)")
    p.add_argument("--eb", type=float, required=True, help="error bound magnitude")
    p.add_argument("--cap", type=int, default=1024,
                   help="quantization bins, power of two (default 1024)")
    p.add_argument("--chunk-size", type=int, default=None,
                   help="codes per deflate chunk (default: auto)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker count (default: SDQZ_THREADS or all cores)")
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("decompress", help=".sdqz archive -> raw binary")
    p.add_argument("-i", "--input", required=True, help="archive file")
    p.add_argument("-o", "--output", required=True, help="raw file to write")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_decompress)

    p = sub.add_parser("analyze", help="quality report for two raw files")
    p.add_argument("--orig", required=True, help="original raw file")
    p.add_argument("--recon", required=True, help="reconstructed raw file")
    add_common(p, "extents of both files, e.g. 100x500x500")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep", help="rate-distortion sweep over error bounds")
    p.add_argument("-i", "--input", required=True, help="raw little-endian float file")
    p.add_argument("-o", "--output", default=None, help="CSV file (default: stdout)")
    add_common(p, "extents, slowest axis first")
    p.add_argument("--mode", choices=("abs", "valrel"), default="valrel",
                   help="error bound interpretation (default valrel)")
    p.add_argument("--ebs", required=True, help="comma-separated bounds, e.g. 1e-2,1e-3,1e-4")
    p.add_argument("--cap", type=int, default=1024)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gen", help="write a synthetic raw test field")
    p.add_argument("--profile", required=True, choices=PROFILES,
                   help="field profile")
    p.add_argument("-o", "--output", required=True, help="raw file to write")
    add_common(p, "extents of the generated field, 1-3 axes")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--value", type=float, default=0.0,
                   help="fill value for the constant profile (default 0)")
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SdqzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
