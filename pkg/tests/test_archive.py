import numpy as np
import pytest

from sdqz import (ArchiveFormatError, ErrorBoundSpec, HEADER_SIZE, QuantConfig,
                  build_tree, canonize, compress, compress_field, default_chunk_size,
                  deflate, describe_field, deserialize, encode, histogram,
                  parse_header, serialize)


def build_archive_bytes(data, dims, eb=0.01, cap=1024, chunk_size=None,
                        mode="abs", dtype=np.float32):
    data = np.asarray(data, dtype=dtype)
    fd = describe_field(data, dims)
    cfg = QuantConfig.for_rank(eb if mode == "abs" else eb * fd.value_range,
                               len(dims), cap=cap)
    qout = compress_field(data, fd, cfg)
    bw = build_tree(histogram(qout.codes, cfg.cap))
    cb, _ = canonize(bw)
    ds = deflate(encode(qout.codes, cb), chunk_size or default_chunk_size(qout.codes.size))
    return serialize(qout, ds, bw, cfg, ErrorBoundSpec(mode, eb), dtype), qout, ds


class TestRoundtrip:
    def test_structural_identity(self):
        rng = np.random.default_rng(0)
        blob, qout, ds = build_archive_bytes(rng.normal(0, 1, (20, 20)), (20, 20))
        ar = deserialize(blob)
        assert ar.header.field_dims == (20, 20)
        assert ar.header.cap == 1024
        assert np.array_equal(ar.outlier_indices, qout.outlier_indices)
        assert np.array_equal(ar.chunk_bit_lengths, ds.chunk_bit_lengths)
        assert ar.payload == ds.payload

    def test_reserialize_is_byte_identical(self):
        rng = np.random.default_rng(1)
        blob, _, _ = build_archive_bytes(rng.uniform(-4, 4, (13, 9)), (13, 9))
        ar = deserialize(blob)
        cfg = QuantConfig(ar.header.eb_resolved, ar.header.cap,
                          ar.header.block_shape[:ar.header.ndims])
        from sdqz import QuantOutput  # reassemble from parsed pieces
        from sdqz.huffman import DeflatedStream
        qout = QuantOutput(np.zeros(ar.header.n_points, np.uint32),
                           ar.outlier_indices, ar.outlier_values,
                           ar.header.field_dims, cfg)
        ds = DeflatedStream(ar.header.chunk_size, ar.chunk_bit_lengths, ar.payload)
        again = serialize(qout, ds, ar.bitwidths, cfg,
                          ErrorBoundSpec("abs", ar.header.eb_specified), np.float32)
        assert again == blob

    def test_constant_field_bitwidth_table(self):
        blob, _, _ = build_archive_bytes(np.zeros(1024), (1024,), eb=0.01)
        ar = deserialize(blob)
        present = np.flatnonzero(ar.bitwidths)
        assert present.tolist() == [512]  # the zero-residual bin
        assert ar.bitwidths[512] == 1
        assert ar.header.n_outliers == 0

    def test_size_accounting(self):
        rng = np.random.default_rng(2)
        blob, _, _ = build_archive_bytes(rng.normal(0, 9, (31,)), (31,), eb=0.05)
        h = parse_header(blob)
        assert len(blob) == (HEADER_SIZE + h.cap + 16 * h.n_outliers
                             + 4 * h.n_chunks + h.payload_bytes)
        assert len(blob) == h.total_bytes


class TestDeserializeErrors:
    def make_blob(self):
        return build_archive_bytes(np.linspace(0, 1, 64), (8, 8))[0]

    def test_empty_input(self):
        with pytest.raises(ArchiveFormatError, match="short read"):
            deserialize(b"")

    def test_bad_magic(self):
        blob = bytearray(self.make_blob())
        blob[0] = ord("X")
        with pytest.raises(ArchiveFormatError, match="bad magic"):
            deserialize(bytes(blob))

    def test_unsupported_version(self):
        blob = bytearray(self.make_blob())
        blob[4] = 9
        with pytest.raises(ArchiveFormatError, match="version"):
            deserialize(bytes(blob))

    def test_unsupported_dtype(self):
        blob = bytearray(self.make_blob())
        blob[5] = 7
        with pytest.raises(ArchiveFormatError, match="dtype"):
            deserialize(bytes(blob))

    def test_truncated_sections(self):
        blob = self.make_blob()
        with pytest.raises(ArchiveFormatError, match="short read"):
            deserialize(blob[:HEADER_SIZE + 10])

    def test_trailing_bytes_rejected(self):
        with pytest.raises(ArchiveFormatError, match="trailing"):
            deserialize(self.make_blob() + b"\0")

    def test_kraft_violation(self):
        blob = bytearray(self.make_blob())
        h = parse_header(bytes(blob))
        table = np.frombuffer(bytes(blob[HEADER_SIZE:HEADER_SIZE + h.cap]), np.uint8)
        present = np.flatnonzero(table)
        assert present.size >= 2
        blob[HEADER_SIZE + int(present[0])] += 1  # lengthen one codeword
        with pytest.raises(ArchiveFormatError, match="Kraft"):
            deserialize(bytes(blob))

    def test_payload_length_mismatch(self):
        blob = self.make_blob()
        h = parse_header(blob)
        # chop one payload byte and patch nothing else
        with pytest.raises(ArchiveFormatError, match="short read"):
            deserialize(blob[:-1])
        assert h.payload_bytes > 0


class TestCompressedBytesAreDeterministic:
    def test_same_input_same_bytes(self):
        rng = np.random.default_rng(3)
        data = rng.uniform(0, 1, (24, 24)).astype(np.float32)
        a = compress(data, eb=1e-3, mode="valrel")
        b = compress(data, eb=1e-3, mode="valrel")
        assert a == b

    def test_workers_do_not_change_bytes(self):
        rng = np.random.default_rng(4)
        data = rng.normal(0, 2, (40, 17)).astype(np.float32)
        base = compress(data, eb=0.01, workers=1)
        for w in (2, 3, 8):
            assert compress(data, eb=0.01, workers=w) == base
