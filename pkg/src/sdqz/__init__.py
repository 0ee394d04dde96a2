"""Error-bounded lossy compression for scientific floating-point arrays.

The pipeline prequantizes values onto an error-bound lattice, predicts each
point from its neighbors inside independent blocks, entropy-codes the
residuals with a canonical Huffman code, and packs everything into a
self-describing archive.  ``compress`` / ``decompress`` cover the common
case; the stage modules are importable on their own.
"""

from .archive import (Archive, ArchiveFormatError, ArchiveHeader, HEADER_SIZE,
                      deserialize, parse_header, serialize)
from .core import (BlockGrid, CorruptionError, ErrorBoundSpec, FieldDescriptor,
                   QuantConfig, SdqzError, describe_field, partition_blocks,
                   resolve_error_bound)
from .dualquant import (PrequantField, QuantOutput, compress_field, lorenzo_predict,
                        pad_block, postquantize_block, prequantize, reconstruct_field)
from .huffman import (Codebook, DeflatedStream, ReverseCodebook, build_tree, canonize,
                      default_chunk_size, deflate, encode, histogram, inflate,
                      select_unit_width)
from .metrics import (QualityReport, RdPoint, SizeReport, quality, rd_sweep,
                      size_report, sweep_csv)
from .pipeline import compress, decompress, decompress_archive
from .synthetic import PROFILES, generate_field

__version__ = "0.1.0"

__all__ = [
    "Archive", "ArchiveFormatError", "ArchiveHeader", "BlockGrid", "Codebook",
    "CorruptionError", "DeflatedStream", "ErrorBoundSpec", "FieldDescriptor",
    "HEADER_SIZE", "PROFILES", "PrequantField", "QualityReport", "QuantConfig",
    "QuantOutput", "RdPoint", "ReverseCodebook", "SdqzError", "SizeReport",
    "build_tree", "canonize", "compress", "compress_field", "decompress",
    "decompress_archive", "default_chunk_size", "deflate", "describe_field",
    "deserialize", "encode", "generate_field", "histogram", "inflate",
    "lorenzo_predict", "pad_block", "parse_header", "partition_blocks",
    "postquantize_block", "prequantize", "quality", "rd_sweep",
    "reconstruct_field", "resolve_error_bound", "select_unit_width",
    "serialize", "size_report", "sweep_csv",
]
