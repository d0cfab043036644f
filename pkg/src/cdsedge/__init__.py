"""Compact spot-price records for an edge testbed: codec, source/edge services, and benchmarks."""

from .codec import CodecConfig, CompactBatch, IdEncoding, decode_batch, encode_batch, parse_compact, serialize_compact
from .dictionary import Dictionary, build_dictionary, load_dictionary, save_dictionary
from .records import CompositeKey, GeneratorConfig, SpotPriceRecord, gen_records, parse_record, render_record

__version__ = "0.1.0"

__all__ = [
    "CodecConfig", "CompactBatch", "CompositeKey", "Dictionary", "GeneratorConfig", "IdEncoding",
    "SpotPriceRecord", "build_dictionary", "decode_batch", "encode_batch", "gen_records",
    "load_dictionary", "parse_compact", "parse_record", "render_record", "save_dictionary",
    "serialize_compact",
]
