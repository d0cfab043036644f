"""The compaction layer: turn raw record batches into a compact, directly readable form.

Three transformations are applied to each record:

* redundant parts are dropped (the constant tag, the two always-zero price digits,
  the ``+0000`` offset);
* timestamps become non-negative deltas against a base timestamp, with a new base
  opened whenever a delta would reach ``base_interval_seconds``;
* the (instance type, OS, zone) key becomes its id in the injected dictionary,
  either as a decimal per entry (bytewise) or as a Huffman-coded bit stream.

Text layout of a serialized batch::

    #C <bytewise|huffman> <record count> <base interval>
    #B <base timestamp, YYYY-MM-DDTHH:MM:SS>
    <price>,<delta>[,<id>]
    ...
    #T <id>:<code length> ...          (huffman only)
    #P 0x<hex bits> <bit length>        (huffman only)
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .dictionary import Dictionary
from .errors import CorruptBitstream, MalformedCompactPayload, UnknownKey, UnsortedInput
from .huffman import BitVector, HuffmanCodeTable, bitpack_ids, bitunpack_ids, huffman_build
from .records import CompositeKey, SpotPriceRecord, format_timestamp, parse_timestamp

DEFAULT_BASE_INTERVAL = 86400


class IdEncoding(str, enum.Enum):
    BYTEWISE = "bytewise"
    HUFFMAN = "huffman"


@dataclass(frozen=True)
class CodecConfig:
    base_interval_seconds: int = DEFAULT_BASE_INTERVAL
    id_encoding: IdEncoding = IdEncoding.BYTEWISE

    def __post_init__(self):
        if self.base_interval_seconds < 1:
            raise ValueError("base_interval_seconds must be >= 1")
        object.__setattr__(self, "id_encoding", IdEncoding(self.id_encoding))


class CompactEntry(NamedTuple):
    price_text: str
    delta_seconds: int
    key_id: int | None = None


class Segment(NamedTuple):
    base_epoch: int
    entries: tuple[CompactEntry, ...]


@dataclass(frozen=True)
class CompactBatch:
    segments: tuple[Segment, ...] = ()
    id_encoding: IdEncoding = IdEncoding.BYTEWISE
    base_interval_seconds: int = DEFAULT_BASE_INTERVAL
    id_payload: BitVector | None = None
    code_table: HuffmanCodeTable | None = None

    def __len__(self):
        return sum(len(seg.entries) for seg in self.segments)


# -- strategy 1: drop redundant components ----------------------------------

_SHORT_PRICE_RE = re.compile(r"(0|[1-9][0-9]*)\.([0-9]{4})")


def short_price(price_micro: int) -> str:
    """41500 -> "0.0415": four fraction digits, the dropped two are always zero."""
    q = price_micro // 100
    return f"{q // 10_000}.{q % 10_000:04d}"


def price_from_short(text: str) -> int:
    m = _SHORT_PRICE_RE.fullmatch(text)
    if m is None:
        raise MalformedCompactPayload(f"bad compact price {text!r}")
    return int(m.group(1)) * 1_000_000 + int(m.group(2)) * 100


def filter_fields(r: SpotPriceRecord) -> tuple[str, int, CompositeKey]:
    return short_price(r.price_micro), r.timestamp_epoch, r.key


# -- encode / decode --------------------------------------------------------

def encode_batch(records: Sequence[SpotPriceRecord], d: Dictionary,
                 cfg: CodecConfig | None = None) -> CompactBatch:
    cfg = cfg or CodecConfig()
    interval = cfg.base_interval_seconds
    huffman = cfg.id_encoding is IdEncoding.HUFFMAN
    index = d.index

    segments = []
    ids = []
    current: list[CompactEntry] = []
    base = prev = None
    for i, r in enumerate(records):
        price, ts, key = filter_fields(r)
        if prev is not None and ts < prev:
            raise UnsortedInput(f"record {i} at {ts} precedes record {i - 1} at {prev}")
        prev = ts
        try:
            key_id = index[key]
        except KeyError:
            raise UnknownKey(key, index=i) from None
        if base is None or ts - base >= interval:
            if current:
                segments.append(Segment(base, tuple(current)))
            base, current = ts, []
        ids.append(key_id)
        current.append(CompactEntry(price, ts - base, None if huffman else key_id))
    if current:
        segments.append(Segment(base, tuple(current)))

    payload = table = None
    if huffman:
        if ids:
            table = huffman_build(Counter(ids))
            payload = bitpack_ids(ids, table)
        else:
            table, payload = HuffmanCodeTable({}), BitVector()
    return CompactBatch(tuple(segments), cfg.id_encoding, interval, payload, table)


def decode_batch(b: CompactBatch, d: Dictionary) -> list[SpotPriceRecord]:
    n = len(b)
    if b.id_encoding is IdEncoding.HUFFMAN:
        if b.id_payload is None or b.code_table is None:
            raise CorruptBitstream("huffman batch without id payload or code table")
        ids = iter(bitunpack_ids(b.id_payload, b.code_table, n))
    else:
        ids = None

    out = []
    for seg in b.segments:
        for e in seg.entries:
            key_id = next(ids) if ids is not None else e.key_id
            if key_id is None:
                raise MalformedCompactPayload("bytewise entry without key id")
            key = d.reverse(key_id)
            out.append(SpotPriceRecord(price_from_short(e.price_text), seg.base_epoch + e.delta_seconds, *key))
    return out


# -- text serialization -----------------------------------------------------

def serialize_compact(b: CompactBatch) -> bytes:
    huffman = b.id_encoding is IdEncoding.HUFFMAN
    lines = [f"#C {b.id_encoding.value} {len(b)} {b.base_interval_seconds}"]
    for seg in b.segments:
        lines.append("#B " + format_timestamp(seg.base_epoch))
        if huffman:
            lines.extend(f"{e.price_text},{e.delta_seconds}" for e in seg.entries)
        else:
            lines.extend(f"{e.price_text},{e.delta_seconds},{e.key_id}" for e in seg.entries)
    if huffman:
        table, payload = b.code_table, b.id_payload
        lines.append(" ".join(["#T"] + [f"{s}:{L}" for s, L in table.lengths.items()]))
        lines.append(f"#P 0x{payload.data.hex()} {payload.length_bits}")
    return ("\n".join(lines) + "\n").encode("utf-8")


_INT_RE = re.compile(r"0|[1-9][0-9]*")


def _int(text: str, what: str, lineno: int) -> int:
    if not _INT_RE.fullmatch(text):
        raise MalformedCompactPayload(f"line {lineno}: bad {what} {text!r}")
    return int(text)


def parse_compact(data: bytes) -> CompactBatch:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedCompactPayload("payload is not UTF-8") from None
    if not text.endswith("\n"):
        raise MalformedCompactPayload("payload must end with a newline")
    lines = text[:-1].split("\n")

    header = lines[0].split(" ")
    if len(header) != 4 or header[0] != "#C":
        raise MalformedCompactPayload(f"bad header {lines[0]!r}")
    try:
        encoding = IdEncoding(header[1])
    except ValueError:
        raise MalformedCompactPayload(f"unknown id encoding {header[1]!r}") from None
    count = _int(header[2], "record count", 1)
    interval = _int(header[3], "base interval", 1)
    if interval < 1:
        raise MalformedCompactPayload("base interval must be >= 1")
    huffman = encoding is IdEncoding.HUFFMAN
    fields_per_entry = 2 if huffman else 3

    body = lines[1:]
    if huffman:
        if len(body) < 2 or not (body[-2] == "#T" or body[-2].startswith("#T ")) or not body[-1].startswith("#P "):
            raise MalformedCompactPayload("huffman payload must end with #T and #P lines")
        table = _parse_table(body[-2], len(lines) - 1)
        payload = _parse_bits(body[-1], len(lines))
        body = body[:-2]
    else:
        table = payload = None

    segments = []
    base = None
    entries: list[CompactEntry] = []
    prev_ts = None
    for lineno, line in enumerate(body, start=2):
        if line.startswith("#B "):
            if base is not None:
                if not entries:
                    raise MalformedCompactPayload(f"line {lineno}: empty segment")
                segments.append(Segment(base, tuple(entries)))
            try:
                new_base = parse_timestamp(line[3:])
            except ValueError:
                raise MalformedCompactPayload(f"line {lineno}: bad base timestamp {line[3:]!r}") from None
            if line[3:] != format_timestamp(new_base):
                raise MalformedCompactPayload(f"line {lineno}: non-canonical base timestamp")
            if base is not None and new_base <= base:
                raise MalformedCompactPayload(f"line {lineno}: base timestamps must strictly increase")
            base, entries = new_base, []
            continue
        if base is None:
            raise MalformedCompactPayload(f"line {lineno}: entry before first #B line")
        parts = line.split(",")
        if len(parts) != fields_per_entry:
            raise MalformedCompactPayload(f"line {lineno}: expected {fields_per_entry} fields")
        price_from_short(parts[0])
        delta = _int(parts[1], "delta", lineno)
        if delta >= interval:
            raise MalformedCompactPayload(f"line {lineno}: delta {delta} not below interval {interval}")
        ts = base + delta
        if prev_ts is not None and ts < prev_ts:
            raise MalformedCompactPayload(f"line {lineno}: timestamps go backwards")
        prev_ts = ts
        key_id = None if huffman else _int(parts[2], "key id", lineno)
        entries.append(CompactEntry(parts[0], delta, key_id))
    if base is not None:
        if not entries:
            raise MalformedCompactPayload("empty trailing segment")
        segments.append(Segment(base, tuple(entries)))

    batch = CompactBatch(tuple(segments), encoding, interval, payload, table)
    if len(batch) != count:
        raise MalformedCompactPayload(f"header announces {count} records, body holds {len(batch)}")
    return batch


def _parse_table(line: str, lineno: int) -> HuffmanCodeTable:
    lengths = {}
    for item in line.split(" ")[1:]:
        sym, sep, L = item.partition(":")
        if not sep:
            raise MalformedCompactPayload(f"line {lineno}: bad code table item {item!r}")
        sym = _int(sym, "code table id", lineno)
        if sym in lengths:
            raise MalformedCompactPayload(f"line {lineno}: id {sym} listed twice")
        lengths[sym] = _int(L, "code length", lineno)
    try:
        table = HuffmanCodeTable(lengths)
    except ValueError as exc:
        raise MalformedCompactPayload(f"line {lineno}: {exc}") from None
    if list(table.lengths) != list(lengths):
        raise MalformedCompactPayload(f"line {lineno}: code table not in canonical order")
    return table


def _parse_bits(line: str, lineno: int) -> BitVector:
    parts = line.split(" ")
    if len(parts) != 3 or not parts[1].startswith("0x"):
        raise MalformedCompactPayload(f"line {lineno}: bad bit payload line")
    try:
        data = bytes.fromhex(parts[1][2:])
    except ValueError:
        raise MalformedCompactPayload(f"line {lineno}: bad hex payload") from None
    length = _int(parts[2], "bit length", lineno)
    try:
        return BitVector(data, length)
    except (ValueError, CorruptBitstream) as exc:
        raise MalformedCompactPayload(f"line {lineno}: {exc}") from None


def encode_records(records, d, cfg=None) -> bytes:
    return serialize_compact(encode_batch(records, d, cfg))


def decode_payload(data: bytes, d: Dictionary) -> list[SpotPriceRecord]:
    return decode_batch(parse_compact(data), d)
