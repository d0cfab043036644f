"""Canonical Huffman codes over dictionary ids, and MSB-first bit vectors to hold them."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import CorruptBitstream, EmptyFrequencyMap, MissingCode


@dataclass(frozen=True)
class BitVector:
    data: bytes = b""
    length_bits: int = 0

    def __post_init__(self):
        if self.length_bits < 0:
            raise ValueError("negative bit length")
        if len(self.data) != (self.length_bits + 7) // 8:
            raise CorruptBitstream(
                f"{len(self.data)} bytes cannot hold exactly {self.length_bits} bits"
            )
        pad = 8 * len(self.data) - self.length_bits
        if pad and self.data[-1] & ((1 << pad) - 1):
            raise CorruptBitstream("non-zero padding bits")

    @classmethod
    def from_bitstring(cls, bits: str) -> BitVector:
        if not bits:
            return cls()
        pad = -len(bits) % 8
        value = int(bits, 2) << pad
        return cls(value.to_bytes((len(bits) + pad) // 8, "big"), len(bits))

    def to_bitstring(self) -> str:
        if not self.length_bits:
            return ""
        value = int.from_bytes(self.data, "big") >> (8 * len(self.data) - self.length_bits)
        return format(value, f"0{self.length_bits}b")


@dataclass(frozen=True)
class HuffmanCodeTable:
    """Canonical prefix code, fully determined by the code length of each id.

    Codes are handed out in (length, id) order, so two parties that agree on the
    lengths agree on every bit.
    """

    lengths: Mapping[int, int]
    codes: dict[int, str] = field(init=False, repr=False, compare=False)
    _decode: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lengths = dict(self.lengths)
        if any(L < 1 for L in lengths.values()):
            raise ValueError("code lengths must be >= 1")
        if lengths:
            max_len = max(lengths.values())
            if sum(1 << (max_len - L) for L in lengths.values()) > 1 << max_len:
                raise ValueError("code lengths violate the Kraft inequality")
        order = sorted(lengths, key=lambda s: (lengths[s], s))

        codes = {}
        first_code, count, offset = {}, {}, {}
        code = 0
        prev = lengths[order[0]] if order else 0
        for i, sym in enumerate(order):
            L = lengths[sym]
            code <<= L - prev
            prev = L
            if L not in first_code:
                first_code[L], count[L], offset[L] = code, 0, i
            count[L] += 1
            codes[sym] = format(code, f"0{L}b")
            code += 1

        object.__setattr__(self, "lengths", {s: lengths[s] for s in order})
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "_decode", (tuple(order), first_code, count, offset,
                                             max(lengths.values(), default=0)))

    def canonical_order(self) -> list[int]:
        return list(self.lengths)

    def encoded_bits(self, freqs: Mapping[int, int]) -> int:
        return sum(self.lengths[s] * f for s, f in freqs.items())


def huffman_code_lengths(freqs: Mapping[int, int]) -> dict[int, int]:
    """Optimal prefix-code lengths for positive symbol counts."""
    if not freqs:
        raise EmptyFrequencyMap("cannot build a code for an empty alphabet")
    if any(f <= 0 for f in freqs.values()):
        raise ValueError("symbol counts must be positive")
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}

    tick = itertools.count()
    # heap items: (weight, tiebreak, symbols under this node)
    heap = [(f, next(tick), [s]) for s, f in sorted(freqs.items())]
    heapq.heapify(heap)
    depth = dict.fromkeys(freqs, 0)
    while len(heap) > 1:
        w1, _, s1 = heapq.heappop(heap)
        w2, _, s2 = heapq.heappop(heap)
        merged = s1 + s2
        for s in merged:
            depth[s] += 1
        heapq.heappush(heap, (w1 + w2, next(tick), merged))
    return depth


def huffman_build(freqs: Mapping[int, int]) -> HuffmanCodeTable:
    return HuffmanCodeTable(huffman_code_lengths(freqs))


def bitpack_ids(ids: Sequence[int], table: HuffmanCodeTable) -> BitVector:
    codes = table.lengths
    acc = 0
    nbits = 0
    canon = table.codes
    for i in ids:
        try:
            L = codes[i]
        except KeyError:
            raise MissingCode(f"no code for id {i}") from None
        acc = (acc << L) | int(canon[i], 2)
        nbits += L
    if not nbits:
        return BitVector()
    pad = -nbits % 8
    return BitVector((acc << pad).to_bytes((nbits + pad) // 8, "big"), nbits)


def bitunpack_ids(v: BitVector, table: HuffmanCodeTable, n: int) -> list[int]:
    """Decode exactly ``n`` ids; every one of ``v.length_bits`` bits must be consumed."""
    order, first_code, count, offset, max_len = table._decode
    total = v.length_bits
    value = int.from_bytes(v.data, "big") >> (8 * len(v.data) - total) if total else 0
    pos = total  # bits remaining
    out = []
    for _ in range(n):
        code = 0
        L = 0
        while True:
            if pos == 0:
                raise CorruptBitstream(f"bitstream ended after {len(out)} of {n} ids")
            pos -= 1
            code = (code << 1) | ((value >> pos) & 1)
            L += 1
            if L in first_code and 0 <= code - first_code[L] < count[L]:
                out.append(order[offset[L] + code - first_code[L]])
                break
            if L >= max_len:
                raise CorruptBitstream(f"bit pattern at offset {total - pos - L} matches no code")
    if pos:
        raise CorruptBitstream(f"{pos} unused bits after decoding {n} ids")
    return out
