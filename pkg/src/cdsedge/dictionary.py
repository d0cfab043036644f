"""The pre-established lookup table: composite service keys <-> dense sequential ids.

On disk a dictionary is one ``instance_type<TAB>operating_system<TAB>zone`` line per
entry; the 0-based line number is the id.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyKeySet, IoFailure, MalformedDictionaryFile, UnknownId, UnknownKey
from .records import SEP, CompositeKey, valid_token

# 402 instance types x 8 operating systems x 56 zones
FULL_UNIVERSE_SIZE = 180096
MAX_ID = 2**32 - 1


@dataclass(frozen=True, eq=False)
class Dictionary:
    entries: tuple[CompositeKey, ...]
    index: dict[CompositeKey, int] = field(repr=False)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.index

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return self.entries == other.entries

    def lookup(self, key: CompositeKey) -> int:
        try:
            return self.index[key]
        except KeyError:
            raise UnknownKey(key) from None

    def reverse(self, key_id: int) -> CompositeKey:
        if not 0 <= key_id < len(self.entries):
            raise UnknownId(key_id)
        return self.entries[key_id]


def build_dictionary(keys: Iterable) -> Dictionary:
    """Deduplicate ``keys`` (first occurrence wins) and number them in order."""
    index: dict[CompositeKey, int] = {}
    entries = []
    for k in keys:
        k = CompositeKey(*k)
        if k not in index:
            if not all(valid_token(part) for part in k):
                raise ValueError(f"invalid composite key {tuple(k)!r}")
            index[k] = len(entries)
            entries.append(k)
    if not entries:
        raise EmptyKeySet("cannot build a dictionary from no keys")
    if len(entries) > MAX_ID + 1:
        raise ValueError("dictionary exceeds the 32-bit id space")
    return Dictionary(tuple(entries), index)


def lookup(d: Dictionary, key: CompositeKey) -> int:
    return d.lookup(key)


def reverse(d: Dictionary, key_id: int) -> CompositeKey:
    return d.reverse(key_id)


def dumps_dictionary(d: Dictionary) -> str:
    return "".join(SEP.join(k) + "\n" for k in d.entries)


def loads_dictionary(text: str) -> Dictionary:
    index: dict[CompositeKey, int] = {}
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split(SEP)
        if len(parts) != 3 or not all(parts):
            raise MalformedDictionaryFile(f"line {lineno}: expected 3 non-empty tab-separated fields")
        k = CompositeKey(*parts)
        if k in index:
            raise MalformedDictionaryFile(f"line {lineno}: duplicate key {tuple(k)!r} (first at line {index[k] + 1})")
        index[k] = len(entries)
        entries.append(k)
    if not entries:
        raise MalformedDictionaryFile("dictionary file has no entries")
    return Dictionary(tuple(entries), index)


def save_dictionary(d: Dictionary, destination) -> int:
    """Write ``d`` to a path; returns the number of bytes written."""
    data = dumps_dictionary(d).encode("utf-8")
    try:
        with open(destination, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write dictionary to {os.fspath(destination)}: {exc}") from exc
    return len(data)


def load_dictionary(source) -> Dictionary:
    try:
        with open(source, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read dictionary {os.fspath(source)}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedDictionaryFile(f"dictionary is not valid UTF-8: {exc}") from None
    return loads_dictionary(text)
