"""Raw spot-price records: the line format, parsing/rendering, and a seeded generator.

A raw line carries six TAB-separated fields::

    SPOTINSTANCEPRICE  0.041500  2019-05-08T17:08:38+0000  m3.large  Linux/UNIX  us-east-1a
"""

from __future__ import annotations

import random
import re
from functools import lru_cache
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import NamedTuple

from .errors import BadOffset, BadPrice, BadTag, MalformedLine

TAG = "SPOTINSTANCEPRICE"
UTC_OFFSET = "+0000"
SEP = "\t"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_PRICE_RE = re.compile(r"(0|[1-9][0-9]*)\.([0-9]{6})")
_TS_RE = re.compile(r"([0-9]{4})-([0-9]{2})-([0-9]{2})T([0-9]{2}):([0-9]{2}):([0-9]{2})([+-][0-9]{4})")


class CompositeKey(NamedTuple):
    """(instance type, operating system, zone): identifies one service instance."""

    instance_type: str
    operating_system: str
    zone: str


def valid_token(token: str) -> bool:
    # splitlines() also breaks on \x1c, \u2028 and friends; none may appear in a field
    return bool(token) and SEP not in token and token.splitlines() == [token]


@dataclass(frozen=True, slots=True)
class SpotPriceRecord:
    price_micro: int
    timestamp_epoch: int
    instance_type: str
    operating_system: str
    zone: str
    tag: str = TAG

    def __post_init__(self):
        if self.tag != TAG:
            raise BadTag(f"tag must be {TAG!r}, got {self.tag!r}")
        if self.price_micro < 0 or self.price_micro % 100:
            raise BadPrice(f"price_micro must be a non-negative multiple of 100, got {self.price_micro}")
        if self.timestamp_epoch < 0:
            raise MalformedLine(f"negative timestamp {self.timestamp_epoch}")
        for name in ("instance_type", "operating_system", "zone"):
            if not valid_token(getattr(self, name)):
                raise MalformedLine(f"{name} is empty or contains a separator: {getattr(self, name)!r}")

    @property
    def key(self) -> CompositeKey:
        return CompositeKey(self.instance_type, self.operating_system, self.zone)


def format_price(price_micro: int) -> str:
    return f"{price_micro // 1_000_000}.{price_micro % 1_000_000:06d}"


def format_timestamp(epoch: int) -> str:
    """Seconds since epoch -> ``YYYY-MM-DDTHH:MM:SS`` (UTC, no offset)."""
    return (_EPOCH + timedelta(seconds=epoch)).strftime("%Y-%m-%dT%H:%M:%S")


def parse_timestamp(text: str) -> int:
    """Inverse of :func:`format_timestamp`; raises ValueError on bad input."""
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S").replace(tzinfo=timezone.utc)
    return (dt - _EPOCH) // timedelta(seconds=1)


def parse_record(line: str) -> SpotPriceRecord:
    if line.endswith("\n"):
        line = line[:-1]
    fields = line.split(SEP)
    if len(fields) != 6:
        raise MalformedLine(f"expected 6 tab-separated fields, got {len(fields)}")
    tag, price, stamp, itype, os_name, zone = fields
    if tag != TAG:
        raise BadTag(f"unexpected record tag {tag!r}")

    m = _PRICE_RE.fullmatch(price)
    if m is None:
        raise MalformedLine(f"unparseable price {price!r}")
    if not m.group(2).endswith("00"):
        raise BadPrice(f"price {price!r} has non-zero trailing digits")
    price_micro = int(m.group(1)) * 1_000_000 + int(m.group(2))

    m = _TS_RE.fullmatch(stamp)
    if m is None:
        raise MalformedLine(f"unparseable timestamp {stamp!r}")
    if m.group(7) != UTC_OFFSET:
        raise BadOffset(f"timestamp offset must be {UTC_OFFSET}, got {m.group(7)!r}")
    try:
        dt = datetime(*(int(g) for g in m.groups()[:6]), tzinfo=timezone.utc)
    except ValueError as exc:
        raise MalformedLine(f"invalid timestamp {stamp!r}: {exc}") from None
    epoch = (dt - _EPOCH) // timedelta(seconds=1)

    return SpotPriceRecord(price_micro, epoch, itype, os_name, zone)


def render_record(r: SpotPriceRecord) -> str:
    """Render one record as a raw line, without the trailing newline."""
    return SEP.join((
        r.tag,
        format_price(r.price_micro),
        format_timestamp(r.timestamp_epoch) + UTC_OFFSET,
        r.instance_type,
        r.operating_system,
        r.zone,
    ))


def parse_lines(text: str) -> list[SpotPriceRecord]:
    return [parse_record(line) for line in text.splitlines()]


def render_lines(records) -> str:
    return "".join(render_record(r) + "\n" for r in records)


# -- synthetic data ---------------------------------------------------------

# 2019-05-08T00:00:00Z
DEFAULT_START_EPOCH = 1557273600


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 1
    start_epoch: int = DEFAULT_START_EPOCH
    max_step_seconds: int = 300
    key_universe: tuple[CompositeKey, ...] = field(default_factory=lambda: default_key_universe())
    price_range_micro: tuple[int, int] = (3_000, 2_000_000)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.start_epoch < 0:
            raise ValueError("start_epoch must be non-negative")
        if self.max_step_seconds < 1:
            raise ValueError("max_step_seconds must be >= 1")
        if not self.key_universe:
            raise ValueError("key_universe must not be empty")
        lo, hi = self.price_range_micro
        if lo > hi or lo < 0 or lo % 100 or hi % 100:
            raise ValueError("price_range_micro must be (min, max), min <= max, both multiples of 100")


def gen_records(n: int, cfg: GeneratorConfig | None = None) -> list[SpotPriceRecord]:
    """Generate ``n`` records with non-decreasing timestamps, deterministic in ``cfg.seed``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    cfg = cfg or GeneratorConfig()
    rng = random.Random(cfg.seed)
    universe = cfg.key_universe
    lo, hi = cfg.price_range_micro[0] // 100, cfg.price_range_micro[1] // 100
    t = cfg.start_epoch
    out = []
    for i in range(n):
        if i:
            t += rng.randint(0, cfg.max_step_seconds)
        key = universe[rng.randrange(len(universe))]
        out.append(SpotPriceRecord(rng.randint(lo, hi) * 100, t, *key))
    return out


# -- key universe -----------------------------------------------------------

_FAMILIES = [f"{p}{g}" for g in range(1, 9) for p in "mcrtxzidhgpfaus"][:67]
_SIZES = ["medium", "large", "xlarge", "2xlarge", "4xlarge", "8xlarge"]
OPERATING_SYSTEMS = (
    "Linux/UNIX",
    "SUSE Linux",
    "Red Hat Enterprise Linux",
    "Windows",
    "Linux/UNIX (Amazon VPC)",
    "SUSE Linux (Amazon VPC)",
    "Red Hat Enterprise Linux (Amazon VPC)",
    "Windows (Amazon VPC)",
)
_REGIONS = [
    "us-east-1", "us-east-2", "us-west-1", "us-west-2", "ca-central-1", "sa-east-1",
    "eu-west-1", "eu-west-2", "eu-west-3", "eu-central-1", "eu-north-1",
    "ap-southeast-1", "ap-southeast-2", "ap-northeast-1",
]
INSTANCE_TYPES = tuple(f"{fam}.{size}" for fam in _FAMILIES for size in _SIZES)
ZONES = tuple(f"{region}{letter}" for region in _REGIONS for letter in "abcd")

assert len(INSTANCE_TYPES) == 402 and len(OPERATING_SYSTEMS) == 8 and len(ZONES) == 56


@lru_cache(maxsize=None)
def full_key_universe() -> tuple[CompositeKey, ...]:
    """All 402 x 8 x 56 = 180096 composite keys, instance type varying slowest."""
    return tuple(
        CompositeKey(t, o, z)
        for t in INSTANCE_TYPES
        for o in OPERATING_SYSTEMS
        for z in ZONES
    )


@lru_cache(maxsize=8)
def default_key_universe(size: int = 48, seed: int = 0) -> tuple[CompositeKey, ...]:
    """A fixed sample of the full universe: the instances a small edge feed actually sees."""
    universe = full_key_universe()
    return tuple(random.Random(seed).sample(universe, size))
