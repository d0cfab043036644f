"""Exception types shared across the package."""


class CdsError(Exception):
    """Base class for every error raised by cdsedge."""


# record parsing

class MalformedLine(CdsError, ValueError):
    pass


class BadTag(MalformedLine):
    pass


class BadPrice(MalformedLine):
    pass


class BadOffset(MalformedLine):
    pass


# dictionary

class EmptyKeySet(CdsError, ValueError):
    pass


class UnknownKey(CdsError, KeyError):
    """A composite key is missing from the lookup table.

    ``index`` is the position of the offending record in its batch, when known.
    """

    def __init__(self, key, index=None):
        super().__init__(key)
        self.key = key
        self.index = index

    def __str__(self):
        where = f" (record {self.index})" if self.index is not None else ""
        return f"unknown composite key {tuple(self.key)!r}{where}"


class UnknownId(CdsError, KeyError):
    def __str__(self):
        return f"unknown dictionary id {self.args[0]!r}"


class MalformedDictionaryFile(CdsError, ValueError):
    pass


class IoFailure(CdsError, OSError):
    pass


# codec

class UnsortedInput(CdsError, ValueError):
    pass


class CorruptBitstream(CdsError, ValueError):
    pass


class EmptyFrequencyMap(CdsError, ValueError):
    pass


class MissingCode(CdsError, KeyError):
    pass


class MalformedCompactPayload(CdsError, ValueError):
    pass


# testbed

class TooManyRecords(CdsError):
    def __init__(self, requested, limit):
        super().__init__(f"{requested} records requested, edge node copes with at most {limit}")
        self.requested = requested
        self.limit = limit


class SourceUnreachable(CdsError):
    pass


class EdgeUnreachable(CdsError):
    pass


class EdgeError(CdsError):
    """The edge node answered with a non-200 status."""

    def __init__(self, status_code, body):
        super().__init__(f"edge returned HTTP {status_code}: {body}")
        self.status_code = status_code
        self.body = body


class DegenerateMeasurement(CdsError, ValueError):
    pass
