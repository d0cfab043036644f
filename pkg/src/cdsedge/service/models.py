"""Wire-level models shared by the source, the edge node and the client."""

from __future__ import annotations

import enum
from typing import Literal

from pydantic import BaseModel, Field

from ..codec import DEFAULT_BASE_INTERVAL, CodecConfig, IdEncoding

DEFAULT_MAX_RECORDS = 650


class Mode(str, enum.Enum):
    CDS = "cds"
    RELAY = "relay"


class EdgeConfig(BaseModel):
    source_url: str = "http://127.0.0.1:8000"
    mode: Mode = Mode.CDS
    max_records: int = Field(DEFAULT_MAX_RECORDS, ge=1)
    dictionary_path: str
    base_interval_seconds: int = Field(DEFAULT_BASE_INTERVAL, ge=1)
    id_encoding: IdEncoding = IdEncoding.BYTEWISE
    timer: Literal["cpu", "wall"] = "cpu"

    @property
    def codec(self) -> CodecConfig:
        return CodecConfig(self.base_interval_seconds, self.id_encoding)


class ProcessingReport(BaseModel):
    """What the edge node says about one request.

    ``processing_millis`` is the integer millisecond figure an on-device timer would
    give; ``processing_nanos`` is the same interval at full timer resolution.  Neither
    covers fetching from the source or writing the response.
    """

    processing_millis: int = Field(ge=0)
    processing_nanos: int = Field(ge=0)
    records_in: int = Field(ge=0)
    bytes_in: int = Field(ge=0)
    bytes_out: int = Field(ge=0)
    mode: Mode

    def headers(self) -> dict[str, str]:
        return {
            "X-Processing-Millis": str(self.processing_millis),
            "X-Processing-Nanos": str(self.processing_nanos),
            "X-Records": str(self.records_in),
            "X-Bytes-In": str(self.bytes_in),
            "X-Mode": self.mode.value,
        }


class EdgeStatus(BaseModel):
    mode: Mode
    max_records: int
    source_url: str
    dictionary_size: int
    id_encoding: IdEncoding
    base_interval_seconds: int
    timer: str


class SourceStatus(BaseModel):
    data_dir: str
    files: dict[int, str]


class ErrorBody(BaseModel):
    error: str
    detail: str
