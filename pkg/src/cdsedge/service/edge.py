"""The edge node: fetch raw records from the source, compact or relay them, report timing."""

from __future__ import annotations

import asyncio
import gc
import io
import logging
import time
from contextlib import asynccontextmanager

import httpx
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response

from ..codec import CodecConfig, encode_batch, serialize_compact
from ..dictionary import Dictionary, load_dictionary
from ..errors import CdsError, SourceUnreachable, TooManyRecords
from ..records import parse_record
from .models import EdgeConfig, EdgeStatus, ErrorBody, Mode, ProcessingReport

log = logging.getLogger(__name__)


# Thread CPU time leaves out preemption by the source and client processes when
# they share a core with the edge node; "wall" is available for dedicated hosts.
TIMERS = {"cpu": time.thread_time_ns, "wall": time.perf_counter_ns}


def _report(start_ns, end_ns, mode, records_in, bytes_in, bytes_out):
    elapsed = end_ns - start_ns
    return ProcessingReport(
        processing_millis=elapsed // 1_000_000,
        processing_nanos=elapsed,
        records_in=records_in,
        bytes_in=bytes_in,
        bytes_out=bytes_out,
        mode=mode,
    )


def relay_records(raw: bytes, timer=time.thread_time_ns) -> tuple[bytes, ProcessingReport]:
    """Baseline: cache the incoming bytes and pass them on record by record, unchanged."""
    start = timer()
    cache = bytes(raw)
    out = io.BytesIO()
    count = pos = 0
    while pos < len(cache):
        nl = cache.find(b"\n", pos)
        stop = len(cache) if nl < 0 else nl + 1
        out.write(cache[pos:stop])
        pos = stop
        count += 1
    payload = out.getvalue()
    end = timer()
    return payload, _report(start, end, Mode.RELAY, count, len(raw), len(payload))


def cds_records(raw: bytes, d: Dictionary, codec: CodecConfig,
                timer=time.thread_time_ns) -> tuple[bytes, ProcessingReport]:
    """Parse the raw lines, encode them against ``d`` and serialize the compact batch."""
    start = timer()
    records = [parse_record(line) for line in raw.decode("utf-8").splitlines()]
    payload = serialize_compact(encode_batch(records, d, codec))
    end = timer()
    return payload, _report(start, end, Mode.CDS, len(records), len(raw), len(payload))


class EdgeNode:
    """One edge device.  Requests are handled strictly one at a time."""

    def __init__(self, cfg: EdgeConfig, dictionary: Dictionary, http: httpx.AsyncClient | None = None):
        self.cfg = cfg
        self.dictionary = dictionary
        self.codec = cfg.codec
        self.http = http
        self.timer = TIMERS[cfg.timer]
        self._lock = asyncio.Lock()

    async def fetch_source(self, n: int) -> bytes:
        url = self.cfg.source_url.rstrip("/") + "/data"
        try:
            r = await self.http.get(url, params={"records": n})
        except httpx.HTTPError as exc:
            raise SourceUnreachable(f"cannot reach source at {url}: {exc}") from exc
        if r.status_code != 200:
            raise SourceUnreachable(f"source answered HTTP {r.status_code}: {r.text.strip()}")
        return r.content

    def process(self, raw: bytes, mode: Mode) -> tuple[bytes, ProcessingReport]:
        if mode is Mode.CDS:
            return cds_records(raw, self.dictionary, self.codec, self.timer)
        return relay_records(raw, self.timer)

    async def handle(self, n: int, mode: Mode | None = None) -> tuple[bytes, ProcessingReport]:
        mode = mode or self.cfg.mode
        if n > self.cfg.max_records:
            raise TooManyRecords(n, self.cfg.max_records)
        async with self._lock:
            raw = await self.fetch_source(n)
            # processing runs on the event loop thread, blocking it like a sketch loop would
            return self.process(raw, mode)


def _error(status, exc_or_name, detail=None):
    name = exc_or_name if isinstance(exc_or_name, str) else type(exc_or_name).__name__
    body = ErrorBody(error=name, detail=detail if detail is not None else str(exc_or_name))
    return JSONResponse(body.model_dump(), status_code=status)


def create_edge_app(cfg: EdgeConfig, dictionary: Dictionary | None = None,
                    transport: httpx.AsyncBaseTransport | None = None) -> FastAPI:
    """Build the edge node app; the dictionary is loaded now (injection) unless given.

    ``transport`` replaces the network for cascade requests, e.g. an
    ``httpx.ASGITransport`` wrapping an in-process source app.
    """
    if dictionary is None:
        dictionary = load_dictionary(cfg.dictionary_path)
    # the table is immutable from here on; keep the collector from rescanning it
    gc.collect()
    gc.freeze()
    node = EdgeNode(cfg, dictionary)

    @asynccontextmanager
    async def lifespan(app):
        async with httpx.AsyncClient(timeout=30.0, transport=transport) as http:
            node.http = http
            log.info("edge ready: mode=%s max_records=%d source_url=%s dictionary=%d entries",
                     cfg.mode.value, cfg.max_records, cfg.source_url, len(dictionary))
            yield
        node.http = None

    app = FastAPI(title="cdsedge edge node", lifespan=lifespan)
    app.state.node = node

    @app.get("/process")
    async def process(records: str | None = None, mode: str | None = None):
        if records is None or not records.isdigit() or not records.isascii():
            return _error(400, "BadQuery", f"records must be a non-negative integer, got {records!r}")
        try:
            chosen = Mode(mode) if mode is not None else None
        except ValueError:
            return _error(400, "BadQuery", f"mode must be 'cds' or 'relay', got {mode!r}")
        try:
            payload, report = await node.handle(int(records), chosen)
        except TooManyRecords as exc:
            return _error(413, exc)
        except SourceUnreachable as exc:
            return _error(502, exc)
        except CdsError as exc:
            return _error(422, exc)
        return Response(payload, media_type="text/plain", headers=report.headers())

    @app.get("/healthz", response_model=EdgeStatus)
    async def healthz():
        return EdgeStatus(
            mode=cfg.mode,
            max_records=cfg.max_records,
            source_url=cfg.source_url,
            dictionary_size=len(dictionary),
            id_encoding=cfg.id_encoding,
            base_interval_seconds=cfg.base_interval_seconds,
            timer=cfg.timer,
        )

    return app
