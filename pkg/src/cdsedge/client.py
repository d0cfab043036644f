"""Client side of the testbed: request records from an edge node and time the round trip."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import httpx

from .errors import EdgeError, EdgeUnreachable
from .service.models import Mode


@dataclass
class LatencyMeasurement:
    record_amount: int
    mode: Mode
    wall_clock_seconds: float
    processing_seconds: float
    bytes_received: int = 0
    payload: bytes | None = field(default=None, repr=False)


def client_fetch(edge_url: str, n: int, mode: Mode | str = Mode.CDS, *,
                 client: httpx.Client | None = None, timeout: float = 60.0) -> LatencyMeasurement:
    """One timed request.  Wall clock spans request issue to the last body byte."""
    mode = Mode(mode)
    url = edge_url.rstrip("/") + "/process"
    params = {"records": n, "mode": mode.value}
    own = client is None
    if own:
        client = httpx.Client(timeout=timeout)
    try:
        start = time.perf_counter()
        try:
            r = client.get(url, params=params)
        except httpx.TransportError as exc:
            raise EdgeUnreachable(f"cannot reach edge at {url}: {exc}") from exc
        end = time.perf_counter()
    finally:
        if own:
            client.close()

    if r.status_code != 200:
        raise EdgeError(r.status_code, r.text)
    if "X-Processing-Nanos" in r.headers:
        processing = int(r.headers["X-Processing-Nanos"]) / 1e9
    else:
        processing = int(r.headers["X-Processing-Millis"]) / 1e3
    return LatencyMeasurement(
        record_amount=n,
        mode=mode,
        wall_clock_seconds=end - start,
        processing_seconds=processing,
        bytes_received=len(r.content),
        payload=r.content,
    )
