"""The data source: a plain HTTP server hosting raw price files named ``prices-<N>.tsv``."""

from __future__ import annotations

import re
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response

from .models import ErrorBody, SourceStatus

_FILE_RE = re.compile(r"prices-([0-9]+)\.tsv")


def scan_data_dir(data_dir) -> dict[int, Path]:
    found = {}
    for p in Path(data_dir).iterdir():
        m = _FILE_RE.fullmatch(p.name)
        if m and p.is_file():
            found[int(m.group(1))] = p
    return dict(sorted(found.items()))


def pick_file(files: dict[int, Path], n: int) -> Path | None:
    """Exact match if hosted, otherwise the smallest file with at least ``n`` records."""
    if n in files:
        return files[n]
    for size, path in files.items():
        if size >= n:
            return path
    return None


def first_lines(path: Path, n: int) -> bytes:
    out = []
    with open(path, "rb") as fh:
        for line in fh:
            if len(out) == n:
                break
            out.append(line if line.endswith(b"\n") else line + b"\n")
    return b"".join(out)


def _error(status, error, detail):
    return JSONResponse(ErrorBody(error=error, detail=detail).model_dump(), status_code=status)


def create_source_app(data_dir) -> FastAPI:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"data directory {data_dir} does not exist")
    app = FastAPI(title="cdsedge source")

    @app.get("/data")
    def get_data(records: str | None = None):
        if records is None or not records.isdigit() or not records.isascii():
            return _error(400, "BadQuery", f"records must be a non-negative integer, got {records!r}")
        n = int(records)
        if n == 0:
            return Response(b"", media_type="text/plain")
        path = pick_file(scan_data_dir(data_dir), n)
        if path is None:
            return _error(404, "NoSuchData", f"no hosted file holds {n} records")
        body = first_lines(path, n)
        if body.count(b"\n") < n:
            return _error(404, "NoSuchData", f"{path.name} holds fewer than {n} records")
        return Response(body, media_type="text/plain")

    @app.get("/healthz", response_model=SourceStatus)
    def healthz():
        files = scan_data_dir(data_dir)
        return SourceStatus(data_dir=str(data_dir), files={k: p.name for k, p in files.items()})

    return app
