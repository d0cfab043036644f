"""Latency sweeps over record amounts, computation/communication ratios, and reports."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from statistics import fmean
from typing import Callable, Sequence

import httpx

from .client import LatencyMeasurement, client_fetch
from .errors import CdsError, DegenerateMeasurement
from .service.models import Mode

log = logging.getLogger(__name__)

DEFAULT_AMOUNTS = (12, 25, 50, 100, 200, 400, 600)
DEFAULT_REPETITIONS = 5

# (record amount, CDS wall-clock, CDS processing, non-CDS wall-clock, non-CDS processing), seconds
TABLE_I = (
    (12, 1.852, 0.735, 1.921, 0.539),
    (25, 2.935, 1.765, 2.992, 1.012),
    (50, 5.039, 3.533, 4.902, 1.935),
    (100, 9.148, 6.950, 8.672, 3.830),
    (200, 17.258, 13.791, 16.633, 7.713),
    (400, 33.588, 27.199, 31.837, 14.868),
    (600, 50.765, 41.630, 48.487, 23.314),
)

CSV_COLUMNS = ["record_amount", "cds_wall", "cds_proc", "relay_wall", "relay_proc",
               "cds_ratio", "relay_ratio", "wall_diff", "proc_diff"]


def compute_ratio(m: LatencyMeasurement) -> float:
    """Computation-to-communication ratio: processing / (wall clock - processing)."""
    communication = m.wall_clock_seconds - m.processing_seconds
    if communication <= 0:
        raise DegenerateMeasurement(
            f"wall clock {m.wall_clock_seconds} does not exceed processing {m.processing_seconds}"
        )
    return m.processing_seconds / communication


@dataclass
class BenchRow:
    record_amount: int
    cds: LatencyMeasurement
    relay: LatencyMeasurement
    cds_ratio: float | None = field(init=False)
    relay_ratio: float | None = field(init=False)
    wall_diff: float = field(init=False)
    proc_diff: float = field(init=False)
    degenerate: list[Mode] = field(init=False, default_factory=list)

    def __post_init__(self):
        self.cds_ratio = self._ratio(self.cds)
        self.relay_ratio = self._ratio(self.relay)
        self.wall_diff = self.cds.wall_clock_seconds - self.relay.wall_clock_seconds
        self.proc_diff = self.cds.processing_seconds - self.relay.processing_seconds

    def _ratio(self, m):
        try:
            return compute_ratio(m)
        except DegenerateMeasurement:
            self.degenerate.append(m.mode)
            return None


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    repetitions: int = 1
    corpus_descriptor: str = ""
    complete: bool = True
    error: str | None = None
    samples: list[LatencyMeasurement] = field(default_factory=list, repr=False)

    def sort(self):
        self.rows.sort(key=lambda r: r.record_amount)


class SweepAborted(CdsError):
    def __init__(self, report: BenchReport, cause: Exception):
        super().__init__(f"sweep aborted: {cause}")
        self.report = report


def average(ms: Sequence[LatencyMeasurement]) -> LatencyMeasurement:
    return LatencyMeasurement(
        record_amount=ms[0].record_amount,
        mode=ms[0].mode,
        wall_clock_seconds=fmean(m.wall_clock_seconds for m in ms),
        processing_seconds=fmean(m.processing_seconds for m in ms),
        bytes_received=round(fmean(m.bytes_received for m in ms)),
    )


def run_sweep(amounts: Sequence[int], repetitions: int, edge_url: str, *,
              warmup: int = 0, order: str = "interleaved", keep_samples: bool = False,
              corpus_descriptor: str = "",
              on_sample: Callable[[LatencyMeasurement], None] | None = None) -> BenchReport:
    """Measure every amount in both modes; requests are strictly sequential.

    With ``order="interleaved"`` each repetition round visits every (amount, mode)
    once, so slow and fast phases of the host spread evenly over all points;
    ``"blocked"`` runs all repetitions of one point back to back.  ``warmup``
    requests per point are sent first and discarded.

    A failing request raises :class:`SweepAborted`, whose ``report`` holds the rows
    finished so far with ``complete`` set to False.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if order not in ("interleaved", "blocked"):
        raise ValueError(f"unknown sweep order {order!r}")
    amounts = sorted(amounts)
    points = [(n, mode) for n in amounts for mode in (Mode.CDS, Mode.RELAY)]
    if order == "interleaved":
        schedule = [p for _ in range(repetitions) for p in points]
    else:
        schedule = [p for p in points for _ in range(repetitions)]

    report = BenchReport(repetitions=repetitions, corpus_descriptor=corpus_descriptor)
    runs: dict[tuple[int, Mode], list[LatencyMeasurement]] = {p: [] for p in points}
    with httpx.Client(timeout=120.0) as client:
        try:
            for n, mode in points:
                for _ in range(warmup):
                    client_fetch(edge_url, n, mode, client=client)
            for n, mode in schedule:
                m = client_fetch(edge_url, n, mode, client=client)
                if on_sample is not None:
                    on_sample(m)
                if keep_samples:
                    report.samples.append(m)
                else:
                    m.payload = None
                runs[n, mode].append(m)
        except CdsError as exc:
            report.complete = False
            report.error = str(exc)
            report.rows = _rows(amounts, runs, repetitions)
            raise SweepAborted(report, exc) from exc
    report.rows = _rows(amounts, runs, repetitions)
    return report


def _rows(amounts, runs, repetitions) -> list[BenchRow]:
    """Rows for every amount whose both modes got all their repetitions."""
    rows = []
    for n in amounts:
        cds, relay = runs[n, Mode.CDS], runs[n, Mode.RELAY]
        if len(cds) < repetitions or len(relay) < repetitions:
            continue
        row = BenchRow(n, average(cds), average(relay))
        if row.degenerate:
            log.warning("record amount %d: degenerate measurement for %s", n,
                        ", ".join(m.value for m in row.degenerate))
        rows.append(row)
    return rows


def check_trends(report: BenchReport, max_violations: int = 1, rel_tol: float = 0.10) -> list[str]:
    """Direction-of-effect checks on a live sweep; returns a list of failures.

    Per row, mean CDS processing must be at least the relay's.  Within each mode, mean
    processing must not decrease with the record amount, except for at most
    ``max_violations`` adjacent pairs that each drop by no more than ``rel_tol``.
    """
    failures = []
    rows = sorted(report.rows, key=lambda r: r.record_amount)
    for r in rows:
        if r.cds.processing_seconds < r.relay.processing_seconds:
            failures.append(f"{r.record_amount} records: CDS processing {r.cds.processing_seconds:.6f}s "
                            f"below relay {r.relay.processing_seconds:.6f}s")
    for mode in (Mode.CDS, Mode.RELAY):
        series = [(r.record_amount, (r.cds if mode is Mode.CDS else r.relay).processing_seconds) for r in rows]
        drops = []
        for (n0, p0), (n1, p1) in zip(series, series[1:]):
            if p1 < p0:
                drops.append((n0, n1, (p0 - p1) / p0))
        if len(drops) > max_violations:
            failures.append(f"{mode.value}: processing decreases at {len(drops)} adjacent pairs "
                            f"(allowed {max_violations})")
        for n0, n1, rel in drops:
            if rel > rel_tol:
                failures.append(f"{mode.value}: processing drops {rel:.1%} from {n0} to {n1} records "
                                f"(allowed {rel_tol:.0%})")
    return failures


# -- the published measurements ---------------------------------------------

def fixture_report() -> BenchReport:
    rows = [
        BenchRow(n, LatencyMeasurement(n, Mode.CDS, cw, cp), LatencyMeasurement(n, Mode.RELAY, rw, rp))
        for n, cw, cp, rw, rp in TABLE_I
    ]
    return BenchReport(rows=rows, repetitions=1, corpus_descriptor="published Table I values")


@dataclass
class FixtureResult:
    passed: bool
    cds_ratios: list[float]
    relay_ratios: list[float]
    failures: list[str]


def paper_fixture_check() -> FixtureResult:
    """Recompute ratios over the published table and check its two orderings.

    CDS processing must exceed relay processing on every row, and the CDS ratio
    must strictly increase with the record amount.
    """
    report = fixture_report()
    failures = []
    cds = [r.cds_ratio for r in report.rows]
    relay = [r.relay_ratio for r in report.rows]
    for r in report.rows:
        if not r.cds.processing_seconds > r.relay.processing_seconds:
            failures.append(f"row {r.record_amount}: CDS processing does not exceed non-CDS processing")
    for a, b, x, y in zip(report.rows, report.rows[1:], cds, cds[1:]):
        if not y > x:
            failures.append(f"cds ratio does not increase from {a.record_amount} ({x:.6f}) "
                            f"to {b.record_amount} ({y:.6f})")
    return FixtureResult(not failures, cds, relay, failures)


# -- rendering --------------------------------------------------------------

def _num(x, digits=6):
    return "" if x is None else f"{x:.{digits}f}"


def emit_report(report: BenchReport, fmt: str = "csv", precision: int = 6) -> bytes:
    rows = sorted(report.rows, key=lambda r: r.record_amount)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([
                r.record_amount,
                _num(r.cds.wall_clock_seconds, precision), _num(r.cds.processing_seconds, precision),
                _num(r.relay.wall_clock_seconds, precision), _num(r.relay.processing_seconds, precision),
                _num(r.cds_ratio), _num(r.relay_ratio),
                _num(r.wall_diff, precision), _num(r.proc_diff, precision),
            ])
        return buf.getvalue().encode("utf-8")
    if fmt == "markdown":
        lines = [
            "| Record Amount | CDS Wall-clock Latency | CDS Processing Latency "
            "| Non-CDS Wall-clock Latency | Non-CDS Processing Latency |",
            "|---|---|---|---|---|",
        ]
        for r in rows:
            cells = [r.cds.wall_clock_seconds, r.cds.processing_seconds,
                     r.relay.wall_clock_seconds, r.relay.processing_seconds]
            lines.append(f"| {r.record_amount} | " + " | ".join(f"{c:.{precision}f}s" for c in cells) + " |")
        if not report.complete:
            lines.append("")
            lines.append(f"INCOMPLETE: {report.error}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")
