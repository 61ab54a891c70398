"""Query-variation evaluation: load trials, rank every query, tabulate
hits@k per backend.

A trial file is line-oriented:

    trial 1
    target #4
    query original statement text
    query a paraphrase of it

``target`` names the correct statement either as ``#<id>`` or by its exact
raw text; every trial needs one target and at least one query.  Full-line
``#`` comments and blank lines are ignored.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .engine import BackendSpec, Index, build_index, rank
from .errors import SemsearchError, TrialFileError

__all__ = [
    "Trial",
    "QueryOutcome",
    "BackendReport",
    "REPORT_KS",
    "load_trials",
    "hits_at",
    "evaluate",
    "format_report_table",
    "write_report_csv",
    "write_ranks_csv",
]

REPORT_KS = (1, 2, 3, 20)


@dataclass(frozen=True)
class Trial:
    trial_id: str
    target_id: int
    queries: tuple[str, ...]


@dataclass(frozen=True)
class QueryOutcome:
    """One backend x query cell: the target's 1-based rank, None for a miss
    (including queries that errored; ``error`` carries the diagnostic)."""

    trial_id: str
    query_no: int
    target_id: int
    rank: int | None
    error: str | None = None


@dataclass(frozen=True)
class BackendReport:
    backend: str
    outcomes: tuple[QueryOutcome, ...]

    def ranks(self) -> list[int | None]:
        return [o.rank for o in self.outcomes]


def _resolve_target(text: str, corpus, trial_id: str) -> int:
    if text.startswith("#"):
        try:
            target = int(text[1:])
        except ValueError:
            raise TrialFileError(
                f"trial {trial_id}: malformed target id {text!r}"
            ) from None
        if any(s.id == target for s in corpus):
            return target
        raise TrialFileError(f"trial {trial_id}: no statement with id {target}")
    wanted = text.strip()
    for s in corpus:
        if s.raw.strip() == wanted:
            return s.id
    raise TrialFileError(f"trial {trial_id}: target text matches no statement")


def load_trials(path, corpus) -> list[Trial]:
    """Parse a trial file and resolve every target against the corpus."""
    trials: list[Trial] = []
    current: str | None = None
    target: str | None = None
    queries: list[str] = []

    def flush():
        if current is None:
            return
        if target is None:
            raise TrialFileError(f"trial {current}: no target line")
        if not queries:
            raise TrialFileError(f"trial {current}: no query lines")
        trials.append(
            Trial(current, _resolve_target(target, corpus, current), tuple(queries))
        )

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            keyword, _, rest = line.partition(" ")
            rest = rest.strip()
            if keyword == "trial":
                flush()
                if not rest:
                    raise TrialFileError(f"line {lineno}: trial needs an id")
                current, target, queries = rest, None, []
            elif keyword == "target":
                if current is None:
                    raise TrialFileError(f"line {lineno}: target before any trial")
                if target is not None:
                    raise TrialFileError(f"trial {current}: duplicate target line")
                if not rest:
                    raise TrialFileError(f"trial {current}: empty target")
                target = rest
            elif keyword == "query":
                if current is None:
                    raise TrialFileError(f"line {lineno}: query before any trial")
                if not rest:
                    raise TrialFileError(f"trial {current}: empty query")
                queries.append(rest)
            else:
                raise TrialFileError(f"line {lineno}: unknown keyword {keyword!r}")
    flush()
    if not trials:
        raise TrialFileError(f"{path}: no trials found")
    return trials


def hits_at(ranks, k: int) -> tuple[int, Decimal]:
    """Count of ranks <= k and the percentage, half-up to 2 decimals."""
    total = len(ranks)
    if total == 0:
        raise ValueError("no ranks to aggregate")
    if k < 1:
        raise ValueError("k must be at least 1")
    count = sum(1 for r in ranks if r is not None and r <= k)
    pct = (Decimal(100 * count) / Decimal(total)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP
    )
    return count, pct


def _target_rank(result, target_id: int) -> int | None:
    for pos, (sid, _) in enumerate(result.hits, start=1):
        if sid == target_id:
            return pos
    return None


def evaluate(corpus, trials, named_specs, stops, k: int = 20,
             jobs: int = 1) -> list[BackendReport]:
    """Rank every trial query under every backend.

    ``named_specs`` is an ordered list of (name, BackendSpec).  A failing
    query becomes a miss with its diagnostic recorded; the run continues.
    Outcomes are assembled in trial/query order regardless of ``jobs``.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    cells = [
        (trial, query_no, query)
        for trial in trials
        for query_no, query in enumerate(trial.queries, start=1)
    ]
    reports = []
    for name, spec in named_specs:
        index = build_index(corpus, spec, stops)

        def outcome(cell, index: Index = index) -> QueryOutcome:
            trial, query_no, query = cell
            try:
                result = rank(index, query, k=k,
                              query_id=f"{trial.trial_id}.{query_no}")
                return QueryOutcome(trial.trial_id, query_no, trial.target_id,
                                    _target_rank(result, trial.target_id))
            except SemsearchError as exc:
                return QueryOutcome(trial.trial_id, query_no, trial.target_id,
                                    None, error=str(exc))

        if jobs == 1:
            outcomes = [outcome(cell) for cell in cells]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(outcome, cells))
        reports.append(BackendReport(name, tuple(outcomes)))
    return reports


def _cells(report: BackendReport) -> list[str]:
    ranks = report.ranks()
    out = []
    for k in REPORT_KS:
        count, pct = hits_at(ranks, k)
        out.append(f"{count} ({pct}%)")
    return out


def format_report_table(reports) -> str:
    """Aligned text table: backend, hits@k cells, total query count."""
    header = ["backend"] + [f"hits@{k}" for k in REPORT_KS] + ["queries"]
    rows = [header]
    for report in reports:
        rows.append([report.backend] + _cells(report)
                    + [str(len(report.outcomes))])
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines) + "\n"


def _csv_text(write_rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    write_rows(writer)
    return buf.getvalue()


def write_report_csv(reports, path) -> None:
    """Machine-readable summary, one row per backend."""

    def rows(writer):
        header = ["backend"]
        for k in REPORT_KS:
            header += [f"hits{k}_count", f"hits{k}_pct"]
        header.append("queries")
        writer.writerow(header)
        for report in reports:
            ranks = report.ranks()
            row = [report.backend]
            for k in REPORT_KS:
                count, pct = hits_at(ranks, k)
                row += [str(count), str(pct)]
            row.append(str(len(report.outcomes)))
            writer.writerow(row)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(rows))


def write_ranks_csv(reports, path) -> None:
    """Per-query detail: every backend x query cell with the target's rank,
    ``miss`` when outside the top k, or the recorded error."""

    def rows(writer):
        writer.writerow(["backend", "trial", "query", "target", "rank"])
        for report in reports:
            for o in report.outcomes:
                if o.error is not None:
                    cell = f"error: {o.error}"
                elif o.rank is None:
                    cell = "miss"
                else:
                    cell = str(o.rank)
                writer.writerow([report.backend, o.trial_id, str(o.query_no),
                                 str(o.target_id), cell])

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(rows))
