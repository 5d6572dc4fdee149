"""Append-only JSON-lines result store and the leaderboard built from it.

Each graded submission is written as one block: a ``report`` line per piece
followed by a ``commit`` line.  Replay applies a submission only once its
commit line is seen, so a torn write can never surface half a submission.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics import MetricsReport, aggregate_submission
from .grading import GradeResult

log = logging.getLogger(__name__)

CSV_HEADER = ("rank", "model_name", "f1", "precision", "recall", "overlap", "runtime_ms")


class StoreError(Exception):
    pass


class DuplicateSubmission(StoreError):
    pass


@dataclass
class StoredSubmission:
    submission_id: str
    model_name: str
    received_at: str
    seq: int  # commit order in the log
    reports: dict[str, MetricsReport] = field(default_factory=dict)
    annotations: dict[str, str] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        ordered = [self.reports[k] for k in sorted(self.reports)]
        agg = aggregate_submission(ordered) if ordered else None
        return {
            "submission_id": self.submission_id,
            "model_name": self.model_name,
            "received_at": self.received_at,
            "status": "graded",
            "aggregate": None if agg is None else {
                "f1": agg.f1, "precision": agg.precision, "recall": agg.recall,
                "overlap": agg.overlap, "runtime_ms": agg.runtime_ms,
            },
            "reports": [r.to_json() for r in ordered],
            "annotations": dict(sorted(self.annotations.items())),
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class LeaderboardEntry:
    rank: int
    model_name: str
    f1: float
    precision: float
    recall: float
    overlap: float
    runtime_ms: float

    def to_json(self) -> dict:
        return {
            "rank": self.rank, "model_name": self.model_name,
            "f1": round(self.f1, 4), "precision": round(self.precision, 4),
            "recall": round(self.recall, 4), "overlap": round(self.overlap, 4),
            "runtime_ms": round(self.runtime_ms, 2),
        }

    def csv_row(self) -> list[str]:
        return [str(self.rank), self.model_name, f"{self.f1:.4f}", f"{self.precision:.4f}",
                f"{self.recall:.4f}", f"{self.overlap:.4f}", f"{self.runtime_ms:.2f}"]


def build_leaderboard(submissions) -> list[LeaderboardEntry]:
    """Latest submission per model, ranked by F1 (earlier submission wins ties)."""
    latest: dict[str, StoredSubmission] = {}
    for sub in submissions:
        cur = latest.get(sub.model_name)
        if cur is None or (sub.received_at, sub.seq) > (cur.received_at, cur.seq):
            latest[sub.model_name] = sub
    rows = []
    for sub in latest.values():
        if not sub.reports:
            continue
        agg = aggregate_submission([sub.reports[k] for k in sorted(sub.reports)])
        rows.append((agg, sub))
    rows.sort(key=lambda r: (-r[0].f1, r[1].received_at, r[1].seq))
    return [
        LeaderboardEntry(rank, sub.model_name, agg.f1, agg.precision, agg.recall, agg.overlap, agg.runtime_ms)
        for rank, (agg, sub) in enumerate(rows, start=1)
    ]


def leaderboard_csv(entries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for e in entries:
        writer.writerow(e.csv_row())
    return buf.getvalue()


def leaderboard_json(entries) -> str:
    return json.dumps([e.to_json() for e in entries], indent=2)


class Store:
    """JSON-lines log with an in-memory index rebuilt on open.

    All writes go through one lock; readers take a snapshot under the same
    lock, so they never see a submission half applied.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._subs: dict[str, StoredSubmission] = {}
        self._seq = 0
        self._valid_size = 0
        if self.path.exists():
            self._replay()
            if self.path.stat().st_size > self._valid_size:
                log.warning("%s: truncating uncommitted tail", self.path)
                self._rollback()
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()

    # -- replay

    def _replay(self):
        pending: dict[str, list[dict]] = {}
        size = 0
        with open(self.path, "rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.endswith(b"\n"):
                    log.warning("%s: ignoring torn final line %d", self.path, lineno)
                    break
                try:
                    rec = json.loads(raw)
                except ValueError as exc:
                    raise StoreError(f"{self.path}:{lineno}: corrupt record: {exc}") from exc
                size += len(raw)
                if rec.get("kind") == "report":
                    pending.setdefault(rec["submission_id"], []).append(rec)
                elif rec.get("kind") == "commit":
                    self._apply(rec, pending.pop(rec["submission_id"], []))
                    self._valid_size = size
                else:
                    raise StoreError(f"{self.path}:{lineno}: unknown record kind {rec.get('kind')!r}")
        if pending:
            log.warning("%s: ignoring uncommitted records for %s", self.path, sorted(pending))

    def _apply(self, commit: dict, reports: list[dict]):
        sid = commit["submission_id"]
        sub = self._subs.get(sid)
        if sub is None or not commit.get("regrade"):
            sub = StoredSubmission(sid, commit["model_name"], commit["received_at"], self._seq)
            self._subs[sid] = sub
        self._seq += 1
        for rec in reports:
            # a later record for the same piece supersedes the earlier one
            sub.reports[rec["piece_id"]] = MetricsReport.from_json(rec["report"])
            if rec.get("annotation"):
                sub.annotations[rec["piece_id"]] = rec["annotation"]
            else:
                sub.annotations.pop(rec["piece_id"], None)
        sub.flags = list(commit.get("flags", []))

    # -- writing

    def append(self, result: GradeResult, regrade: bool = False) -> None:
        sub = result.submission
        lines = []
        for report in result.reports:
            lines.append({"kind": "report", "submission_id": sub.submission_id, "piece_id": report.piece_id,
                          "report": report.to_json(), "annotation": result.annotations.get(report.piece_id)})
        commit = {"kind": "commit", "submission_id": sub.submission_id, "model_name": sub.name,
                  "received_at": sub.received_at, "n_pieces": len(result.reports), "flags": result.flags}
        if regrade:
            commit["regrade"] = True
        lines.append(commit)
        payload = "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines).encode()

        with self._lock:
            if sub.submission_id in self._subs and not regrade:
                raise DuplicateSubmission(f"submission id {sub.submission_id!r} already stored")
            if regrade and sub.submission_id not in self._subs:
                raise StoreError(f"cannot regrade unknown submission {sub.submission_id!r}")
            try:
                with open(self.path, "ab") as fh:
                    fh.write(payload)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                self._rollback()
                raise StoreError(f"append to {self.path} failed: {exc}") from exc
            self._valid_size += len(payload)
            self._apply(commit, lines[:-1])

    def _rollback(self):
        try:
            with open(self.path, "r+b") as fh:
                fh.truncate(self._valid_size)
        except OSError:
            log.exception("could not roll back %s", self.path)

    # -- reading

    def __contains__(self, submission_id: str) -> bool:
        with self._lock:
            return submission_id in self._subs

    def get(self, submission_id: str) -> StoredSubmission | None:
        with self._lock:
            sub = self._subs.get(submission_id)
            if sub is None:
                return None
            return StoredSubmission(sub.submission_id, sub.model_name, sub.received_at, sub.seq,
                                    dict(sub.reports), dict(sub.annotations), list(sub.flags))

    def submissions(self) -> list[StoredSubmission]:
        with self._lock:
            return [StoredSubmission(s.submission_id, s.model_name, s.received_at, s.seq,
                                     dict(s.reports), dict(s.annotations), list(s.flags))
                    for s in self._subs.values()]

    def leaderboard(self) -> list[LeaderboardEntry]:
        return build_leaderboard(self.submissions())


def update_leaderboard(store: Store, result: GradeResult, regrade: bool = False) -> list[LeaderboardEntry]:
    store.append(result, regrade=regrade)
    return store.leaderboard()
