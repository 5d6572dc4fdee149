"""Reference sets, submissions and per-piece grading."""
from __future__ import annotations

import json
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from ..matching import Tolerances
from ..metrics import Aggregate, MetricsReport, aggregate_submission, evaluate_piece
from ..midi import MidiError, Piece, parse_smf, read_smf
from ..ruleset import Rules, Violation, validate_piece

log = logging.getLogger(__name__)

METADATA_FILE = "metadata.json"
RUNTIME_MISSING = "runtime self-reported missing"


class LoadError(Exception):
    def __init__(self, message: str, path=None, violations: list[Violation] | None = None):
        super().__init__(message)
        self.path = path
        self.violations = violations or []


class SubmissionError(ValueError):
    """A submission that cannot be accepted (bad upload, duplicate id...)."""


@dataclass
class ReferenceSet:
    pieces: dict[str, Piece]
    directory: Path | None = None

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def instrument_count(self, piece_id: str) -> int:
        return len(self.pieces[piece_id].programs)


def load_reference_set(directory, rules: Rules = Rules()) -> ReferenceSet:
    """Load and validate every reference piece in ``directory``.

    Files come from ``manifest.json`` when present, else every ``*.mid``.
    Any unparseable or rule-breaking reference aborts the load.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise LoadError(f"{directory} is not a directory", directory)
    manifest = directory / "manifest.json"
    if manifest.exists():
        try:
            entries = json.loads(manifest.read_text())["pieces"]
            files = {e["id"]: directory / e.get("file", f"{e['id']}.mid") for e in entries}
        except (ValueError, KeyError, TypeError) as exc:
            raise LoadError(f"bad manifest: {exc}", manifest) from exc
    else:
        files = {p.stem: p for p in sorted(directory.glob("*.mid"))}
    if not files:
        raise LoadError(f"no reference pieces in {directory}", directory)

    pieces = {}
    for piece_id, path in sorted(files.items()):
        try:
            piece = read_smf(path)
        except (OSError, MidiError) as exc:
            raise LoadError(f"{path.name}: {exc}", path) from exc
        violations = validate_piece(piece, rules)
        if violations:
            rules_hit = sorted({v.rule for v in violations})
            raise LoadError(f"{path.name} breaks rule(s) {rules_hit}: {violations[0].message}",
                            path, violations)
        pieces[piece_id] = piece
    return ReferenceSet(pieces, directory)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class Submission:
    name: str
    # piece id -> SMF bytes or a path to an SMF file
    files: dict[str, object] = field(default_factory=dict)
    submission_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    received_at: str = field(default_factory=_now)
    runtime_ms: dict[str, float] | None = None

    def load(self, piece_id: str) -> Piece:
        src = self.files[piece_id]
        if isinstance(src, (bytes, bytearray)):
            return parse_smf(src)
        return read_smf(src)


def submission_from_directory(directory, name: str, **kwargs) -> Submission:
    """Estimates are ``<piece_id>.mid``; an optional ``metadata.json`` may
    carry ``{"runtime_ms": {piece_id: ms}}``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SubmissionError(f"{directory} is not a directory")
    files = {p.stem: p for p in sorted(directory.glob("*.mid"))}
    runtime = None
    meta = directory / METADATA_FILE
    if meta.exists():
        runtime = parse_runtime_metadata(meta.read_bytes())
    return Submission(name=name, files=files, runtime_ms=runtime, **kwargs)


def parse_runtime_metadata(raw: bytes) -> dict[str, float]:
    try:
        data = json.loads(raw)
        return {str(k): float(v) for k, v in data["runtime_ms"].items()}
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise SubmissionError(f"bad {METADATA_FILE}: {exc}") from exc


@dataclass
class GradeResult:
    submission: Submission
    reports: list[MetricsReport]
    aggregate: Aggregate
    annotations: dict[str, str] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "submission_id": self.submission.submission_id,
            "model_name": self.submission.name,
            "received_at": self.submission.received_at,
            "aggregate": aggregate_json(self.aggregate),
            "reports": [r.to_json() for r in self.reports],
            "annotations": dict(sorted(self.annotations.items())),
            "flags": list(self.flags),
        }


def aggregate_json(agg: Aggregate) -> dict:
    return {
        "f1": agg.f1, "precision": agg.precision, "recall": agg.recall, "overlap": agg.overlap,
        "runtime_ms": agg.runtime_ms, "onset_offset_f1": agg.onset_offset_f1, "n_pieces": agg.n_pieces,
    }


def _grade_one(piece_id: str, ref: Piece, submission: Submission, tol: Tolerances,
               runtime: Mapping[str, float]):
    runtime_ms = runtime.get(piece_id, 0.0)
    if piece_id not in submission.files:
        return MetricsReport.zero(piece_id, runtime_ms), "missing from submission"
    try:
        est = submission.load(piece_id)
    except (OSError, MidiError) as exc:
        return MetricsReport.zero(piece_id, runtime_ms), f"unparseable estimate: {exc}"
    return evaluate_piece(ref, est, tol, piece_id=piece_id, runtime_ms=runtime_ms), None


def grade_submission(submission: Submission, references: ReferenceSet,
                     tol: Tolerances = Tolerances(), workers: int | None = None) -> GradeResult:
    """Grade every reference piece; never aborts on a bad or missing estimate."""
    if not references.pieces:
        raise ValueError("reference set is empty")
    extra = sorted(set(submission.files) - set(references.pieces))
    if extra:
        log.warning("submission %s: ignoring files with no reference: %s", submission.submission_id, extra)
    flags = []
    runtime = submission.runtime_ms
    if runtime is None:
        flags.append(RUNTIME_MISSING)
        runtime = {}

    ids = sorted(references.pieces)
    jobs = [(pid, references.pieces[pid], submission, tol, runtime) for pid in ids]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda job: _grade_one(*job), jobs))
    else:
        results = [_grade_one(*job) for job in jobs]

    reports = [r for r, _ in results]
    annotations = {pid: note for pid, (_, note) in zip(ids, results) if note}
    for pid in extra:
        annotations[pid] = "ignored: no matching reference"
    return GradeResult(submission, reports, aggregate_submission(reports), annotations, flags)


def stats_records(result: GradeResult, references: ReferenceSet) -> list[dict]:
    """Per-piece rows in the format the ``stats`` command reads."""
    return [
        {
            "model": result.submission.name,
            "piece_id": r.piece_id,
            "instrument_count": references.instrument_count(r.piece_id),
            "f_measure": r.multi_onset_f1,
            "precision": r.precision,
            "recall": r.recall,
        }
        for r in result.reports
    ]
