"""Precision / recall / F1, overlap ratio and the multi-instrument onset F1."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .matching import MatchResult, Tolerances, match_onset, match_onset_offset
from .midi import Note, Piece

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def prf(tp: int, fp: int, fn: int) -> PRF:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom > 0 else 0.0
    return PRF(precision, recall, f1)


def interval_iou(a_on: float, a_off: float, b_on: float, b_off: float) -> float:
    inter = max(0.0, min(a_off, b_off) - max(a_on, b_on))
    union = max(a_off, b_off) - min(a_on, b_on)
    return inter / union if union > 0 else 0.0


def average_overlap_ratio(pairs: Sequence[tuple[int, int]], ref: Sequence[Note], est: Sequence[Note]) -> float:
    """Mean interval IoU over matched ``(ref_index, est_index)`` pairs; 0 when empty."""
    if not pairs:
        return 0.0
    total = sum(interval_iou(ref[i].onset, ref[i].offset, est[j].onset, est[j].offset) for i, j in pairs)
    return total / len(pairs)


def _program_lists(ref: Piece, est: Piece):
    ref_notes, est_notes = ref.notes_by_program(), est.notes_by_program()
    programs = sorted(set(ref_notes) | set(est_notes))
    return [(p, ref_notes.get(p, ()), est_notes.get(p, ())) for p in programs]


def piece_multi_onset_f1(ref: Piece, est: Piece, tol: Tolerances = Tolerances()) -> tuple[float, dict[int, PRF]]:
    """Per-instrument onset F1 averaged without weights over the union of programs.

    An instrument present on only one side scores 0, so hallucinated and
    missed instruments both cost score.
    """
    per_instrument = {}
    for program, r, e in _program_lists(ref, est):
        m = match_onset(r, e, tol)
        per_instrument[program] = prf(m.tp, m.fp, m.fn)
    if not per_instrument:
        return 0.0, {}
    return sum(v.f1 for v in per_instrument.values()) / len(per_instrument), per_instrument


@dataclass(frozen=True)
class MetricsReport:
    piece_id: str
    multi_onset_f1: float
    precision: float
    recall: float
    f1: float
    onset_offset_f1: float
    overlap: float
    runtime_ms: float
    per_instrument: Mapping[int, PRF] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["per_instrument"] = {str(p): asdict(v) for p, v in sorted(self.per_instrument.items())}
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "MetricsReport":
        fields = dict(data)
        fields["per_instrument"] = {int(p): PRF(**v) for p, v in data.get("per_instrument", {}).items()}
        return cls(**fields)

    @classmethod
    def zero(cls, piece_id: str, runtime_ms: float = 0.0) -> "MetricsReport":
        return cls(piece_id, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, runtime_ms, {})


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def of(cls, m: MatchResult) -> "Counts":
        return cls(m.tp, m.fp, m.fn)

    def prf(self) -> PRF:
        return prf(self.tp, self.fp, self.fn)


def pooled_onset_counts(ref: Piece, est: Piece, tol: Tolerances = Tolerances()) -> Counts:
    """Onset-only counts summed over instruments (the micro view of a piece)."""
    total = Counts()
    for _, r, e in _program_lists(ref, est):
        total += Counts.of(match_onset(r, e, tol))
    return total


def evaluate_piece(ref: Piece, est: Piece, tol: Tolerances = Tolerances(),
                   piece_id: str = "", runtime_ms: float = 0.0) -> MetricsReport:
    onset = Counts()
    with_offset = Counts()
    per_instrument = {}
    overlap_sum, n_pairs = 0.0, 0
    for program, r, e in _program_lists(ref, est):
        m = match_onset(r, e, tol)
        onset += Counts.of(m)
        per_instrument[program] = prf(m.tp, m.fp, m.fn)
        with_offset += Counts.of(match_onset_offset(r, e, tol))
        if m.pairs:
            overlap_sum += average_overlap_ratio(m.pairs, r, e) * len(m.pairs)
            n_pairs += len(m.pairs)
    if not per_instrument:
        log.warning("piece %r: reference and estimate are both empty; scoring 0", piece_id)
    micro = onset.prf()
    macro = sum(v.f1 for v in per_instrument.values()) / len(per_instrument) if per_instrument else 0.0
    return MetricsReport(
        piece_id=piece_id,
        multi_onset_f1=macro,
        precision=micro.precision,
        recall=micro.recall,
        f1=micro.f1,
        onset_offset_f1=with_offset.prf().f1,
        overlap=overlap_sum / n_pairs if n_pairs else 0.0,
        runtime_ms=float(runtime_ms),
        per_instrument=per_instrument,
    )


@dataclass(frozen=True)
class Aggregate:
    """One leaderboard row's numbers: unweighted means over pieces."""

    f1: float
    precision: float
    recall: float
    overlap: float
    runtime_ms: float
    onset_offset_f1: float = 0.0
    n_pieces: int = 0


def aggregate_submission(reports: Sequence[MetricsReport]) -> Aggregate:
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    n = len(reports)

    def mean(name):
        return sum(getattr(r, name) for r in reports) / n

    return Aggregate(
        f1=mean("multi_onset_f1"),
        precision=mean("precision"),
        recall=mean("recall"),
        overlap=mean("overlap"),
        runtime_ms=mean("runtime_ms"),
        onset_offset_f1=mean("onset_offset_f1"),
        n_pieces=n,
    )
