"""Grading tools for multi-instrument automatic music transcription."""
from .matching import MatchResult, Tolerances, match_onset, match_onset_offset, max_bipartite_matching
from .metrics import (
    PRF, Aggregate, MetricsReport, aggregate_submission, average_overlap_ratio, evaluate_piece,
    piece_multi_onset_f1, prf,
)
from .midi import (
    CapacityError, InstrumentTrack, Note, ParseError, Piece, TempoMap, parse_smf, read_smf,
    ticks_to_seconds, write_smf,
)
from .ruleset import Rules, Violation, generate_piece, generate_set, note_name_to_midi, validate_piece
from .stats import (
    AnovaTable, GroupSummary, TestResult, bonferroni, cohens_d, reg_inc_beta, summarize,
    two_way_anova, welch_t,
)

__version__ = "0.1.0"

__all__ = [
    "Aggregate", "AnovaTable", "CapacityError", "GroupSummary", "InstrumentTrack", "MatchResult",
    "MetricsReport", "Note", "PRF", "ParseError", "Piece", "Rules", "TempoMap", "TestResult",
    "Tolerances", "Violation", "aggregate_submission", "average_overlap_ratio", "bonferroni",
    "cohens_d", "evaluate_piece", "generate_piece", "generate_set", "match_onset",
    "match_onset_offset", "max_bipartite_matching", "note_name_to_midi", "parse_smf",
    "piece_multi_onset_f1", "prf", "read_smf", "reg_inc_beta", "summarize", "ticks_to_seconds",
    "two_way_anova", "validate_piece", "welch_t", "write_smf",
]
