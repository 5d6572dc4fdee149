from .grading import (
    GradeResult, LoadError, ReferenceSet, Submission, SubmissionError, grade_submission,
    load_reference_set, stats_records, submission_from_directory,
)
from .server import GradingService, ServiceConfig, make_server, serve
from .store import (
    CSV_HEADER, DuplicateSubmission, LeaderboardEntry, Store, StoreError, build_leaderboard,
    leaderboard_csv, leaderboard_json, update_leaderboard,
)

__all__ = [
    "CSV_HEADER", "DuplicateSubmission", "GradeResult", "GradingService", "LeaderboardEntry",
    "LoadError", "ReferenceSet", "ServiceConfig", "Store", "StoreError", "Submission",
    "SubmissionError", "build_leaderboard", "grade_submission", "leaderboard_csv",
    "leaderboard_json", "load_reference_set", "make_server", "serve", "stats_records",
    "submission_from_directory", "update_leaderboard",
]
