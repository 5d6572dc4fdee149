"""Command-line entry point: ``amtgrade <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .analysis import analyze, format_text, read_records
from .matching import Tolerances
from .midi import MidiError, read_smf
from .ruleset import DEFAULT_MIX, generate_set, validate_piece
from .service import (
    GradingService, LoadError, ServiceConfig, Store, StoreError, SubmissionError, grade_submission,
    leaderboard_csv, leaderboard_json, load_reference_set, serve, stats_records,
    submission_from_directory,
)

REPORT_COLUMNS = ("piece_id", "multi_onset_f1", "precision", "recall", "f1", "onset_offset_f1",
                  "overlap", "runtime_ms")


def _tolerances(args) -> Tolerances:
    return Tolerances(onset_tol=args.tolerance_onset, offset_min_tol=args.tolerance_offset,
                      offset_ratio=args.offset_ratio, pitch_tol=args.tolerance_pitch)


def cmd_grade(args) -> int:
    refs = load_reference_set(args.ref)
    extra = {"submission_id": args.submission_id} if args.submission_id else {}
    sub = submission_from_directory(args.sub, args.name, **extra)
    result = grade_submission(sub, refs, _tolerances(args), workers=args.workers)

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in result.reports:
        writer.writerow([r.piece_id] + [f"{getattr(r, c):.4f}" for c in REPORT_COLUMNS[1:]])
    a = result.aggregate
    writer.writerow(["mean", f"{a.f1:.4f}", f"{a.precision:.4f}", f"{a.recall:.4f}", "", f"{a.onset_offset_f1:.4f}",
                     f"{a.overlap:.4f}", f"{a.runtime_ms:.2f}"])
    for pid, note in sorted(result.annotations.items()):
        print(f"warning: {pid}: {note}", file=sys.stderr)
    for flag in result.flags:
        print(f"note: {flag}", file=sys.stderr)

    if args.out:
        Path(args.out).write_text(json.dumps(result.to_json(), indent=2) + "\n")
    if args.records:
        with open(args.records, "a") as fh:
            for rec in stats_records(result, refs):
                fh.write(json.dumps(rec) + "\n")
    if args.figure:
        from .plotting import piece_scores_figure
        piece_scores_figure(result.reports, args.figure, title=args.name)
    if args.store:
        store = Store(args.store)
        store.append(result)
        print(f"stored submission {sub.submission_id} in {args.store}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    files = sorted(Path(args.input).glob("*.mid"))
    if not files:
        print(f"no .mid files in {args.input}", file=sys.stderr)
        return 2
    bad = 0
    for path in files:
        try:
            violations = validate_piece(read_smf(path))
        except MidiError as exc:
            print(f"{path.name}: parse error: {exc}")
            bad += 1
            continue
        if violations:
            bad += 1
            for v in violations:
                print(f"{path.name}: rule {v.rule} at {v.location}: {v.message}")
        else:
            print(f"{path.name}: ok")
    print(f"{len(files) - bad}/{len(files)} pieces compliant", file=sys.stderr)
    return 1 if bad else 0


def cmd_genset(args) -> int:
    mix = tuple(float(x) for x in args.mix.split(","))
    generated = generate_set(args.seed, args.count, mix, duration=args.duration)
    manifest = generated.write(args.out)
    counts = generated.manifest()["instrument_counts"]
    print(f"wrote {len(generated.pieces)} pieces to {args.out} ({manifest.name}); instrument counts {counts}")
    return 0


def cmd_stats(args) -> int:
    with open(args.records) as fh:
        records = read_records(fh)
    result = analyze(records, ss_type=args.ss_type)
    if args.format in ("text", "both"):
        print(format_text(result))
    if args.format == "both":
        print()
    if args.format in ("json", "both"):
        print(json.dumps(result, indent=2))
    if args.figure:
        from .plotting import instrument_count_figure
        instrument_count_figure(records, args.figure)
    return 0


def cmd_leaderboard(args) -> int:
    if not Path(args.store).exists():
        print(f"no store at {args.store}", file=sys.stderr)
        return 2
    entries = Store(args.store).leaderboard()
    sys.stdout.write(leaderboard_csv(entries) if args.csv else leaderboard_json(entries) + "\n")
    if args.figure:
        from .plotting import leaderboard_figure
        leaderboard_figure(entries, args.figure)
    return 0


def cmd_serve(args) -> int:
    refs = load_reference_set(args.ref)
    config = ServiceConfig(tolerances=_tolerances(args), queued=args.queued, workers=args.workers)
    serve(GradingService(refs, Store(args.store), config), args.host, args.port)
    return 0


def _add_tolerances(p):
    t = Tolerances()
    p.add_argument("--tolerance-onset", type=float, default=t.onset_tol, help="onset window, seconds")
    p.add_argument("--tolerance-offset", type=float, default=t.offset_min_tol, help="minimum offset window, seconds")
    p.add_argument("--offset-ratio", type=float, default=t.offset_ratio, help="offset window as a fraction of duration")
    p.add_argument("--tolerance-pitch", type=float, default=t.pitch_tol, help="pitch window, semitones")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amtgrade", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grade", help="grade a directory of estimated MIDI files")
    p.add_argument("--ref", required=True, help="reference directory")
    p.add_argument("--sub", required=True, help="submission directory of <piece_id>.mid")
    p.add_argument("--name", required=True, help="team / model name")
    p.add_argument("--submission-id")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the full JSON result here")
    p.add_argument("--records", help="append per-piece stats records (JSON lines) here")
    p.add_argument("--figure", help="write a per-piece score figure here")
    p.add_argument("--store", help="also append the result to this store")
    _add_tolerances(p)
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("validate", help="check pieces against the composition rules")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("genset", help="generate a rule-compliant reference set")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=76)
    p.add_argument("--mix", default=",".join(str(x) for x in DEFAULT_MIX),
                   help="relative weights of 1-, 2- and 3-instrument pieces")
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_genset)

    p = sub.add_parser("stats", help="ANOVA and Welch tests over per-piece records")
    p.add_argument("--records", required=True)
    p.add_argument("--format", choices=("text", "json", "both"), default="both")
    p.add_argument("--ss-type", type=int, choices=(1, 2), default=2)
    p.add_argument("--figure", help="write per-model box plots here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("leaderboard", help="print the leaderboard from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--figure", help="write a leaderboard figure here")
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("serve", help="run the HTTP grading service")
    p.add_argument("--ref", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--queued", action="store_true", help="grade on a background worker")
    p.add_argument("--workers", type=int, default=1)
    _add_tolerances(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LoadError, SubmissionError, StoreError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
