"""Per-model, per-instrument-count analysis of graded pieces.

Input records are JSON lines with ``model``, ``piece_id``,
``instrument_count``, ``f_measure``, ``precision`` and ``recall``.
"""
from __future__ import annotations

import json
from collections import defaultdict
from typing import Iterable

from .stats import DegenerateInputError, GroupSummary, TestResult, bonferroni, summarize, two_way_anova, welch_t

REQUIRED = ("model", "piece_id", "instrument_count", "f_measure", "precision", "recall")
MEASURES = ("f_measure", "precision", "recall")


def read_records(lines: Iterable[str]) -> list[dict]:
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        missing = [k for k in REQUIRED if k not in rec]
        if missing:
            raise ValueError(f"line {lineno}: missing {missing}")
        rec["instrument_count"] = int(rec["instrument_count"])
        records.append(rec)
    return records


def group_summaries(records: list[dict], measure: str = "f_measure") -> dict[tuple[str, int], GroupSummary]:
    cells = defaultdict(list)
    for r in records:
        cells[(r["model"], r["instrument_count"])].append(float(r[measure]))
    return {k: summarize(v) for k, v in sorted(cells.items()) if len(v) >= 2}


def compare_extremes(records: list[dict], measure: str = "f_measure") -> list[dict]:
    """Per model, Welch test of the fewest- against the most-instrument pieces,
    Bonferroni-adjusted over the number of models compared.

    A model whose two groups both have zero variance gets an entry with
    ``skipped`` set instead of test statistics.
    """
    summaries = group_summaries(records, measure)
    by_model = defaultdict(dict)
    for (model, count), g in summaries.items():
        by_model[model][count] = g
    tests: list[tuple[str, int, int, GroupSummary, GroupSummary, TestResult | str]] = []
    for model, groups in sorted(by_model.items()):
        if len(groups) < 2:
            continue
        lo, hi = min(groups), max(groups)
        try:
            r = welch_t(groups[lo], groups[hi])
        except DegenerateInputError as exc:
            r = str(exc)
        tests.append((model, lo, hi, groups[lo], groups[hi], r))
    k = sum(not isinstance(t[-1], str) for t in tests)
    out = []
    for model, lo, hi, a, b, r in tests:
        entry = {"model": model, "counts": [lo, hi], "k": k,
                 "groups": [{"n": a.n, "mean": a.mean, "sd": a.sd}, {"n": b.n, "mean": b.mean, "sd": b.sd}]}
        if isinstance(r, str):
            entry["skipped"] = r
        else:
            entry.update(t=r.t, df=r.df, p=r.p, p_bonferroni=bonferroni(r.p, k), cohens_d=r.d)
        out.append(entry)
    return out


def analyze(records: list[dict], ss_type: int = 2) -> dict:
    table = two_way_anova(((r["model"], r["instrument_count"], float(r["f_measure"])) for r in records),
                          names=("model", "instrument_count"), ss_type=ss_type)
    summary = []
    for measure in MEASURES:
        for (model, count), g in group_summaries(records, measure).items():
            summary.append({"model": model, "instrument_count": count, "measure": measure,
                            "n": g.n, "mean": g.mean, "sd": g.sd})
    return {"anova": table.to_json(), "welch": compare_extremes(records), "summary": summary}


def _fmt(v, spec):
    return "-" if v is None else format(v, spec)


def format_text(result: dict) -> str:
    lines = [f"Two-way ANOVA on f_measure (type {result['anova']['ss_type']} sums of squares)",
             f"{'source':<26}{'SS':>12}{'df':>6}{'F':>10}{'p':>10}"]
    for row in result["anova"]["rows"]:
        lines.append(f"{row['source']:<26}{row['ss']:>12.4f}{row['df']:>6d}"
                     f"{_fmt(row['f'], '10.2f')}{_fmt(row['p'], '10.4f')}")
    lines += ["", "Welch t-tests, fewest vs most instruments",
              f"{'model':<26}{'counts':>8}{'t':>8}{'df':>8}{'p':>9}{'p_adj':>9}{'d':>7}"]
    for w in result["welch"]:
        counts = f"{w['counts'][0]}v{w['counts'][1]}"
        if "skipped" in w:
            lines.append(f"{w['model']:<26}{counts:>8}  skipped: {w['skipped']}")
            continue
        lines.append(f"{w['model']:<26}{counts:>8}{w['t']:>8.2f}{w['df']:>8.2f}{w['p']:>9.4f}"
                     f"{w['p_bonferroni']:>9.4f}{w['cohens_d']:>7.2f}")
    lines += ["", f"{'model':<26}{'count':>6}{'measure':>11}{'n':>5}   mean +- sd"]
    for s in result["summary"]:
        lines.append(f"{s['model']:<26}{s['instrument_count']:>6}{s['measure']:>11}{s['n']:>5}"
                     f"   {s['mean']:.4f} +- {s['sd']:.4f}")
    return "\n".join(lines)
