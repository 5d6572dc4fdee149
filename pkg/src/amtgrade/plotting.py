"""Figures written next to the CSV/JSON reports."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLUMNS = (("f1", "F1"), ("precision", "Precision"), ("recall", "Recall"), ("overlap", "Overlap"))


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def leaderboard_figure(entries, path, title="Leaderboard"):
    """Grouped horizontal bars, one group per model, best at the top."""
    entries = list(entries)
    fig, (ax, ax_rt) = plt.subplots(1, 2, figsize=(10, 1.0 + 0.45 * max(len(entries), 1)),
                                    gridspec_kw={"width_ratios": [3, 1]}, sharey=True)
    names = [f"{e.rank}. {e.model_name}" for e in entries]
    ys = range(len(entries))
    height = 0.8 / len(COLUMNS)
    for k, (attr, label) in enumerate(COLUMNS):
        ax.barh([y + (k - 1.5) * height for y in ys], [getattr(e, attr) for e in entries],
                height=height, label=label)
    ax.set_yticks(list(ys))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlim(0, 1)
    ax.set_xlabel("score")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize="small")
    ax_rt.barh(list(ys), [e.runtime_ms for e in entries], color="0.5")
    ax_rt.set_xlabel("runtime (ms)")
    return _save(fig, path)


def instrument_count_figure(records, path, measure="f_measure"):
    """Box plots of a per-piece measure by instrument count, one panel per model."""
    by_model = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_model[r["model"]][int(r["instrument_count"])].append(float(r[measure]))
    models = sorted(by_model)
    fig, axes = plt.subplots(1, max(len(models), 1), figsize=(3.2 * max(len(models), 1), 3.4),
                             sharey=True, squeeze=False)
    for ax, model in zip(axes[0], models):
        counts = sorted(by_model[model])
        ax.boxplot([by_model[model][c] for c in counts])
        ax.set_xticks(range(1, len(counts) + 1))
        ax.set_xticklabels([str(c) for c in counts])
        ax.set_title(model, fontsize="medium")
        ax.set_xlabel("instruments")
        ax.set_ylim(0, 1)
    axes[0][0].set_ylabel(measure)
    return _save(fig, path)


def piece_scores_figure(reports, path, title=None):
    """Per-piece multi-instrument onset F1 for one graded submission."""
    reports = sorted(reports, key=lambda r: r.piece_id)
    fig, ax = plt.subplots(figsize=(max(6, 0.12 * len(reports)), 3))
    ax.bar(range(len(reports)), [r.multi_onset_f1 for r in reports], color="tab:blue")
    ax.set_ylim(0, 1)
    ax.set_xlabel("piece")
    ax.set_ylabel("multi-instrument onset F1")
    if title:
        ax.set_title(title)
    return _save(fig, path)
