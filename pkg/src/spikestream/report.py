"""Report rendering: delimited tables plus matplotlib figures on disk."""

from __future__ import annotations

from pathlib import Path
from typing import IO, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport
from .sweep import SweepRow


def write_hyp_lines(
    sink: IO[str], rows: Sequence[tuple[str, str, float]]
) -> None:
    """Hypothesis lines: ``<utt-id>\\t<tokens>\\t<score>``."""
    for utt_id, text, score in rows:
        sink.write(f"{utt_id}\t{text}\t{score:.6f}\n")


def write_sweep_tsv(rows: Sequence[SweepRow], sink: IO[str]) -> None:
    sink.write("lookahead\tlatency_ms\tter\tsub\tins\tdel\tref_tokens\n")
    for row in rows:
        r = row.report
        sink.write(
            f"{row.lookahead}\t{row.latency_ms:g}\t{r.token_error_rate:.3f}"
            f"\t{r.substitutions}\t{r.insertions}\t{r.deletions}\t{r.ref_tokens}\n"
        )


def write_eval_tsv(report: EvalReport, sink: IO[str]) -> None:
    sink.write("utt_id\tref_len\tsub\tins\tdel\tter\n")
    for u in report.utterances:
        sink.write(
            f"{u.utt_id}\t{u.ref_len}\t{u.substitutions}\t{u.insertions}"
            f"\t{u.deletions}\t{u.token_error_rate:.3f}\n"
        )
    sink.write(
        f"TOTAL\t{report.ref_tokens}\t{report.substitutions}\t{report.insertions}"
        f"\t{report.deletions}\t{report.token_error_rate:.3f}\n"
    )


def plot_sweep(rows: Sequence[SweepRow], path: str | Path) -> Path:
    """Error rate against encoder latency, one marker per span."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    x = [row.latency_ms for row in rows]
    y = [row.token_error_rate for row in rows]
    ax.plot(x, y, marker="o")
    for row in rows:
        ax.annotate(
            f"span {row.lookahead}",
            (row.latency_ms, row.token_error_rate),
            textcoords="offset points",
            xytext=(4, 4),
            fontsize=8,
        )
    ax.set_xlabel("encoder latency [ms]")
    ax.set_ylabel("token error rate [%]")
    ax.set_title("accuracy vs. encoder latency")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_eval(report: EvalReport, path: str | Path) -> Path:
    """Error composition and the per-utterance error-rate distribution."""
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.6))
    ax1.bar(
        ["sub", "ins", "del"],
        [report.substitutions, report.insertions, report.deletions],
        color=["#4c72b0", "#dd8452", "#55a868"],
    )
    ax1.set_ylabel("count")
    ax1.set_title(f"errors (TER {report.token_error_rate:.2f}%)")
    rates = [u.token_error_rate for u in report.utterances]
    ax2.hist(rates, bins=min(20, max(5, len(rates) // 5)), color="#4c72b0")
    ax2.set_xlabel("per-utterance TER [%]")
    ax2.set_ylabel("utterances")
    ax2.set_title("error-rate distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
