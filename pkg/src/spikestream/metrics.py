"""Token error rate via Levenshtein alignment with unit costs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .lattice import Transcript


@dataclass(frozen=True)
class UtteranceEval:
    utt_id: str
    ref_len: int
    substitutions: int
    insertions: int
    deletions: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def token_error_rate(self) -> float:
        return _rate(self.errors, self.ref_len)


@dataclass(frozen=True)
class EvalReport:
    """Corpus-level error counts; rates are percentages of reference tokens."""

    substitutions: int
    insertions: int
    deletions: int
    ref_tokens: int
    utterances: tuple[UtteranceEval, ...]

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def token_error_rate(self) -> float:
        return _rate(self.errors, self.ref_tokens)


def _rate(errors: int, ref_len: int) -> float:
    if ref_len > 0:
        return 100.0 * errors / ref_len
    return 0.0 if errors == 0 else 100.0 * errors


def align_counts(ref: Sequence[int], hyp: Sequence[int]) -> tuple[int, int, int]:
    """(substitutions, insertions, deletions) of the minimum-cost alignment.

    Backtrace prefers matches/substitutions, then deletions, then insertions,
    so tied alignments split deterministically.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = dist[i - 1][j] + 1
            ins = dist[i][j - 1] + 1
            dist[i][j] = min(sub, dele, ins)
    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i -= 1
            j -= 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, ins, dels


def evaluate(
    refs: Sequence[Transcript],
    hyps: Sequence[Transcript],
    utt_ids: Sequence[str] | None = None,
) -> EvalReport:
    """Aggregate token error rate over parallel reference/hypothesis lists."""
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    if utt_ids is not None and len(utt_ids) != len(refs):
        raise ValueError("utt_ids length does not match")
    utts = []
    for k, (ref, hyp) in enumerate(zip(refs, hyps)):
        subs, ins, dels = align_counts(ref, hyp)
        utt_id = utt_ids[k] if utt_ids is not None else f"utt-{k:04d}"
        utts.append(UtteranceEval(utt_id, len(ref), subs, ins, dels))
    return EvalReport(
        substitutions=sum(u.substitutions for u in utts),
        insertions=sum(u.insertions for u in utts),
        deletions=sum(u.deletions for u in utts),
        ref_tokens=sum(u.ref_len for u in utts),
        utterances=tuple(utts),
    )
