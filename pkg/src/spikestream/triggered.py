"""Trigger extraction and joint CTC + triggered-attention beam search.

The search is frame-synchronous: CTC prefix mass advances exactly as in
``ctc_prefix_beam``, and the first time a prefix extension enters the beam
(its trigger event, at frame ``t``) the attention scorer is asked for the
new token given the frames visible at that moment, ``min(t + 1 + delta,
T)``. Re-entries of the same live prefix never re-score. After the last
frame every hypothesis is closed with the end-symbol score and ranked by
``lam * attention + (1 - lam) * ctc``.

Hypotheses whose CTC mass vanishes are dropped: attention alone cannot
revive a prefix no path supports. Ties rank lexicographically by prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby
from typing import Sequence

import numpy as np

from .lattice import BLANK_ID, NEG_INF, EmissionMatrix, FramePath, Transcript
from .scorers import AttentionScorer, ScorerError, eos_slot, token_slot

DEFAULT_CTC_ATTENTION_WEIGHT = 0.5
DEFAULT_BEAM_SIZE = 10


@dataclass(frozen=True)
class DecodeDefaults:
    ctc_attention_weight: float = DEFAULT_CTC_ATTENTION_WEIGHT
    beam_size: int = DEFAULT_BEAM_SIZE


def decode_defaults() -> DecodeDefaults:
    """The stock operating point for joint decoding."""
    return DecodeDefaults()


@dataclass(frozen=True)
class Hypothesis:
    """A ranked beam entry with its separated score components.

    ``combined = lam * log_p_att + (1 - lam) * logaddexp(log_p_blank,
    log_p_nonblank)`` under the weight the search ran with. ``triggers``
    holds the frame at which each token of ``prefix`` entered the beam.
    """

    prefix: Transcript
    log_p_blank: float
    log_p_nonblank: float
    log_p_att: float
    combined: float
    triggers: tuple[int, ...]

    @property
    def log_p_ctc(self) -> float:
        return _logaddexp(self.log_p_blank, self.log_p_nonblank)


def extract_triggers(alignment: FramePath) -> tuple[int, ...]:
    """First frame of each emitting run: one trigger per collapsed token."""
    triggers: list[int] = []
    pos = 0
    for label, run in groupby(alignment):
        frames = len(list(run))
        if label != BLANK_ID:
            triggers.append(pos)
        pos += frames
    return tuple(triggers)


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


class _Hyp:
    __slots__ = ("p_blank", "p_nonblank", "att", "triggers")

    def __init__(self, p_blank: float, p_nonblank: float, att: float, triggers: tuple[int, ...]):
        self.p_blank = p_blank
        self.p_nonblank = p_nonblank
        self.att = att
        self.triggers = triggers

    def total(self) -> float:
        return _logaddexp(self.p_blank, self.p_nonblank)


class TriggeredSearch:
    """Incremental frame-synchronous joint search; feed frames, then finalize.

    ``total_frames`` may stay unknown while streaming; it must be set (via
    the constructor or ``set_total``) before the frames within ``delta`` of
    the end are stepped, so the scorer's frame bound can be capped at T.
    """

    def __init__(
        self,
        num_labels: int,
        scorer: AttentionScorer,
        *,
        lam: float = DEFAULT_CTC_ATTENTION_WEIGHT,
        beam: int = DEFAULT_BEAM_SIZE,
        delta: int = 0,
        total_frames: int | None = None,
    ):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lam must be within [0, 1]")
        if beam < 1:
            raise ValueError("beam must be >= 1")
        if delta < 0:
            raise ValueError("delta must be >= 0")
        if scorer.num_tokens != num_labels - 1:
            raise ValueError(
                f"scorer covers {scorer.num_tokens} tokens, lattice has {num_labels - 1}"
            )
        self.num_labels = num_labels
        self.scorer = scorer
        self.lam = lam
        self.beam = beam
        self.delta = delta
        self.total_frames = total_frames
        self.frame_index = -1  # last frame stepped
        self._hyps: dict[Transcript, _Hyp] = {(): _Hyp(0.0, NEG_INF, 0.0, ())}
        self._order: list[Transcript] = [()]

    def set_total(self, total_frames: int) -> None:
        if total_frames <= self.frame_index:
            raise ValueError("total_frames lies before already-stepped frames")
        self.total_frames = total_frames

    def _frame_limit(self, t: int) -> int:
        limit = t + 1 + self.delta
        if self.total_frames is not None:
            limit = min(limit, self.total_frames)
        return limit

    def _score_next(self, prefix: Transcript, slot: int, frame_limit: int) -> float:
        try:
            row = self.scorer.score_next(prefix, frame_limit)
        except ScorerError:
            raise
        except Exception as exc:
            raise ScorerError(f"attention scorer failed: {exc}", prefix=prefix) from exc
        if len(row) != self.num_labels:
            raise ScorerError(
                f"scorer row has {len(row)} entries, expected {self.num_labels}",
                prefix=prefix,
                payload=row,
            )
        return float(row[slot])

    def step(self, log_row: Sequence[float]) -> None:
        """Advance the search by one emission frame."""
        row = [float(v) for v in log_row]
        if len(row) != self.num_labels:
            raise ValueError(f"frame has {len(row)} labels, expected {self.num_labels}")
        t = self.frame_index + 1
        if self.total_frames is not None and t >= self.total_frames:
            raise ValueError("stepped past the declared total_frames")
        self.frame_index = t

        cands: dict[Transcript, list[float]] = {}

        def bucket(prefix: Transcript) -> list[float]:
            entry = cands.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF]
                cands[prefix] = entry
            return entry

        for prefix in self._order:
            hyp = self._hyps[prefix]
            total = hyp.total()
            entry = bucket(prefix)
            entry[0] = _logaddexp(entry[0], total + row[BLANK_ID])
            if prefix:
                entry[1] = _logaddexp(entry[1], hyp.p_nonblank + row[prefix[-1]])
            for c in range(1, self.num_labels):
                emit = row[c]
                if emit == NEG_INF:
                    continue
                mass = (hyp.p_blank if prefix and prefix[-1] == c else total) + emit
                if mass == NEG_INF:
                    continue
                grown = bucket(prefix + (c,))
                grown[1] = _logaddexp(grown[1], mass)

        frame_limit = self._frame_limit(t)
        scored: list[tuple[float, Transcript, _Hyp]] = []
        for prefix, (p_blank, p_nonblank) in cands.items():
            total = _logaddexp(p_blank, p_nonblank)
            if total == NEG_INF:
                continue
            old = self._hyps.get(prefix)
            if old is not None:
                att, triggers = old.att, old.triggers
            else:
                parent = self._hyps[prefix[:-1]]
                att = parent.att + self._score_next(
                    prefix[:-1], token_slot(prefix[-1]), frame_limit
                )
                triggers = parent.triggers + (t,)
            hyp = _Hyp(p_blank, p_nonblank, att, triggers)
            scored.append((self.lam * att + (1.0 - self.lam) * total, prefix, hyp))

        scored.sort(key=lambda item: (-item[0], item[1]))
        del scored[self.beam :]
        self._hyps = {prefix: hyp for _, prefix, hyp in scored}
        self._order = [prefix for _, prefix, _ in scored]

    def best_partial(self) -> Transcript:
        """Current top prefix, ranked without the end-symbol score."""
        return self._order[0]

    def finalize(self) -> list[Hypothesis]:
        """Close every hypothesis with the end symbol and rank the beam."""
        total_frames = self.total_frames if self.total_frames is not None else self.frame_index + 1
        results = []
        for prefix in self._order:
            hyp = self._hyps[prefix]
            att = hyp.att + self._score_next(prefix, eos_slot(self.num_labels - 1), total_frames)
            ctc = hyp.total()
            combined = self.lam * att + (1.0 - self.lam) * ctc
            results.append(
                Hypothesis(prefix, hyp.p_blank, hyp.p_nonblank, att, combined, hyp.triggers)
            )
        results.sort(key=lambda h: (-h.combined, h.prefix))
        return results


def triggered_decode(
    emissions: EmissionMatrix,
    scorer: AttentionScorer,
    *,
    delta: int = 0,
    lam: float = DEFAULT_CTC_ATTENTION_WEIGHT,
    beam: int = DEFAULT_BEAM_SIZE,
) -> list[Hypothesis]:
    """Offline joint CTC + triggered-attention decode of a whole lattice."""
    search = TriggeredSearch(
        emissions.num_labels,
        scorer,
        lam=lam,
        beam=beam,
        delta=delta,
        total_frames=emissions.num_frames,
    )
    rows: np.ndarray = emissions.log_probs
    for t in range(emissions.num_frames):
        search.step(rows[t])
    return search.finalize()
