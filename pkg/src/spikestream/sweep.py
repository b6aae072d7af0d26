"""Latency sweep: decode a corpus at several encoder look-ahead spans.

The lattices are fixed inputs, so the span influences accuracy only through
the decoder look-ahead handed to the attention scorer (which defaults to
the encoder span) and influences the reported latency through the latency
arithmetic. One evaluation row is produced per span.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Utterance
from .lattice import LatencySpec, latency_ms
from .metrics import EvalReport, evaluate
from .scorers import AttentionScorer
from .triggered import DEFAULT_BEAM_SIZE, DEFAULT_CTC_ATTENTION_WEIGHT, triggered_decode

ScorerProvider = Callable[[Utterance], AttentionScorer]


@dataclass(frozen=True)
class SweepRow:
    lookahead: int
    latency_ms: float
    report: EvalReport

    @property
    def token_error_rate(self) -> float:
        return self.report.token_error_rate


def decode_corpus(
    utts: Sequence[Utterance],
    scorer_provider: ScorerProvider,
    *,
    delta: int,
    lam: float = DEFAULT_CTC_ATTENTION_WEIGHT,
    beam: int = DEFAULT_BEAM_SIZE,
) -> list[tuple[str, tuple[int, ...], float]]:
    """Decode every utterance; returns (utt_id, transcript, combined score)."""
    out = []
    for utt in utts:
        best = triggered_decode(
            utt.emissions, scorer_provider(utt), delta=delta, lam=lam, beam=beam
        )[0]
        out.append((utt.utt_id, best.prefix, best.combined))
    return out


def sweep_latency(
    utts: Sequence[Utterance],
    spans: Sequence[int],
    scorer_provider: ScorerProvider,
    *,
    lam: float = DEFAULT_CTC_ATTENTION_WEIGHT,
    beam: int = DEFAULT_BEAM_SIZE,
    delta: int | None = None,
    frame_shift_ms: float = 10.0,
    subsample_factor: int = 4,
) -> list[SweepRow]:
    """One (latency, error-rate) row per span; references must be present."""
    if not utts:
        raise ValueError("corpus is empty")
    missing = [u.utt_id for u in utts if u.reference is None]
    if missing:
        raise ValueError(f"utterances lack references: {missing[:3]}...")
    rows = []
    for span in spans:
        hyps = decode_corpus(
            utts,
            scorer_provider,
            delta=span if delta is None else delta,
            lam=lam,
            beam=beam,
        )
        report = evaluate(
            [u.reference for u in utts],
            [h[1] for h in hyps],
            [u.utt_id for u in utts],
        )
        spec = LatencySpec(frame_shift_ms, subsample_factor, span)
        rows.append(SweepRow(span, latency_ms(spec), report))
    return rows
