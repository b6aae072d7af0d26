"""Streaming decode simulation with deterministic latency accounting.

Time is simulated from frame indices, never the wall clock. A decode step
for encoder frame ``t`` may only run once the source has delivered frame
``t + delta + encoder_lookahead``: the encoder needs its look-ahead span
before frame ``t`` is final, and the triggered decoder reads ``delta``
more frames when it scores a token. Events therefore fire no earlier than
each token's trigger frame plus both look-aheads (or at end of stream).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .lattice import LatencySpec, Transcript
from .scorers import AttentionScorer
from .triggered import (
    DEFAULT_BEAM_SIZE,
    DEFAULT_CTC_ATTENTION_WEIGHT,
    Hypothesis,
    TriggeredSearch,
)


@dataclass(frozen=True)
class StreamEvent:
    """One emitted decode state: a partial update or the single final result."""

    kind: str  # "partial" | "final"
    transcript: Transcript
    frame_issued: int
    wallclock_simulated_ms: float
    error: str | None = None


@dataclass(frozen=True)
class StreamConfig:
    encoder_lookahead: int = 0
    delta: int | None = None  # decoder look-ahead; defaults to encoder_lookahead
    lam: float = DEFAULT_CTC_ATTENTION_WEIGHT
    beam: int = DEFAULT_BEAM_SIZE
    frame_shift_ms: float = 10.0
    subsample_factor: int = 4

    @property
    def decoder_delta(self) -> int:
        return self.encoder_lookahead if self.delta is None else self.delta

    @property
    def latency_spec(self) -> LatencySpec:
        return LatencySpec(self.frame_shift_ms, self.subsample_factor, self.encoder_lookahead)


@dataclass(frozen=True)
class StreamResult:
    events: tuple[StreamEvent, ...]
    hypotheses: tuple[Hypothesis, ...]

    @property
    def final(self) -> StreamEvent:
        return self.events[-1]

    @property
    def best(self) -> Hypothesis:
        return self.hypotheses[0]


def stream_decode(
    frames: Iterable[Sequence[float]],
    num_labels: int,
    scorer: AttentionScorer,
    config: StreamConfig = StreamConfig(),
) -> StreamResult:
    """Run the frame-synchronous search over an incremental emission source.

    Returns every emitted event plus the final ranked beam. The final
    transcript always equals the offline decode of the same lattice under
    the same configuration; only issuance times depend on the look-aheads.
    If the source raises mid-stream, decoding stops and the final event
    carries the diagnostic in ``error``.
    """
    enc_ms = config.latency_spec.encoder_frame_ms
    hold = config.decoder_delta + config.encoder_lookahead
    search = TriggeredSearch(
        num_labels,
        scorer,
        lam=config.lam,
        beam=config.beam,
        delta=config.decoder_delta,
    )
    events: list[StreamEvent] = []
    buffered: list[Sequence[float]] = []
    reported: Transcript = ()
    next_step = 0
    error: str | None = None

    def emit_partials(frame_arrived: int) -> None:
        nonlocal reported
        best = search.best_partial()
        if best != reported:
            events.append(
                StreamEvent("partial", best, frame_arrived, (frame_arrived + 1) * enc_ms)
            )
            reported = best

    source: Iterator[Sequence[float]] = iter(frames)
    while True:
        try:
            row = next(source)
        except StopIteration:
            break
        except Exception as exc:  # source interruption
            error = f"source interrupted: {exc}"
            break
        buffered.append(row)
        arrived = len(buffered) - 1
        while next_step + hold <= arrived:
            search.step(buffered[next_step])
            next_step += 1
            emit_partials(arrived)

    total = len(buffered)
    if total == 0:
        raise ValueError("emission source produced no frames")
    search.set_total(total)
    while next_step < total:
        search.step(buffered[next_step])
        next_step += 1
        emit_partials(total - 1)
    hypotheses = tuple(search.finalize())
    events.append(
        StreamEvent("final", hypotheses[0].prefix, total - 1, total * enc_ms, error)
    )
    return StreamResult(tuple(events), hypotheses)


@dataclass(frozen=True)
class TokenLatency:
    position: int
    token: int
    trigger_frame: int
    issued_frame: int
    latency_ms: float


def token_latency_report(result: StreamResult, config: StreamConfig) -> list[TokenLatency]:
    """Per-token issuance latency relative to the trigger frame.

    A token counts as issued at the first event whose transcript already
    matches the final one through that position.
    """
    enc_ms = config.latency_spec.encoder_frame_ms
    final = result.best.prefix
    triggers = result.best.triggers
    report = []
    for pos, token in enumerate(final):
        issued = result.final.frame_issued
        for event in result.events:
            if event.transcript[: pos + 1] == final[: pos + 1]:
                issued = event.frame_issued
                break
        report.append(
            TokenLatency(
                position=pos,
                token=token,
                trigger_frame=triggers[pos],
                issued_frame=issued,
                latency_ms=(issued - triggers[pos]) * enc_ms,
            )
        )
    return report
