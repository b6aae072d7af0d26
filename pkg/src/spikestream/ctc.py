"""CTC dynamic programming: forward likelihood, greedy decode, forced
alignment, and frame-synchronous prefix beam search.

All recursions run in the log domain over the extended label sequence
``blank y1 blank y2 ... yL blank`` (2L+1 states). Ties are broken
deterministically: argmax picks the lowest id, Viterbi backtraces prefer
blank then the lower extended state, beams order equal scores
lexicographically by prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby
from typing import Sequence

import numpy as np

from .lattice import (
    BLANK_ID,
    NEG_INF,
    EmissionMatrix,
    FramePath,
    Transcript,
    check_transcript,
    collapse,
)
from .triggered import extract_triggers


class InfeasibleTranscriptError(ValueError):
    """The transcript cannot be aligned to the lattice (too few frames)."""


@dataclass(frozen=True)
class GreedyResult:
    """Best-path decode: transcript, one confidence per token, raw argmax path."""

    transcript: Transcript
    confidences: tuple[float, ...]
    argmax_path: FramePath


@dataclass(frozen=True)
class ForcedAlignment:
    """Single best path collapsing to a forced transcript, plus its triggers."""

    path: FramePath
    log_prob: float
    triggers: tuple[int, ...]


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def min_frames(y: Sequence[int]) -> int:
    """Fewest frames able to emit ``y``: one per token plus a blank per repeat."""
    repeats = sum(1 for i in range(1, len(y)) if y[i] == y[i - 1])
    return len(y) + repeats


def ctc_logprob(emissions: EmissionMatrix, transcript: Sequence[int]) -> float:
    """Total log-probability of all paths collapsing to ``transcript``.

    Runs the forward recursion over the 2L+1 extended states. An infeasible
    transcript (more tokens than frames allow) returns ``-inf`` rather than
    raising; invalid token ids raise ValueError.
    """
    y = tuple(int(i) for i in transcript)
    check_transcript(y, emissions.num_labels)
    num_frames = emissions.num_frames
    if min_frames(y) > num_frames:
        return NEG_INF
    rows = emissions.log_probs.tolist()
    ext = [BLANK_ID]
    for label in y:
        ext.append(label)
        ext.append(BLANK_ID)
    size = len(ext)

    alpha = [NEG_INF] * size
    alpha[0] = rows[0][BLANK_ID]
    if size > 1:
        alpha[1] = rows[0][ext[1]]
    for t in range(1, num_frames):
        row = rows[t]
        new = [NEG_INF] * size
        for s in range(size):
            emit = row[ext[s]]
            if emit == NEG_INF:
                continue
            total = alpha[s]
            if s >= 1:
                total = _logaddexp(total, alpha[s - 1])
            if s >= 2 and ext[s] != BLANK_ID and ext[s] != ext[s - 2]:
                total = _logaddexp(total, alpha[s - 2])
            if total != NEG_INF:
                new[s] = total + emit
        alpha = new
    result = alpha[-1]
    if size > 1:
        result = _logaddexp(result, alpha[-2])
    return result


def ctc_greedy(emissions: EmissionMatrix, confidence: str = "max") -> GreedyResult:
    """Best path decoding: per-frame argmax, collapse, per-token confidence.

    The confidence of a token is the max (or mean, with ``confidence="mean"``)
    posterior over the frames of the argmax run that produced it.
    """
    if confidence not in ("max", "mean"):
        raise ValueError(f"unknown confidence rule {confidence!r}")
    path = tuple(int(i) for i in np.argmax(emissions.log_probs, axis=1))
    rows = emissions.log_probs
    transcript: list[int] = []
    confidences: list[float] = []
    pos = 0
    for label, run in groupby(path):
        frames = len(list(run))
        if label != BLANK_ID:
            probs = np.exp(rows[pos : pos + frames, label])
            conf = float(probs.max() if confidence == "max" else probs.mean())
            transcript.append(label)
            confidences.append(conf)
        pos += frames
    return GreedyResult(tuple(transcript), tuple(confidences), path)


def ctc_viterbi(emissions: EmissionMatrix, transcript: Sequence[int]) -> ForcedAlignment:
    """Forced alignment: the single most probable path collapsing to ``transcript``.

    Raises InfeasibleTranscriptError when no such path exists. The returned
    alignment may carry ``-inf`` log-probability when a structurally valid
    path exists but has zero probability under the lattice.
    """
    y = tuple(int(i) for i in transcript)
    check_transcript(y, emissions.num_labels)
    num_frames = emissions.num_frames
    if min_frames(y) > num_frames:
        raise InfeasibleTranscriptError(
            f"{len(y)} tokens need at least {min_frames(y)} frames, lattice has {num_frames}"
        )
    rows = emissions.log_probs.tolist()
    ext = [BLANK_ID]
    for label in y:
        ext.append(label)
        ext.append(BLANK_ID)
    size = len(ext)

    # Structural window: state s is usable at time t only if a path through it
    # can still have started at state <= 1 and can still end at state >= size-2.
    def window(t: int) -> tuple[int, int]:
        lo = max(0, size - 2 - 2 * (num_frames - 1 - t))
        hi = min(size - 1, 2 * t + 1)
        return lo, hi

    score = [[NEG_INF] * size for _ in range(num_frames)]
    back = [[-1] * size for _ in range(num_frames)]
    reach = [[False] * size for _ in range(num_frames)]
    lo0, hi0 = window(0)
    for s in (0, 1):
        if s < size and lo0 <= s <= hi0:
            reach[0][s] = True
            score[0][s] = rows[0][ext[s]]

    def prefer(state: int) -> tuple[int, int]:
        # blank states (even index) win ties, then the lower index
        return (state % 2, state)

    for t in range(1, num_frames):
        row = rows[t]
        lo, hi = window(t)
        for s in range(lo, hi + 1):
            cands = [s]
            if s >= 1:
                cands.append(s - 1)
            if s >= 2 and ext[s] != BLANK_ID and ext[s] != ext[s - 2]:
                cands.append(s - 2)
            cands = [c for c in cands if reach[t - 1][c]]
            if not cands:
                continue
            reach[t][s] = True
            best = max(score[t - 1][c] for c in cands)
            pick = min((c for c in cands if score[t - 1][c] == best), key=prefer)
            back[t][s] = pick
            emit = row[ext[s]]
            score[t][s] = best + emit if best != NEG_INF and emit != NEG_INF else NEG_INF

    finals = [s for s in (size - 1, size - 2) if s >= 0 and reach[num_frames - 1][s]]
    if not finals:
        raise InfeasibleTranscriptError(
            f"no alignment of {len(y)} tokens fits in {num_frames} frames"
        )
    best_final = max(score[num_frames - 1][s] for s in finals)
    state = min((s for s in finals if score[num_frames - 1][s] == best_final), key=prefer)

    states = [state]
    for t in range(num_frames - 1, 0, -1):
        state = back[t][state]
        states.append(state)
    states.reverse()
    path = tuple(ext[s] for s in states)
    assert collapse(path) == y, "backtrace produced an inconsistent path"
    return ForcedAlignment(path, best_final, extract_triggers(path))


def ctc_prefix_beam(
    emissions: EmissionMatrix, beam: int
) -> list[tuple[Transcript, float]]:
    """Frame-synchronous prefix beam search over the CTC lattice.

    Tracks blank-ending and non-blank-ending mass per prefix, prunes to the
    ``beam`` best totals after every frame (lexicographic prefix order on
    ties), and drops prefixes whose mass has vanished. Returns the surviving
    prefixes ranked by total log-probability after the last frame.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    rows = emissions.log_probs.tolist()
    num_labels = emissions.num_labels
    # prefix -> (log mass ending in blank, log mass ending in its last token)
    beams: dict[Transcript, tuple[float, float]] = {(): (0.0, NEG_INF)}
    order: list[Transcript] = [()]

    for row in rows:
        next_beams: dict[Transcript, list[float]] = {}

        def bucket(prefix: Transcript) -> list[float]:
            entry = next_beams.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF]
                next_beams[prefix] = entry
            return entry

        for prefix in order:
            p_blank, p_nonblank = beams[prefix]
            total = _logaddexp(p_blank, p_nonblank)
            entry = bucket(prefix)
            entry[0] = _logaddexp(entry[0], total + row[BLANK_ID])
            if prefix:
                entry[1] = _logaddexp(entry[1], p_nonblank + row[prefix[-1]])
            for c in range(1, num_labels):
                emit = row[c]
                if emit == NEG_INF:
                    continue
                if prefix and prefix[-1] == c:
                    mass = p_blank + emit
                else:
                    mass = total + emit
                if mass == NEG_INF:
                    continue
                grown = bucket(prefix + (c,))
                grown[1] = _logaddexp(grown[1], mass)

        ranked = sorted(
            (
                (prefix, entry)
                for prefix, entry in next_beams.items()
                if _logaddexp(entry[0], entry[1]) != NEG_INF
            ),
            key=lambda item: (-_logaddexp(item[1][0], item[1][1]), item[0]),
        )[:beam]
        beams = {prefix: (entry[0], entry[1]) for prefix, entry in ranked}
        order = [prefix for prefix, _ in ranked]

    return [(prefix, _logaddexp(*beams[prefix])) for prefix in order]
