"""Two-pass Mask-CTC inference: greedy CTC, confidence masking, CMLM fill.

The slot count is fixed by the greedy pass; masking can repair
substitutions but never length errors. Filling is easy-first by default:
one commit per round (the single most confident prediction, leftmost on
ties), with any leftovers committed in one shot when the round budget runs
out. Observed slots are never rewritten.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import GreedyResult, ctc_greedy
from .lattice import BLANK_ID, EmissionMatrix, Transcript
from .scorers import MASK, CMLMScorer, ScorerError

FILL_EASY_FIRST = "easy-first"
FILL_PARALLEL = "parallel"


@dataclass(frozen=True)
class MaskedTranscript:
    """A transcript with low-confidence positions replaced by MASK (-1)."""

    slots: tuple[int, ...]

    def __post_init__(self):
        for pos, s in enumerate(self.slots):
            if s == MASK:
                continue
            if s == BLANK_ID or s < 0:
                raise ValueError(f"slot {pos}: {s} is not a token id or MASK")
        object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))

    @property
    def masked_positions(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if s == MASK)

    @property
    def observed(self) -> dict[int, int]:
        return {i: s for i, s in enumerate(self.slots) if s != MASK}

    def with_commits(self, commits: dict[int, int]) -> "MaskedTranscript":
        slots = list(self.slots)
        for pos, token in commits.items():
            if slots[pos] != MASK:
                raise ValueError(f"slot {pos} is observed, refusing to rewrite")
            slots[pos] = token
        return MaskedTranscript(tuple(slots))


def mask_low_confidence(greedy: GreedyResult, threshold: float) -> MaskedTranscript:
    """Mask every token whose confidence is strictly below ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be within [0, 1]")
    slots = tuple(
        MASK if conf < threshold else token
        for token, conf in zip(greedy.transcript, greedy.confidences)
    )
    return MaskedTranscript(slots)


def _predict(scorer: CMLMScorer, masked: MaskedTranscript) -> np.ndarray:
    try:
        rows = scorer.predict(masked.slots)
    except ScorerError:
        raise
    except Exception as exc:
        raise ScorerError(f"CMLM scorer failed: {exc}", prefix=masked.slots) from exc
    rows = np.asarray(rows, dtype=np.float64)
    n_masked = len(masked.masked_positions)
    if rows.shape != (n_masked, scorer.num_tokens):
        raise ScorerError(
            f"CMLM rows have shape {rows.shape}, expected ({n_masked}, {scorer.num_tokens})",
            prefix=masked.slots,
            payload=rows,
        )
    return rows


def cmlm_fill(
    masked: MaskedTranscript,
    scorer: CMLMScorer,
    max_iterations: int = 10,
    schedule: str = FILL_EASY_FIRST,
) -> Transcript:
    """Resolve masked slots with the CMLM scorer; observed slots pass through."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if schedule not in (FILL_EASY_FIRST, FILL_PARALLEL):
        raise ValueError(f"unknown fill schedule {schedule!r}")
    current = masked
    if schedule == FILL_EASY_FIRST:
        for _ in range(max_iterations):
            positions = current.masked_positions
            if not positions:
                break
            rows = _predict(scorer, current)
            best_per_row = rows.max(axis=1)
            winner = int(np.argmax(best_per_row))  # leftmost on ties
            token = int(np.argmax(rows[winner])) + 1
            current = current.with_commits({positions[winner]: token})
    positions = current.masked_positions
    if positions:
        rows = _predict(scorer, current)
        commits = {
            pos: int(np.argmax(rows[i])) + 1 for i, pos in enumerate(positions)
        }
        current = current.with_commits(commits)
    return current.slots


def mask_ctc_decode(
    emissions: EmissionMatrix,
    scorer: CMLMScorer,
    *,
    threshold: float = 0.9,
    max_iterations: int = 10,
    schedule: str = FILL_EASY_FIRST,
    confidence: str = "max",
) -> Transcript:
    """Greedy pass, mask below ``threshold``, refine masked slots with the CMLM."""
    greedy = ctc_greedy(emissions, confidence=confidence)
    masked = mask_low_confidence(greedy, threshold)
    return cmlm_fill(masked, scorer, max_iterations=max_iterations, schedule=schedule)
