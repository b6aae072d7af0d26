"""Scorer interfaces and the built-in data-driven toy scorers.

Two scorer roles exist:

* attention scorers answer ``score_next(prefix, frame_limit)`` with a log
  distribution over the next token. Rows have ``num_tokens + 1`` entries:
  slot ``k`` is token id ``k + 1`` and the final slot is the end symbol.
* CMLM scorers answer ``predict(slots)`` with one log distribution per
  masked slot, each of ``num_tokens`` entries (slot ``k`` = token id ``k+1``).

``frame_limit`` is the number of encoded frames the scorer may read. Toy
scorers are plain lookup tables so tests can build oracles and adversaries
as data; table entries may carry ``visible_from``, the smallest frame_limit
at which the entry applies (below it the default row is returned), which is
what makes a table scorer latency-sensitive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .lattice import Transcript

MASK = -1


class ScorerError(RuntimeError):
    """A scorer failed; carries the offending prefix/slots and raw payload."""

    def __init__(self, message: str, *, prefix=None, payload=None):
        super().__init__(message)
        self.prefix = prefix
        self.payload = payload


@runtime_checkable
class AttentionScorer(Protocol):
    num_tokens: int

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray: ...


@runtime_checkable
class CMLMScorer(Protocol):
    num_tokens: int

    def predict(self, slots: Sequence[int]) -> np.ndarray: ...


def token_slot(token_id: int) -> int:
    """Column of a scorer row holding ``token_id`` (ids start at 1)."""
    return token_id - 1


def eos_slot(num_tokens: int) -> int:
    return num_tokens


def uniform_row(size: int) -> np.ndarray:
    return np.full(size, -math.log(size))


def normalize_log_row(values: Sequence[float]) -> np.ndarray:
    row = np.asarray(values, dtype=np.float64)
    return row - np.logaddexp.reduce(row)


def sharp_row(size: int, hot: int, sharpness: float = 0.98) -> np.ndarray:
    """Distribution putting ``sharpness`` mass on one slot, the rest uniform."""
    probs = np.full(size, (1.0 - sharpness) / (size - 1)) if size > 1 else np.ones(1)
    if size > 1:
        probs[hot] = sharpness
    return np.log(probs)


class UniformAttentionScorer:
    """Same log-probability for every next token (and eos)."""

    def __init__(self, num_tokens: int):
        self.num_tokens = num_tokens
        self._row = uniform_row(num_tokens + 1)
        self._row.setflags(write=False)

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray:
        return self._row


class UniformCMLMScorer:
    def __init__(self, num_tokens: int):
        self.num_tokens = num_tokens
        self._row = uniform_row(num_tokens)
        self._row.setflags(write=False)

    def predict(self, slots: Sequence[int]) -> np.ndarray:
        n_masked = sum(1 for s in slots if s == MASK)
        return np.tile(self._row, (n_masked, 1))


@dataclass
class TableEntry:
    logp: np.ndarray
    visible_from: int | None = None


@dataclass
class ScorerTable:
    """Data backing the table scorers; serializable to/from JSON.

    ``att`` maps prefixes to next-token rows (length num_tokens + 1, eos
    last); ``cmlm`` maps slot tuples (MASK = -1) to one row per masked slot.
    Missing keys fall back to the default rows (uniform when absent).
    """

    num_tokens: int
    att: dict[Transcript, TableEntry] = field(default_factory=dict)
    att_default: np.ndarray | None = None
    cmlm: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict)
    cmlm_default: np.ndarray | None = None

    def to_json(self) -> dict:
        doc: dict = {"vocab_size": self.num_tokens}
        att: dict = {
            "entries": [
                {
                    "prefix": list(prefix),
                    "logp": entry.logp.tolist(),
                    **({"visible_from": entry.visible_from} if entry.visible_from is not None else {}),
                }
                for prefix, entry in self.att.items()
            ]
        }
        if self.att_default is not None:
            att["default"] = self.att_default.tolist()
        doc["att"] = att
        cmlm: dict = {
            "entries": [
                {"slots": list(slots), "logp": rows.tolist()} for slots, rows in self.cmlm.items()
            ]
        }
        if self.cmlm_default is not None:
            cmlm["default"] = self.cmlm_default.tolist()
        doc["cmlm"] = cmlm
        return doc

    def save(self, sink: str | Path | IO[str]) -> None:
        doc = self.to_json()
        if isinstance(sink, (str, Path)):
            with open(sink, "w", encoding="utf-8") as fh:
                json.dump(doc, fh)
                fh.write("\n")
        else:
            json.dump(doc, sink)
            sink.write("\n")

    @classmethod
    def from_json(cls, doc: dict) -> "ScorerTable":
        table = cls(num_tokens=int(doc["vocab_size"]))
        att = doc.get("att", {})
        if "default" in att:
            table.att_default = np.asarray(att["default"], dtype=np.float64)
        for entry in att.get("entries", []):
            table.att[tuple(int(i) for i in entry["prefix"])] = TableEntry(
                np.asarray(entry["logp"], dtype=np.float64),
                entry.get("visible_from"),
            )
        cmlm = doc.get("cmlm", {})
        if "default" in cmlm:
            table.cmlm_default = np.asarray(cmlm["default"], dtype=np.float64)
        for entry in cmlm.get("entries", []):
            table.cmlm[tuple(int(i) for i in entry["slots"])] = np.asarray(
                entry["logp"], dtype=np.float64
            )
        return table

    @classmethod
    def load(cls, source: str | Path | IO[str]) -> "ScorerTable":
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        return cls.from_json(json.load(source))


class TableAttentionScorer:
    """Attention scorer answering from a ScorerTable."""

    def __init__(self, table: ScorerTable):
        self.table = table
        self.num_tokens = table.num_tokens
        self._default = (
            table.att_default if table.att_default is not None else uniform_row(table.num_tokens + 1)
        )

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray:
        entry = self.table.att.get(tuple(prefix))
        if entry is None:
            return self._default
        if entry.visible_from is not None and frame_limit < entry.visible_from:
            return self._default
        return entry.logp


class TableCMLMScorer:
    """CMLM scorer answering from a ScorerTable."""

    def __init__(self, table: ScorerTable):
        self.table = table
        self.num_tokens = table.num_tokens
        self._default = (
            table.cmlm_default if table.cmlm_default is not None else uniform_row(table.num_tokens)
        )

    def predict(self, slots: Sequence[int]) -> np.ndarray:
        key = tuple(int(s) for s in slots)
        n_masked = sum(1 for s in key if s == MASK)
        rows = self.table.cmlm.get(key)
        if rows is None:
            return np.tile(self._default, (n_masked, 1))
        return rows


class BigramAttentionScorer:
    """Attention scorer conditioned on the last token only."""

    def __init__(self, num_tokens: int, rows: dict[int, np.ndarray], default: np.ndarray | None = None):
        self.num_tokens = num_tokens
        self._rows = rows
        self._default = default if default is not None else uniform_row(num_tokens + 1)

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray:
        last = prefix[-1] if prefix else 0
        return self._rows.get(last, self._default)


class RecordingScorer:
    """Wraps a scorer and logs every call, for causality checks in tests.

    ``step_source`` (optional) supplies the decoder's current frame index so
    the log can relate frame_limit to decode time.
    """

    def __init__(self, inner, step_source: Callable[[], int] | None = None):
        self.inner = inner
        self.num_tokens = inner.num_tokens
        self.step_source = step_source
        self.calls: list[tuple[Transcript, int, int | None]] = []

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray:
        step = self.step_source() if self.step_source is not None else None
        self.calls.append((tuple(prefix), frame_limit, step))
        return self.inner.score_next(prefix, frame_limit)

    def predict(self, slots: Sequence[int]) -> np.ndarray:
        return self.inner.predict(slots)


def oracle_attention_entries(
    table: ScorerTable,
    reference: Transcript,
    triggers: Sequence[int] | None = None,
    *,
    margin: int = 0,
    sharpness: float = 0.98,
) -> None:
    """Add oracle rows for one utterance: each reference prefix predicts the
    true next token (eos after the last one).

    With ``triggers`` given, a row only becomes visible once frame_limit
    reaches the token's trigger frame plus ``margin``; below that the scorer
    falls back to its default row.
    """
    n = table.num_tokens
    for l in range(len(reference) + 1):
        prefix = tuple(reference[:l])
        hot = eos_slot(n) if l == len(reference) else token_slot(reference[l])
        visible = None
        if triggers is not None and l < len(reference):
            visible = triggers[l] + 1 + margin
        table.att[prefix] = TableEntry(sharp_row(n + 1, hot, sharpness), visible)


def oracle_cmlm_entries(
    table: ScorerTable, reference: Transcript, *, sharpness: float = 0.98
) -> None:
    """Add CMLM oracle rows for every single-mask pattern of the reference."""
    ref = tuple(reference)
    n = table.num_tokens
    for i in range(len(ref)):
        slots = ref[:i] + (MASK,) + ref[i + 1 :]
        table.cmlm[slots] = sharp_row(n, token_slot(ref[i]), sharpness)[None, :]


class OracleCMLMScorer:
    """Predicts the planted truth at every masked slot, for any mask pattern."""

    def __init__(self, num_tokens: int, truth: Transcript, sharpness: float = 1.0):
        self.num_tokens = num_tokens
        self.truth = tuple(truth)
        self.sharpness = sharpness

    def predict(self, slots: Sequence[int]) -> np.ndarray:
        if len(slots) != len(self.truth):
            raise ScorerError(
                f"oracle knows a {len(self.truth)}-token truth, got {len(slots)} slots",
                prefix=tuple(slots),
            )
        rows = []
        for i, s in enumerate(slots):
            if s == MASK:
                if self.sharpness >= 1.0:
                    row = np.full(self.num_tokens, float("-inf"))
                    row[token_slot(self.truth[i])] = 0.0
                else:
                    row = sharp_row(self.num_tokens, token_slot(self.truth[i]), self.sharpness)
                rows.append(row)
        return np.asarray(rows).reshape(len(rows), self.num_tokens)
