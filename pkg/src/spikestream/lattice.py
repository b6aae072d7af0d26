"""Core lattice types: vocabularies, emission matrices, CTC collapse, latency.

Conventions shared by every module in this package:

* token id 0 is always the CTC blank,
* an emission matrix holds one row of log-posteriors per frame over
  blank + tokens, and every row is a normalized distribution,
* transcripts are blank-free tuples of token ids,
* vocabulary files list one token per line with ``<blank>`` on line 0 and
  an optional trailing ``<eos>`` line naming the attention end symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

BLANK_ID = 0
BLANK_TOKEN = "<blank>"
EOS_TOKEN = "<eos>"

EMISSION_MAGIC = "CTCPOST"
EMISSION_VERSION = 1

# tolerance, in the log domain, for a row to count as a normalized distribution
ROW_NORM_TOL = 1e-6

NEG_INF = float("-inf")

Transcript = tuple[int, ...]
FramePath = tuple[int, ...]


class FormatError(ValueError):
    """A lattice or vocabulary file violates its format.

    Carries the 1-based line number when the offending line is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Vocab:
    """Token inventory: ``<blank>`` at id 0, real tokens, optional ``<eos>`` last.

    ``num_tokens`` counts only the real tokens (no blank, no eos);
    ``num_labels`` is the emission-matrix width, ``num_tokens + 1``.
    """

    tokens: tuple[str, ...]
    eos_id: int | None = None

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not tokens:
            raise ValueError("vocabulary is empty")
        if tokens[0] != BLANK_TOKEN:
            raise ValueError(f"token id 0 must be {BLANK_TOKEN!r}, got {tokens[0]!r}")
        if any(t == "" for t in tokens):
            raise ValueError("vocabulary contains an empty token")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        if EOS_TOKEN in tokens:
            if tokens.index(EOS_TOKEN) != len(tokens) - 1:
                raise ValueError(f"{EOS_TOKEN!r} must be the last vocabulary entry")
            if self.eos_id is None:
                object.__setattr__(self, "eos_id", len(tokens) - 1)
        if self.eos_id is not None:
            if not (0 < self.eos_id < len(tokens)):
                raise ValueError(f"eos_id {self.eos_id} out of range")
            if tokens[self.eos_id] != EOS_TOKEN:
                raise ValueError(f"eos_id {self.eos_id} does not point at {EOS_TOKEN!r}")
        if len(tokens) - 1 - (1 if self.eos_id is not None else 0) < 1:
            raise ValueError("vocabulary has no real tokens")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    @classmethod
    def build(cls, tokens: Iterable[str], include_eos: bool = False) -> "Vocab":
        """Assemble a vocabulary from plain tokens, adding the special symbols."""
        items = [BLANK_TOKEN, *tokens]
        if include_eos:
            items.append(EOS_TOKEN)
        return cls(tuple(items))

    @property
    def num_tokens(self) -> int:
        return len(self.tokens) - 1 - (1 if self.eos_id is not None else 0)

    @property
    def num_labels(self) -> int:
        return self.num_tokens + 1

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown token {token!r}") from None

    def encode(self, tokens: Sequence[str]) -> Transcript:
        """Map token strings to a blank-free transcript."""
        ids = tuple(self.id_of(t) for t in tokens)
        check_transcript(ids, self.num_labels)
        return ids

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def check_transcript(ids: Sequence[int], num_labels: int) -> None:
    """Raise ValueError unless ``ids`` is a valid blank-free transcript."""
    for pos, i in enumerate(ids):
        if not isinstance(i, (int, np.integer)):
            raise ValueError(f"transcript position {pos}: {i!r} is not a token id")
        if i == BLANK_ID:
            raise ValueError(f"transcript position {pos}: blank is not allowed")
        if not (0 < i < num_labels):
            raise ValueError(f"transcript position {pos}: id {i} out of range (1..{num_labels - 1})")


def load_vocab(source: str | Path | IO[str]) -> Vocab:
    """Parse a vocabulary file: one token per line, ``<blank>`` first."""
    with _reader(source) as fh:
        tokens = [line.rstrip("\n") for line in fh]
    while tokens and tokens[-1] == "":
        tokens.pop()
    if not tokens:
        raise FormatError("vocabulary file is empty")
    if tokens[0] != BLANK_TOKEN:
        raise FormatError(f"first entry must be {BLANK_TOKEN!r}, got {tokens[0]!r}", line=1)
    try:
        return Vocab(tuple(tokens))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_vocab(vocab: Vocab, sink: str | Path | IO[str]) -> None:
    with _writer(sink) as fh:
        for t in vocab.tokens:
            fh.write(t + "\n")


@dataclass(frozen=True)
class EmissionMatrix:
    """T x num_labels lattice of CTC log-posteriors (column 0 = blank).

    Every entry is finite or ``-inf`` and each row log-sums to 0 within
    ``ROW_NORM_TOL``. The backing array is frozen after construction.
    """

    log_probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.log_probs, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"emissions must be a 2-D matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("emission matrix needs at least one frame")
        if arr.shape[1] < 2:
            raise ValueError("emission matrix needs blank plus at least one token")
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise ValueError("emission entries must be finite or -inf")
        norms = np.logaddexp.reduce(arr, axis=1)
        bad = np.nonzero(np.abs(norms) > ROW_NORM_TOL)[0]
        if bad.size:
            raise ValueError(
                f"row {bad[0]} is not a normalized distribution (log-sum {norms[bad[0]]:+.3e})"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "log_probs", arr)

    @property
    def num_frames(self) -> int:
        return self.log_probs.shape[0]

    @property
    def num_labels(self) -> int:
        return self.log_probs.shape[1]


def collapse(path: Sequence[int], num_labels: int | None = None) -> Transcript:
    """Collapse a frame path: merge consecutive repeats, then drop blanks."""
    for pos, p in enumerate(path):
        if not isinstance(p, (int, np.integer)) or p < 0:
            raise ValueError(f"path position {pos}: invalid token id {p!r}")
        if num_labels is not None and p >= num_labels:
            raise ValueError(f"path position {pos}: id {p} out of range (0..{num_labels - 1})")
    return tuple(int(k) for k, _ in groupby(path) if k != BLANK_ID)


def _parse_value(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"bad value {text!r}", line=line) from None
    if v != v or v == float("inf"):
        raise FormatError(f"value {text!r} is not finite or -inf", line=line)
    return v


def load_emissions(source: str | Path | IO[str]) -> EmissionMatrix:
    """Parse an emission lattice file (see ``save_emissions`` for the format)."""
    with _reader(source) as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty file", line=1)
        fields = header.split()
        if len(fields) != 4 or fields[0] != EMISSION_MAGIC:
            raise FormatError(f"expected {EMISSION_MAGIC!r} header, got {header.strip()!r}", line=1)
        try:
            version, num_frames, num_labels = (int(f) for f in fields[1:])
        except ValueError:
            raise FormatError(f"malformed header {header.strip()!r}", line=1) from None
        if version != EMISSION_VERSION:
            raise FormatError(f"unsupported version {version}", line=1)
        if num_frames < 1 or num_labels < 2:
            raise FormatError(f"bad dimensions {num_frames}x{num_labels}", line=1)
        rows = np.empty((num_frames, num_labels), dtype=np.float64)
        for t in range(num_frames):
            line_no = t + 2
            line = fh.readline()
            if not line:
                raise FormatError(f"expected {num_frames} rows, file ends at row {t}", line=line_no)
            parts = line.split()
            if len(parts) != num_labels:
                raise FormatError(
                    f"row {t} has {len(parts)} values, expected {num_labels}", line=line_no
                )
            rows[t] = [_parse_value(p, line_no) for p in parts]
        for extra in fh:
            if extra.strip():
                raise FormatError("trailing data after last row", line=num_frames + 2)
    try:
        return EmissionMatrix(rows)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_emissions(matrix: EmissionMatrix, sink: str | Path | IO[str]) -> None:
    """Write the canonical textual form: header line, then one row per frame.

    Values print with 17 significant digits so that load(save(m)) reproduces
    the doubles exactly and a second save is byte-identical.
    """
    if not isinstance(matrix, EmissionMatrix):
        raise TypeError("save_emissions expects an EmissionMatrix")
    with _writer(sink) as fh:
        fh.write(f"{EMISSION_MAGIC} {EMISSION_VERSION} {matrix.num_frames} {matrix.num_labels}\n")
        for row in matrix.log_probs:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


@dataclass(frozen=True)
class LatencySpec:
    """Maps encoder look-ahead spans to wall-clock latency.

    ``frame_shift_ms`` is the acoustic frame shift, ``subsample_factor`` the
    number of acoustic frames per encoder frame, ``lookahead_frames`` the
    encoder frames of future context the encoder may read.
    """

    frame_shift_ms: float = 10.0
    subsample_factor: int = 4
    lookahead_frames: int = 0

    def __post_init__(self):
        if self.frame_shift_ms <= 0:
            raise ValueError("frame_shift_ms must be positive")
        if self.subsample_factor < 1:
            raise ValueError("subsample_factor must be >= 1")
        if self.lookahead_frames < 0:
            raise ValueError("lookahead_frames must be >= 0")

    @property
    def encoder_frame_ms(self) -> float:
        return self.subsample_factor * self.frame_shift_ms


def latency_ms(spec: LatencySpec) -> float:
    """Encoder latency contributed by the look-ahead span, in milliseconds."""
    return spec.lookahead_frames * spec.subsample_factor * spec.frame_shift_ms


class _reader:
    def __init__(self, source):
        self._owned = isinstance(source, (str, Path))
        self._fh = open(source, "r", encoding="utf-8") if self._owned else source

    def __enter__(self) -> IO[str]:
        return self._fh

    def __exit__(self, *exc):
        if self._owned:
            self._fh.close()


class _writer:
    def __init__(self, sink):
        self._owned = isinstance(sink, (str, Path))
        self._fh = open(sink, "w", encoding="utf-8", newline="\n") if self._owned else sink

    def __enter__(self) -> IO[str]:
        return self._fh

    def __exit__(self, *exc):
        if self._owned:
            self._fh.close()
