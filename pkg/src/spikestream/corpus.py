"""Corpus plumbing: reference files and directories of emission lattices.

A reference file has one utterance per line, ``<utt-id>\\t<tokens space
separated>``; a corpus directory holds one ``<utt-id>.ctcpost`` lattice per
utterance. Hypothesis files append a third score column.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO

from .lattice import EmissionMatrix, FormatError, Transcript, Vocab, load_emissions

EMISSION_SUFFIX = ".ctcpost"


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    emissions: EmissionMatrix
    reference: Transcript | None = None


def load_refs(source: str | Path | IO[str], vocab: Vocab | None = None) -> dict[str, tuple]:
    """Parse a reference (or hypothesis) file into id -> transcript.

    With a vocabulary the transcripts are token-id tuples; without one they
    stay token-string tuples (enough for error-rate computation).
    """
    close = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if close else source
    try:
        refs: dict[str, tuple] = {}
        for n, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise FormatError("expected <utt-id>\\t<tokens>", line=n)
            utt_id, text = parts[0], parts[1]
            if utt_id in refs:
                raise FormatError(f"duplicate utterance id {utt_id!r}", line=n)
            tokens = text.split()
            try:
                refs[utt_id] = vocab.encode(tokens) if vocab is not None else tuple(tokens)
            except (KeyError, ValueError) as exc:
                raise FormatError(str(exc), line=n) from exc
        return refs
    finally:
        if close:
            fh.close()


def save_refs(refs: dict[str, Transcript], vocab: Vocab, sink: str | Path | IO[str]) -> None:
    close = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8", newline="\n") if close else sink
    try:
        for utt_id, ids in refs.items():
            fh.write(f"{utt_id}\t{' '.join(vocab.decode(ids))}\n")
    finally:
        if close:
            fh.close()


def emission_paths(directory: str | Path) -> list[Path]:
    paths = sorted(Path(directory).glob(f"*{EMISSION_SUFFIX}"))
    if not paths:
        raise FileNotFoundError(f"no {EMISSION_SUFFIX} files under {directory}")
    return paths


def load_corpus(
    directory: str | Path, vocab: Vocab, refs_path: str | Path | None = None
) -> list[Utterance]:
    """Load every lattice in a directory, attaching references when given."""
    refs = load_refs(refs_path, vocab) if refs_path is not None else {}
    utts = []
    for path in emission_paths(directory):
        utt_id = path.stem
        emissions = load_emissions(path)
        if emissions.num_labels != vocab.num_labels:
            raise FormatError(
                f"{path.name}: lattice has {emissions.num_labels} labels, vocabulary {vocab.num_labels}"
            )
        utts.append(Utterance(utt_id, emissions, refs.get(utt_id)))
    return utts
