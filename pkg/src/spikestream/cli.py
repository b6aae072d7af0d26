"""Command-line surface: decode, align, stream, eval, sweep."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bridge, report
from .corpus import Utterance, load_corpus, load_refs
from .ctc import ctc_greedy, ctc_logprob, ctc_prefix_beam, ctc_viterbi
from .lattice import Vocab, load_emissions, load_vocab
from .maskctc import mask_ctc_decode
from .metrics import evaluate
from .scorers import (
    BigramAttentionScorer,
    OracleCMLMScorer,
    ScorerTable,
    TableAttentionScorer,
    TableCMLMScorer,
    UniformAttentionScorer,
    UniformCMLMScorer,
    oracle_attention_entries,
)
from .streaming import StreamConfig, stream_decode, token_latency_report
from .sweep import sweep_latency
from .triggered import (
    DEFAULT_BEAM_SIZE,
    DEFAULT_CTC_ATTENTION_WEIGHT,
    extract_triggers,
    triggered_decode,
)


def _path_logprob(emissions, path) -> float:
    rows = emissions.log_probs
    return float(rows[np.arange(len(path)), np.asarray(path)].sum())


def _parse_scorer_options(spec: str) -> tuple[str, dict[str, str]]:
    kind, _, rest = spec.partition(":")
    options: dict[str, str] = {}
    if kind in ("exec", "tcp"):
        return kind, {"endpoint": spec}
    if kind in ("table", "bigram"):
        return kind, {"path": rest}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            options[key] = value
    return kind, options


class ScorerFactory:
    """Builds attention/CMLM scorers from a CLI spec string.

    ``uniform`` | ``table:FILE`` | ``bigram:FILE`` | ``oracle[:margin=N,sharpness=P]``
    | ``exec:CMD`` | ``tcp:HOST:PORT``. Bridge endpoints are shared across
    utterances; oracle scorers are built per utterance from its reference.
    """

    def __init__(self, spec: str, vocab: Vocab, timeout_s: float = bridge.DEFAULT_TIMEOUT_S):
        self.spec = spec
        self.vocab = vocab
        self.kind, self.options = _parse_scorer_options(spec)
        self._bridge: bridge.BridgeScorer | None = None
        if self.kind in ("exec", "tcp"):
            self._bridge = bridge.bridge_serve(
                self.options["endpoint"], vocab.num_tokens, timeout_s=timeout_s
            )
        elif self.kind in ("table", "bigram"):
            self._table = ScorerTable.load(self.options["path"])
            if self._table.num_tokens != vocab.num_tokens:
                raise ValueError(
                    f"table covers {self._table.num_tokens} tokens, vocabulary has {vocab.num_tokens}"
                )
        elif self.kind not in ("uniform", "oracle"):
            raise ValueError(f"unknown scorer spec {self.spec!r}")

    def attention(self, utt: Utterance):
        if self._bridge is not None:
            return self._bridge
        if self.kind == "uniform":
            return UniformAttentionScorer(self.vocab.num_tokens)
        if self.kind == "table":
            return TableAttentionScorer(self._table)
        if self.kind == "bigram":
            rows = {p[0]: e.logp for p, e in self._table.att.items() if len(p) == 1}
            if () in self._table.att:
                rows[0] = self._table.att[()].logp
            return BigramAttentionScorer(self.vocab.num_tokens, rows, self._table.att_default)
        if self.kind == "oracle":
            if utt.reference is None:
                raise ValueError(f"oracle scorer needs a reference for {utt.utt_id}")
            table = ScorerTable(self.vocab.num_tokens)
            margin = int(self.options.get("margin", "0"))
            sharpness = float(self.options.get("sharpness", "0.98"))
            triggers = None
            if margin > 0:
                triggers = ctc_viterbi(utt.emissions, utt.reference).triggers
            oracle_attention_entries(
                table, utt.reference, triggers, margin=margin, sharpness=sharpness
            )
            return TableAttentionScorer(table)
        raise ValueError(f"scorer {self.spec!r} cannot score next tokens")

    def cmlm(self, utt: Utterance):
        if self._bridge is not None:
            return self._bridge
        if self.kind == "uniform":
            return UniformCMLMScorer(self.vocab.num_tokens)
        if self.kind == "table":
            return TableCMLMScorer(self._table)
        if self.kind == "oracle":
            if utt.reference is None:
                raise ValueError(f"oracle scorer needs a reference for {utt.utt_id}")
            sharpness = float(self.options.get("sharpness", "1.0"))
            return OracleCMLMScorer(self.vocab.num_tokens, utt.reference, sharpness)
        raise ValueError(f"scorer {self.spec!r} cannot fill masks")

    def close(self) -> None:
        if self._bridge is not None:
            self._bridge.close()


def _load_utterances(args, vocab: Vocab) -> list[Utterance]:
    path = Path(args.emissions)
    refs = getattr(args, "ref", None)
    if path.is_dir():
        return load_corpus(path, vocab, refs)
    utt_id = path.stem
    reference = None
    if refs is not None:
        reference = load_refs(refs, vocab).get(utt_id)
    return [Utterance(utt_id, load_emissions(path), reference)]


def _cmd_decode(args) -> int:
    vocab = load_vocab(args.vocab)
    utts = _load_utterances(args, vocab)
    factory = ScorerFactory(args.scorer, vocab)
    delta = args.delta if args.delta is not None else args.lookahead
    rows = []
    try:
        for utt in utts:
            if args.mode == "ctc-greedy":
                result = ctc_greedy(utt.emissions)
                rows.append(
                    (utt.utt_id, result.transcript, _path_logprob(utt.emissions, result.argmax_path))
                )
            elif args.mode == "ctc-prefix":
                best = ctc_prefix_beam(utt.emissions, args.beam)[0]
                rows.append((utt.utt_id, best[0], best[1]))
            elif args.mode == "triggered":
                best = triggered_decode(
                    utt.emissions,
                    factory.attention(utt),
                    delta=delta,
                    lam=args.weight,
                    beam=args.beam,
                )[0]
                rows.append((utt.utt_id, best.prefix, best.combined))
            else:  # mask-ctc
                transcript = mask_ctc_decode(
                    utt.emissions,
                    factory.cmlm(utt),
                    threshold=args.threshold,
                    max_iterations=args.max_iterations,
                    schedule=args.fill,
                )
                rows.append((utt.utt_id, transcript, ctc_logprob(utt.emissions, transcript)))
    finally:
        factory.close()
    rendered = [(uid, " ".join(vocab.decode(ids)), score) for uid, ids, score in rows]
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        report.write_hyp_lines(out, rendered)
    finally:
        if args.output:
            out.close()
    return 0


def _cmd_align(args) -> int:
    vocab = load_vocab(args.vocab)
    emissions = load_emissions(args.emissions)
    if args.alignment == "greedy":
        path = ctc_greedy(emissions).argmax_path
        triggers = extract_triggers(path)
        log_prob = _path_logprob(emissions, path)
    else:
        with open(args.text, "r", encoding="utf-8") as fh:
            line = next(l.rstrip("\n") for l in fh if l.strip())
        text = line.split("\t")[1] if "\t" in line else line
        transcript = vocab.encode(text.split())
        forced = ctc_viterbi(emissions, transcript)
        path, triggers, log_prob = forced.path, forced.triggers, forced.log_prob
    print("path:", " ".join(vocab.decode(path)))
    print("triggers:", " ".join(str(t) for t in triggers))
    print(f"log_prob: {log_prob:.6f}")
    return 0


def _cmd_stream(args) -> int:
    vocab = load_vocab(args.vocab)
    emissions = load_emissions(args.emissions)
    factory = ScorerFactory(args.scorer, vocab)
    utt = Utterance(Path(args.emissions).stem, emissions, None)
    config = StreamConfig(
        encoder_lookahead=args.lookahead,
        delta=args.delta,
        lam=args.weight,
        beam=args.beam,
        frame_shift_ms=args.frame_shift_ms,
        subsample_factor=args.subsample,
    )
    try:
        result = stream_decode(
            iter(emissions.log_probs), emissions.num_labels, factory.attention(utt), config
        )
    finally:
        factory.close()
    for event in result.events:
        record = {
            "kind": event.kind,
            "transcript": " ".join(vocab.decode(event.transcript)),
            "frame_issued": event.frame_issued,
            "wallclock_ms": event.wallclock_simulated_ms,
        }
        if event.error is not None:
            record["error"] = event.error
        print(json.dumps(record))
    if args.latency_report:
        for tl in token_latency_report(result, config):
            print(
                json.dumps(
                    {
                        "token": vocab.tokens[tl.token],
                        "position": tl.position,
                        "trigger_frame": tl.trigger_frame,
                        "issued_frame": tl.issued_frame,
                        "latency_ms": tl.latency_ms,
                    }
                )
            )
    return 0


def _cmd_eval(args) -> int:
    refs = load_refs(args.ref)
    hyps = load_refs(args.hyp)
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    missing = sorted(set(refs) - set(hyps))
    if missing:
        raise ValueError(f"hypotheses missing for {missing[:5]}")
    ids = sorted(refs)
    result = evaluate([refs[i] for i in ids], [hyps[i] for i in ids], ids)
    print(
        f"TER {result.token_error_rate:.3f}% "
        f"(sub={result.substitutions} ins={result.insertions} del={result.deletions} "
        f"ref_tokens={result.ref_tokens})"
    )
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "eval.tsv", "w", encoding="utf-8") as fh:
            report.write_eval_tsv(result, fh)
        report.plot_eval(result, out / "eval.png")
    return 0


def _cmd_sweep(args) -> int:
    vocab = load_vocab(args.vocab)
    utts = load_corpus(args.emissions, vocab, args.ref)
    spans = [int(s) for s in args.spans.split(",") if s != ""]
    if not spans:
        raise ValueError("no spans given")
    factory = ScorerFactory(args.scorer, vocab)
    try:
        rows = sweep_latency(
            utts,
            spans,
            factory.attention,
            lam=args.weight,
            beam=args.beam,
            delta=args.delta,
            frame_shift_ms=args.frame_shift_ms,
            subsample_factor=args.subsample,
        )
    finally:
        factory.close()
    report.write_sweep_tsv(rows, sys.stdout)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.tsv", "w", encoding="utf-8") as fh:
            report.write_sweep_tsv(rows, fh)
        report.plot_sweep(rows, out / "sweep.png")
    return 0


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, default=DEFAULT_BEAM_SIZE)
    p.add_argument(
        "--weight",
        type=float,
        default=DEFAULT_CTC_ATTENTION_WEIGHT,
        help="attention weight in the joint score",
    )
    p.add_argument("--lookahead", type=int, default=0, help="encoder look-ahead span (frames)")
    p.add_argument("--delta", type=int, default=None, help="decoder look-ahead (default: --lookahead)")
    p.add_argument("--scorer", default="uniform", help="uniform|table:F|bigram:F|oracle[:k=v]|exec:CMD|tcp:H:P")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikestream",
        description="Streaming CTC / triggered-attention decoding engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode one lattice or a corpus directory")
    p.add_argument("--mode", choices=["ctc-greedy", "ctc-prefix", "triggered", "mask-ctc"], required=True)
    p.add_argument("--emissions", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--ref", default=None, help="reference file (needed by oracle scorers)")
    p.add_argument("--threshold", type=float, default=0.9, help="mask-ctc confidence threshold")
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--fill", choices=["easy-first", "parallel"], default="easy-first")
    p.add_argument("--output", default=None)
    _add_decode_flags(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("align", help="forced (or greedy) alignment with trigger frames")
    p.add_argument("--emissions", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--text", default=None, help="transcript file (required for forced alignment)")
    p.add_argument("--alignment", choices=["forced", "greedy"], default="forced")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("stream", help="simulate streaming decode, one event per line")
    p.add_argument("--emissions", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--frame-shift-ms", type=float, default=10.0)
    p.add_argument("--subsample", type=int, default=4)
    p.add_argument("--latency-report", action="store_true")
    _add_decode_flags(p)
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("eval", help="token error rate of a hypothesis file")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out-dir", default=None, help="write eval.tsv and eval.png here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="decode a corpus at several look-ahead spans")
    p.add_argument("--spans", required=True, help="comma-separated spans, e.g. 4,8,12,16")
    p.add_argument("--emissions", required=True, help="corpus directory of .ctcpost files")
    p.add_argument("--vocab", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--frame-shift-ms", type=float, default=10.0)
    p.add_argument("--subsample", type=int, default=4)
    p.add_argument("--out-dir", default=None, help="write sweep.tsv and sweep.png here")
    _add_decode_flags(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "align" and args.alignment == "forced" and args.text is None:
        print("error: forced alignment requires --text", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
