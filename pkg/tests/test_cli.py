import io
import json
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from spikestream import (
    Vocab,
    load_refs,
    save_emissions,
    save_refs,
    save_vocab,
)
from spikestream.cli import main

from helpers import peaked_emissions

FIXTURES = Path(__file__).parent / "fixtures" / "trend100"


@pytest.fixture
def workdir(tmp_path):
    vocab = Vocab.build(["a", "b"])
    save_vocab(vocab, tmp_path / "vocab.txt")
    E = peaked_emissions([0, 1, 1, 0, 2, 0], 3, peak=0.9)
    save_emissions(E, tmp_path / "utt-0.ctcpost")
    save_refs({"utt-0": (1, 2)}, vocab, tmp_path / "refs.tsv")
    return tmp_path


def run_cli(args):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(args)
    return code, buf.getvalue()


class TestDecode:
    @pytest.mark.parametrize("mode", ["ctc-greedy", "ctc-prefix", "triggered", "mask-ctc"])
    def test_modes_produce_hyp_lines(self, workdir, mode):
        code, out = run_cli(
            [
                "decode",
                "--mode",
                mode,
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0
        utt_id, text, score = out.strip().split("\t")
        assert utt_id == "utt-0"
        assert text == "a b"
        float(score)

    def test_directory_corpus(self, workdir):
        code, out = run_cli(
            [
                "decode",
                "--mode",
                "ctc-greedy",
                "--emissions",
                str(workdir),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0 and out.startswith("utt-0\t")

    def test_output_file(self, workdir):
        out_path = workdir / "hyp.tsv"
        code, _ = run_cli(
            [
                "decode",
                "--mode",
                "triggered",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--output",
                str(out_path),
            ]
        )
        assert code == 0
        vocab_lines = out_path.read_text().splitlines()
        assert len(vocab_lines) == 1

    def test_oracle_scorer_needs_ref(self, workdir, capsys):
        code = main(
            [
                "decode",
                "--mode",
                "triggered",
                "--scorer",
                "oracle",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_oracle_scorer_with_ref(self, workdir):
        code, out = run_cli(
            [
                "decode",
                "--mode",
                "triggered",
                "--scorer",
                "oracle:margin=1",
                "--ref",
                str(workdir / "refs.tsv"),
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0 and out.split("\t")[1] == "a b"

    def test_parallel_fill_flag(self, workdir):
        code, out = run_cli(
            [
                "decode",
                "--mode",
                "mask-ctc",
                "--fill",
                "parallel",
                "--threshold",
                "0.5",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0 and out.split("\t")[1] == "a b"


class TestAlign:
    def test_forced(self, workdir):
        (workdir / "text.txt").write_text("a b\n")
        code, out = run_cli(
            [
                "align",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--text",
                str(workdir / "text.txt"),
            ]
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "path: <blank> a a <blank> b <blank>"
        assert lines[1] == "triggers: 1 4"
        assert lines[2].startswith("log_prob:")

    def test_greedy_alignment(self, workdir):
        code, out = run_cli(
            [
                "align",
                "--alignment",
                "greedy",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0 and out.splitlines()[1] == "triggers: 1 4"

    def test_forced_requires_text(self, workdir, capsys):
        code = main(
            [
                "align",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 2

    def test_infeasible_text_fails_cleanly(self, workdir, capsys):
        (workdir / "text.txt").write_text("a b a b a b a b\n")
        code = main(
            [
                "align",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--text",
                str(workdir / "text.txt"),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestStream:
    def test_event_records(self, workdir):
        code, out = run_cli(
            [
                "stream",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--lookahead",
                "1",
                "--latency-report",
            ]
        )
        assert code == 0
        records = [json.loads(line) for line in out.splitlines()]
        finals = [r for r in records if r.get("kind") == "final"]
        assert len(finals) == 1
        assert finals[0]["transcript"] == "a b"
        latencies = [r for r in records if "latency_ms" in r]
        assert len(latencies) == 2


class TestEval:
    def test_summary_line(self, workdir):
        save_refs({"utt-0": (1, 2)}, Vocab.build(["a", "b"]), workdir / "hyp.tsv")
        code, out = run_cli(
            ["eval", "--ref", str(workdir / "refs.tsv"), "--hyp", str(workdir / "hyp.tsv")]
        )
        assert code == 0
        assert out.startswith("TER 0.000%")

    def test_report_files(self, workdir):
        (workdir / "hyp.tsv").write_text("utt-0\ta a\t0\n")
        out_dir = workdir / "report"
        code, out = run_cli(
            [
                "eval",
                "--ref",
                str(workdir / "refs.tsv"),
                "--hyp",
                str(workdir / "hyp.tsv"),
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        assert (out_dir / "eval.tsv").exists()
        assert (out_dir / "eval.png").stat().st_size > 0
        assert "TER 50.000%" in out

    def test_count_mismatch(self, workdir, capsys):
        (workdir / "hyp.tsv").write_text("utt-0\ta\t0\nutt-1\tb\t0\n")
        code = main(
            ["eval", "--ref", str(workdir / "refs.tsv"), "--hyp", str(workdir / "hyp.tsv")]
        )
        assert code == 1


class TestSweep:
    def test_rows_and_figure(self, workdir):
        out_dir = workdir / "sweepout"
        code, out = run_cli(
            [
                "sweep",
                "--spans",
                "0,2",
                "--emissions",
                str(workdir),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--ref",
                str(workdir / "refs.tsv"),
                "--scorer",
                "oracle:margin=1",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("lookahead\tlatency_ms\tter")
        assert len(lines) == 3
        assert (out_dir / "sweep.tsv").read_text() == out
        assert (out_dir / "sweep.png").stat().st_size > 0

    def test_latency_column_matches_grid(self, workdir):
        code, out = run_cli(
            [
                "sweep",
                "--spans",
                "4,8,12,16",
                "--emissions",
                str(workdir),
                "--vocab",
                str(workdir / "vocab.txt"),
                "--ref",
                str(workdir / "refs.tsv"),
            ]
        )
        assert code == 0
        latencies = [line.split("\t")[1] for line in out.strip().splitlines()[1:]]
        assert latencies == ["160", "320", "480", "640"]


class TestRefsIO:
    def test_round_trip(self, tmp_path):
        vocab = Vocab.build(["a", "b"])
        refs = {"u1": (1, 2), "u2": ()}
        save_refs(refs, vocab, tmp_path / "r.tsv")
        assert load_refs(tmp_path / "r.tsv", vocab) == refs

    def test_string_mode(self, tmp_path):
        (tmp_path / "r.tsv").write_text("u1\ta b\n")
        assert load_refs(tmp_path / "r.tsv") == {"u1": ("a", "b")}


class TestDefaultsPlumbing:
    def test_stock_operating_point(self):
        from spikestream import decode_defaults
        from spikestream.cli import build_parser

        args = build_parser().parse_args(
            ["decode", "--mode", "triggered", "--emissions", "x", "--vocab", "y"]
        )
        defaults = decode_defaults()
        assert args.beam == defaults.beam_size == 10
        assert args.weight == defaults.ctc_attention_weight == 0.5

    def test_flags_override_defaults(self):
        from spikestream.cli import build_parser

        args = build_parser().parse_args(
            [
                "decode",
                "--mode",
                "triggered",
                "--emissions",
                "x",
                "--vocab",
                "y",
                "--beam",
                "3",
                "--weight",
                "0.25",
            ]
        )
        assert args.beam == 3 and args.weight == 0.25


class TestBigramScorer:
    def test_bigram_table_decode(self, workdir):
        import numpy as np

        from spikestream import ScorerTable
        from spikestream.scorers import TableEntry, normalize_log_row

        table = ScorerTable(2)
        table.att[()] = TableEntry(normalize_log_row(np.array([0.0, -1.0, -5.0])))
        table.att[(1,)] = TableEntry(normalize_log_row(np.array([-2.0, 0.0, -1.0])))
        table.att[(2,)] = TableEntry(normalize_log_row(np.array([-1.0, -1.0, 0.0])))
        table.save(workdir / "bigram.json")
        code, out = run_cli(
            [
                "decode",
                "--mode",
                "triggered",
                "--scorer",
                f"bigram:{workdir / 'bigram.json'}",
                "--emissions",
                str(workdir / "utt-0.ctcpost"),
                "--vocab",
                str(workdir / "vocab.txt"),
            ]
        )
        assert code == 0 and out.split("\t")[1] == "a b"

    def test_bigram_conditions_on_last_token_only(self):
        import numpy as np

        from spikestream import BigramAttentionScorer
        from spikestream.scorers import normalize_log_row

        rows = {
            0: normalize_log_row(np.array([0.0, -1.0, -2.0])),
            1: normalize_log_row(np.array([-3.0, 0.0, -1.0])),
        }
        scorer = BigramAttentionScorer(2, rows)
        assert np.array_equal(scorer.score_next((), 0), rows[0])
        assert np.array_equal(scorer.score_next((2, 1), 5), rows[1])
        # unseen last token falls back to the uniform default
        fallback = scorer.score_next((2,), 0)
        assert np.allclose(fallback, fallback[0])
