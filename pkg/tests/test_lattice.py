import io
import math

import numpy as np
import pytest

from spikestream import (
    BLANK_ID,
    EmissionMatrix,
    FormatError,
    LatencySpec,
    Vocab,
    collapse,
    latency_ms,
    load_emissions,
    load_vocab,
    save_emissions,
    save_vocab,
)

from helpers import random_emissions


class TestCollapse:
    def test_all_blank(self):
        assert collapse((0, 0, 0)) == ()

    def test_merge_then_delete(self):
        # a a _ a -> a a
        assert collapse((1, 1, 0, 1)) == (1, 1)

    def test_interleaved(self):
        # _ a a b _ b -> a b b
        assert collapse((0, 1, 1, 2, 0, 2)) == (1, 2, 2)

    def test_invalid_id_rejected(self):
        with pytest.raises(ValueError):
            collapse((0, -1))
        with pytest.raises(ValueError):
            collapse((0, 3), num_labels=3)

    def test_duplication_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            path = tuple(int(i) for i in rng.integers(0, 3, size=rng.integers(1, 10)))
            pos = int(rng.integers(0, len(path)))
            dup = path[: pos + 1] + (path[pos],) + path[pos + 1 :]
            assert collapse(dup) == collapse(path)

    def test_surjective_onto_blank_free(self):
        # every blank-free sequence of length <= T is hit by some path
        for y in [(), (1,), (1, 2), (2, 2)]:
            path = []
            prev = None
            for label in y:
                if label == prev:
                    path.append(BLANK_ID)
                path.append(label)
                prev = label
            while len(path) < 4:
                path.append(BLANK_ID)
            assert collapse(tuple(path)) == y


class TestEmissionIO:
    def test_save_format_exact(self):
        m = EmissionMatrix(np.array([[0.0, float("-inf")]]))
        buf = io.StringIO()
        save_emissions(m, buf)
        assert buf.getvalue() == "CTCPOST 1 1 2\n0 -inf\n"

    def test_header_example(self):
        text = "CTCPOST 1 2 3\n" + "-1.0986122886681098 -1.0986122886681098 -1.0986122886681098\n" * 2
        m = load_emissions(io.StringIO(text))
        assert m.num_frames == 2 and m.num_labels == 3

    def test_row_length_mismatch(self):
        text = "CTCPOST 1 1 3\n0 -inf\n"
        with pytest.raises(FormatError, match="row 0"):
            load_emissions(io.StringIO(text))

    def test_bad_header(self):
        with pytest.raises(FormatError, match="line 1"):
            load_emissions(io.StringIO("NOPE 1 1 2\n0 -inf\n"))

    def test_unnormalized_row_rejected(self):
        with pytest.raises(FormatError, match="normalized"):
            load_emissions(io.StringIO("CTCPOST 1 1 2\n-1 -1\n"))

    def test_nan_rejected(self):
        with pytest.raises(FormatError, match="finite"):
            load_emissions(io.StringIO("CTCPOST 1 1 2\nnan 0\n"))

    def test_round_trip_values_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = random_emissions(rng, int(rng.integers(1, 7)), int(rng.integers(2, 5)))
            buf = io.StringIO()
            save_emissions(m, buf)
            again = load_emissions(io.StringIO(buf.getvalue()))
            assert np.array_equal(again.log_probs, m.log_probs)

    def test_canonicalization_idempotent(self):
        rng = np.random.default_rng(4)
        m = random_emissions(rng, 5, 3)
        buf1 = io.StringIO()
        save_emissions(m, buf1)
        buf2 = io.StringIO()
        save_emissions(load_emissions(io.StringIO(buf1.getvalue())), buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError, match="frame"):
            EmissionMatrix(np.empty((0, 2)))

    def test_file_round_trip(self, tmp_path):
        m = EmissionMatrix(np.log([[0.25, 0.75], [0.5, 0.5]]))
        path = tmp_path / "m.ctcpost"
        save_emissions(m, path)
        assert np.array_equal(load_emissions(path).log_probs, m.log_probs)

    def test_trailing_garbage_rejected(self):
        text = "CTCPOST 1 1 2\n0 -inf\n0 0\n"
        with pytest.raises(FormatError, match="trailing"):
            load_emissions(io.StringIO(text))


class TestVocab:
    def test_basic(self):
        v = Vocab(("<blank>", "a", "b"))
        assert v.num_tokens == 2 and v.num_labels == 3 and v.eos_id is None
        assert v.encode(["a", "b"]) == (1, 2)
        assert v.decode((1, 2)) == ["a", "b"]

    def test_eos_must_be_last(self):
        with pytest.raises(ValueError):
            Vocab(("<blank>", "<eos>", "a"))
        v = Vocab(("<blank>", "a", "<eos>"))
        assert v.eos_id == 2 and v.num_tokens == 1

    def test_blank_required_first(self):
        with pytest.raises(ValueError):
            Vocab(("a", "<blank>"))

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            Vocab(("<blank>", "a", "a"))

    def test_transcript_rejects_blank_and_eos(self):
        v = Vocab(("<blank>", "a", "<eos>"))
        with pytest.raises(ValueError):
            v.encode(["<blank>"])
        with pytest.raises(ValueError):
            v.encode(["<eos>"])

    def test_file_round_trip(self, tmp_path):
        v = Vocab.build(["a", "b", "c"], include_eos=True)
        path = tmp_path / "vocab.txt"
        save_vocab(v, path)
        assert load_vocab(path) == v

    def test_load_rejects_missing_blank(self):
        with pytest.raises(FormatError):
            load_vocab(io.StringIO("a\nb\n"))


class TestLatency:
    def test_spec_points(self):
        assert latency_ms(LatencySpec(10.0, 4, 8)) == 320.0
        assert latency_ms(LatencySpec(10.0, 4, 0)) == 0.0

    def test_table_grid(self):
        grid = [latency_ms(LatencySpec(10.0, 4, n)) for n in (4, 8, 12, 16)]
        assert grid == [160.0, 320.0, 480.0, 640.0]

    def test_linear_and_increasing(self):
        values = [latency_ms(LatencySpec(10.0, 4, n)) for n in range(10)]
        diffs = {round(b - a, 9) for a, b in zip(values, values[1:])}
        assert diffs == {40.0}

    def test_invariants(self):
        with pytest.raises(ValueError):
            LatencySpec(0.0, 4, 0)
        with pytest.raises(ValueError):
            LatencySpec(10.0, 0, 0)
        with pytest.raises(ValueError):
            LatencySpec(10.0, 4, -1)

    def test_row_norm_tolerance(self):
        # slightly off rows within 1e-6 are accepted
        row = np.log([0.5, 0.5]) + 4e-7
        EmissionMatrix(row[None, :])
        with pytest.raises(ValueError):
            EmissionMatrix((np.log([0.5, 0.5]) + 1e-5)[None, :])

    def test_log_of_zero_prob_allowed(self):
        m = EmissionMatrix(np.array([[0.0, float("-inf")], [math.log(0.5), math.log(0.5)]]))
        assert m.num_frames == 2
