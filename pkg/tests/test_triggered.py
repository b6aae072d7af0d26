import numpy as np
import pytest

from spikestream import (
    RecordingScorer,
    ScorerError,
    ScorerTable,
    TableAttentionScorer,
    TriggeredSearch,
    UniformAttentionScorer,
    ctc_logprob,
    ctc_prefix_beam,
    extract_triggers,
    decode_defaults,
    triggered_decode,
)
from spikestream.ctc import min_frames
from spikestream.scorers import TableEntry, eos_slot, token_slot

from helpers import enumerate_path_masses, one_hot_emissions, random_emissions


def random_table(rng, num_tokens, max_len, with_gating=False):
    """Normalized random next-token rows for every prefix up to max_len."""
    table = ScorerTable(num_tokens)

    def add(prefix):
        row = rng.normal(size=num_tokens + 1)
        row = row - np.logaddexp.reduce(row)
        visible = int(rng.integers(1, 5)) if with_gating and rng.random() < 0.5 else None
        table.att[prefix] = TableEntry(row, visible)
        if len(prefix) < max_len:
            for c in range(1, num_tokens + 1):
                add(prefix + (c,))

    add(())
    return table


class TestTriggers:
    def test_first_occurrence(self):
        assert extract_triggers((0, 1, 1, 0, 2)) == (1, 4)

    def test_all_blank(self):
        assert extract_triggers((0, 0, 0)) == ()

    def test_repeated_label_two_runs(self):
        assert extract_triggers((1, 0, 1)) == (0, 2)


class TestDefaults:
    def test_stock_operating_point(self):
        defaults = decode_defaults()
        assert defaults.ctc_attention_weight == 0.5
        assert defaults.beam_size == 10


def oracle_joint_argmax(E, scorer, lam, delta):
    """Exhaustive scoring of every feasible transcript with birth-time limits.

    With an unpruned beam over an all-finite lattice, the prefix y[:l] enters
    the beam at the earliest frame a path collapsing to it can finish, so the
    scorer sees min(min_frames(y[:l]) + delta, T) frames for token l.
    """
    T = E.num_frames
    best = None
    for y in sorted(enumerate_path_masses(E)):
        ctc = ctc_logprob(E, y)
        att = 0.0
        for l in range(len(y)):
            limit = min(min_frames(y[: l + 1]) + delta, T)
            att += float(scorer.score_next(y[:l], limit)[token_slot(y[l])])
        att += float(scorer.score_next(y, T)[eos_slot(scorer.num_tokens)])
        combined = lam * att + (1.0 - lam) * ctc
        key = (-combined, y)
        if best is None or key < best[0]:
            best = (key, y, combined)
    return best[1], best[2]


class TestTriggeredDecode:
    def test_lambda_zero_equals_prefix_beam(self):
        rng = np.random.default_rng(51)
        for _ in range(30):
            E = random_emissions(rng, int(rng.integers(1, 7)), 3)
            beam = int(rng.integers(1, 6))
            want = ctc_prefix_beam(E, beam)
            got = triggered_decode(E, UniformAttentionScorer(2), delta=0, lam=0.0, beam=beam)
            assert got[0].prefix == want[0][0]
            assert got[0].combined == want[0][1]

    @pytest.mark.parametrize("lam", [0.3, 0.5, 0.7, 1.0])
    def test_exhaustive_beam_matches_enumeration_oracle(self, lam):
        rng = np.random.default_rng(53)
        for _ in range(15):
            T = int(rng.integers(1, 5))
            E = random_emissions(rng, T, 3)
            delta = int(rng.integers(0, 3))
            scorer = TableAttentionScorer(random_table(rng, 2, T, with_gating=True))
            want_prefix, want_score = oracle_joint_argmax(E, scorer, lam, delta)
            got = triggered_decode(E, scorer, delta=delta, lam=lam, beam=100000)[0]
            assert got.prefix == want_prefix
            assert got.combined == pytest.approx(want_score, abs=1e-9)

    def test_one_hot_uniform_scorer(self):
        E = one_hot_emissions([1, 0], 3)
        for lam in (0.0, 0.25, 0.5, 0.99):
            got = triggered_decode(E, UniformAttentionScorer(2), delta=0, lam=lam, beam=10)
            assert got[0].prefix == (1,)
        # at lam=1 the empty prefix has zero CTC mass and is gated out, so the
        # only surviving hypothesis still wins
        got = triggered_decode(E, UniformAttentionScorer(2), delta=0, lam=1.0, beam=10)
        assert got[0].prefix == (1,)

    def test_pure_attention_prefers_short_among_survivors(self):
        # soft lattice keeps the empty prefix alive; uniform attention then
        # ranks the shorter hypothesis first at lam=1
        E = one_hot_emissions([1, 0], 3)
        soft = np.exp(E.log_probs) * 0.7 + 0.1
        from spikestream import EmissionMatrix

        E = EmissionMatrix(np.log(soft / soft.sum(axis=1, keepdims=True)))
        got = triggered_decode(E, UniformAttentionScorer(2), delta=0, lam=1.0, beam=10)
        assert got[0].prefix == ()

    def test_combined_invariant(self):
        rng = np.random.default_rng(59)
        for _ in range(10):
            E = random_emissions(rng, 5, 3)
            lam = float(rng.random())
            for hyp in triggered_decode(E, UniformAttentionScorer(2), delta=1, lam=lam, beam=4):
                expect = lam * hyp.log_p_att + (1.0 - lam) * hyp.log_p_ctc
                assert hyp.combined == pytest.approx(expect, abs=1e-12)

    def test_triggers_strictly_increasing(self):
        rng = np.random.default_rng(61)
        for _ in range(30):
            E = random_emissions(rng, int(rng.integers(1, 8)), 3)
            for hyp in triggered_decode(E, UniformAttentionScorer(2), delta=1, lam=0.5, beam=5):
                assert len(hyp.triggers) == len(hyp.prefix)
                assert all(a < b for a, b in zip(hyp.triggers, hyp.triggers[1:]))
                if hyp.triggers:
                    assert 0 <= hyp.triggers[0] and hyp.triggers[-1] < E.num_frames

    def test_scorer_never_reads_past_delta(self):
        rng = np.random.default_rng(67)
        for _ in range(20):
            T = int(rng.integers(1, 7))
            E = random_emissions(rng, T, 3)
            delta = int(rng.integers(0, 4))
            cell = {}
            recorder = RecordingScorer(
                UniformAttentionScorer(2), step_source=lambda: cell["search"].frame_index
            )
            search = TriggeredSearch(3, recorder, lam=0.5, beam=4, delta=delta, total_frames=T)
            cell["search"] = search
            for t in range(T):
                search.step(E.log_probs[t])
            search.finalize()
            assert recorder.calls
            for _, frame_limit, step in recorder.calls:
                assert frame_limit <= min(step + 1 + delta, T)
                assert frame_limit <= T

    def test_beam_monotone_top1_with_plain_table(self):
        rng = np.random.default_rng(71)
        for _ in range(15):
            E = random_emissions(rng, int(rng.integers(2, 6)), 3)
            scorer = TableAttentionScorer(random_table(rng, 2, E.num_frames))
            scores = [
                triggered_decode(E, scorer, delta=1, lam=0.5, beam=b)[0].combined
                for b in (1, 2, 4, 16, 256)
            ]
            for a, b in zip(scores, scores[1:]):
                assert b >= a - 1e-12

    def test_scorer_failure_carries_prefix(self):
        class Broken:
            num_tokens = 2

            def score_next(self, prefix, frame_limit):
                if prefix == (1,):
                    raise RuntimeError("boom")
                return UniformAttentionScorer(2).score_next(prefix, frame_limit)

        E = one_hot_emissions([1, 2], 3)
        with pytest.raises(ScorerError) as info:
            triggered_decode(E, Broken(), delta=0, lam=0.5, beam=10)
        assert info.value.prefix == (1,)

    def test_rejects_bad_config(self):
        E = one_hot_emissions([1], 3)
        scorer = UniformAttentionScorer(2)
        with pytest.raises(ValueError):
            triggered_decode(E, scorer, delta=0, lam=1.5, beam=10)
        with pytest.raises(ValueError):
            triggered_decode(E, scorer, delta=0, lam=0.5, beam=0)
        with pytest.raises(ValueError):
            triggered_decode(E, UniformAttentionScorer(5), delta=0, lam=0.5, beam=1)

    def test_attention_scored_once_per_trigger(self):
        # re-entries of a live prefix must not re-score: count calls per prefix
        rng = np.random.default_rng(73)
        E = random_emissions(rng, 6, 3)
        recorder = RecordingScorer(UniformAttentionScorer(2))
        triggered_decode(E, recorder, delta=0, lam=0.5, beam=100000)
        seen = {}
        for prefix, limit, _ in recorder.calls:
            seen.setdefault((prefix, limit), 0)
            seen[(prefix, limit)] += 1
        # each (parent prefix, frame limit) pair is asked exactly once, because
        # a prefix extension is born exactly once while it stays in the beam
        for count in seen.values():
            assert count <= 2  # next-token call plus possibly the eos call at T

    def test_min_frames(self):
        assert min_frames(()) == 0
        assert min_frames((1, 2)) == 2
        assert min_frames((1, 1)) == 3
