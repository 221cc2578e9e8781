"""Passage-group and hypothesis-pair suite construction."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lenbias as lb
from lenbias import SuiteError

from conftest import make_chunks, make_corpus

WS = lb.TokenCounter("whitespace")


class TestPassageGroups:
    def test_cumulative_concatenation(self):
        corpus = make_corpus(n_docs=1, n_segs=4, seed=3)
        suite = lb.build_passage_groups(corpus, WS, max_segments=5)
        group = suite.groups[0]
        segs = corpus.documents[0].segments
        assert len(group.passages) == 4
        assert group.passages[0].hypothesis_text == segs[0].target_text
        assert group.passages[1].hypothesis_text == (
            segs[0].target_text + " " + segs[1].target_text
        )
        assert group.passages[3].source_text == " ".join(
            s.source_text for s in segs
        )
        assert lb.check_prefix_property(group)

    def test_max_segments_caps_group_size(self):
        corpus = make_corpus(n_docs=2, n_segs=8, seed=4)
        suite = lb.build_passage_groups(corpus, WS, max_segments=3)
        assert all(len(g.passages) == 3 for g in suite.groups)

    def test_short_document_keeps_all_segments(self):
        corpus = make_corpus(n_docs=1, n_segs=2, seed=5)
        suite = lb.build_passage_groups(corpus, WS, max_segments=5)
        assert len(suite.groups[0].passages) == 2

    def test_token_counts_match_counter(self):
        corpus = make_corpus(n_docs=2, n_segs=3, seed=6)
        suite = lb.build_passage_groups(corpus, WS)
        for group in suite.groups:
            for p in group.passages:
                assert p.source_tokens == len(p.source_text.split())
                assert p.hypothesis_tokens == len(p.hypothesis_text.split())

    def test_window_discards_on_either_side(self):
        # source side long, target side short
        long_src = lb.Segment("d1", 0, " ".join(["w"] * 40), "short text", "en-de_DE")
        ok = lb.Segment("d2", 0, "short one", "short one", "en-de_DE")
        corpus = lb.Corpus("en-de_DE", (
            lb.Document("d1", (long_src,), "en-de_DE"),
            lb.Document("d2", (ok,), "en-de_DE"),
        ))
        suite = lb.build_passage_groups(corpus, WS, window_tokens=20)
        assert suite.discarded == 1
        assert [g.doc_id for g in suite.groups] == ["d2"]

        long_tgt = lb.Segment("d1", 0, "short text", " ".join(["w"] * 40), "en-de_DE")
        corpus2 = lb.Corpus("en-de_DE", (lb.Document("d1", (long_tgt,), "en-de_DE"),))
        suite2 = lb.build_passage_groups(corpus2, WS, window_tokens=20)
        assert suite2.discarded == 1 and not suite2.groups

    def test_window_tested_on_final_passage_only(self):
        segs = tuple(
            lb.Segment("d1", i, " ".join(["s"] * 6), " ".join(["t"] * 6), "en-de_DE")
            for i in range(3)
        )
        corpus = lb.Corpus("en-de_DE", (lb.Document("d1", segs, "en-de_DE"),))
        # final passage = 18 tokens; cap at 18 keeps it, 17 drops it
        assert lb.build_passage_groups(corpus, WS, window_tokens=18).groups
        assert lb.build_passage_groups(corpus, WS, window_tokens=17).discarded == 1

    def test_custom_separator(self):
        corpus = make_corpus(n_docs=1, n_segs=2, seed=7)
        suite = lb.build_passage_groups(corpus, WS, separator=" ")
        assert " " in suite.groups[0].passages[1].source_text

    def test_parameter_validation(self):
        corpus = make_corpus(n_docs=1, n_segs=2)
        with pytest.raises(SuiteError, match="max_segments"):
            lb.build_passage_groups(corpus, WS, max_segments=0)
        with pytest.raises(SuiteError, match="window_tokens"):
            lb.build_passage_groups(corpus, WS, window_tokens=0)

    def test_empty_corpus_rejected(self):
        corpus = make_corpus(n_docs=1, n_segs=1)
        empty = lb.Corpus("en-de_DE", ())
        with pytest.raises(SuiteError, match="empty corpus"):
            lb.build_passage_groups(empty, WS)
        del corpus

    def test_passage_index_starts_at_one(self):
        with pytest.raises(SuiteError, match=">= 1"):
            lb.Passage(0, "s", "h", 1, 1)

    def test_empty_group_rejected(self):
        with pytest.raises(SuiteError, match="empty passage group"):
            lb.PassageGroup("d1", "en-de_DE", ())


class TestHypothesisPairs:
    def test_min_max_selection(self):
        chunk = lb.Chunk("c1", "src", " ".join(["r"] * 10), ("a b c", "a b c d e", "a b"))
        pairs = lb.build_hypothesis_pairs([chunk], WS, min_tokens=1, max_tokens=100)
        assert pairs[0].shorter.text == "a b"
        assert pairs[0].longer.text == "a b c d e"
        assert pairs[0].rel_diff == (5 - 2) / 2

    def test_tie_goes_to_first_candidate(self):
        chunk = lb.Chunk("c1", "src", " ".join(["r"] * 10),
                         ("first short", "other short", "a much longer one here",
                          "an equally long one too"))
        pairs = lb.build_hypothesis_pairs([chunk], WS, min_tokens=1, max_tokens=100)
        assert pairs[0].shorter.text == "first short"
        assert pairs[0].longer.text == "a much longer one here"

    def test_reference_window_filter(self):
        short_ref = lb.Chunk("c1", "s", "too short", ("a b", "a b c"))
        long_ref = lb.Chunk("c2", "s", " ".join(["r"] * 600), ("a b", "a b c"))
        ok_ref = lb.Chunk("c3", "s", " ".join(["r"] * 300), ("a b", "a b c"))
        pairs = lb.build_hypothesis_pairs([short_ref, long_ref, ok_ref], WS)
        assert [p.chunk_id for p in pairs] == ["c3"]

    def test_needs_two_candidates(self):
        chunk = lb.Chunk("c1", "s", "r", ("only one",))
        with pytest.raises(SuiteError, match=">= 2 candidates"):
            lb.build_hypothesis_pairs([chunk], WS, min_tokens=0, max_tokens=10)

    def test_empty_candidate_rejected(self):
        chunk = lb.Chunk("c1", "s", "r", ("ok here", "  "))
        with pytest.raises(SuiteError, match="candidate 1 is empty"):
            lb.build_hypothesis_pairs([chunk], WS, min_tokens=0, max_tokens=10)

    def test_pair_invariant(self):
        short = lb.Candidate("a", 1)
        long = lb.Candidate("a b", 2)
        with pytest.raises(SuiteError, match="shorter is longer"):
            lb.HypothesisPair("c1", "s", "r", long, short, 0.5)

    def test_factory_output_consistent(self, chunk_factory):
        chunks = chunk_factory(n_chunks=6, seed=11)
        pairs = lb.build_hypothesis_pairs(chunks, WS)
        assert pairs
        for p in pairs:
            assert p.shorter.tokens <= p.longer.tokens
            assert p.rel_diff == (p.longer.tokens - p.shorter.tokens) / p.shorter.tokens


class TestBins:
    def _pairs(self, rel_diffs):
        out = []
        for i, rd in enumerate(rel_diffs):
            n_short = 100
            n_long = round(n_short * (1 + rd))
            out.append(lb.HypothesisPair(
                f"c{i}", "s", "r",
                lb.Candidate("x " * n_short, n_short),
                lb.Candidate("x " * n_long, n_long),
                rd,
            ))
        return out

    def test_bins_nest(self):
        pairs = self._pairs([0.03, 0.06, 0.11, 0.20])
        bins = lb.bin_pairs(pairs, thresholds=(0.025, 0.05, 0.10))
        assert [len(b.pairs) for b in bins] == [4, 3, 2]
        # nesting: every deeper bin is a subset of the shallower one
        for a, b in zip(bins, bins[1:]):
            assert set(p.chunk_id for p in b.pairs) <= set(p.chunk_id for p in a.pairs)

    def test_boundary_is_inclusive(self):
        pairs = self._pairs([0.05])
        bins = lb.bin_pairs(pairs, thresholds=(0.05,))
        assert len(bins[0].pairs) == 1

    def test_threshold_validation(self):
        with pytest.raises(SuiteError, match="no thresholds"):
            lb.bin_pairs([], thresholds=())
        with pytest.raises(SuiteError, match="> 0"):
            lb.bin_pairs([], thresholds=(0.0, 0.1))
        with pytest.raises(SuiteError, match="strictly increasing"):
            lb.bin_pairs([], thresholds=(0.1, 0.1))

    def test_bin_rejects_underqualified_pair(self):
        pair = self._pairs([0.03])[0]
        with pytest.raises(SuiteError, match="below"):
            lb.LengthBin(0.05, (pair,))


class TestSerde:
    def test_passage_group_round_trip(self):
        corpus = make_corpus(n_docs=2, n_segs=3, seed=8)
        suite = lb.build_passage_groups(corpus, WS)
        for group in suite.groups:
            assert lb.passage_group_from_dict(lb.passage_group_to_dict(group)) == group

    def test_hypothesis_pair_round_trip(self, chunk_factory):
        pairs = lb.build_hypothesis_pairs(chunk_factory(n_chunks=4, seed=12), WS)
        for pair in pairs:
            assert lb.hypothesis_pair_from_dict(lb.hypothesis_pair_to_dict(pair)) == pair

    def test_jsonl_files_round_trip(self, tmp_path, chunk_factory):
        pairs = lb.build_hypothesis_pairs(chunk_factory(n_chunks=4, seed=13), WS)
        path = tmp_path / "pairs.jsonl"
        lb.write_jsonl(path, (lb.hypothesis_pair_to_dict(p) for p in pairs))
        loaded = [lb.hypothesis_pair_from_dict(o) for o in lb.read_jsonl(path)]
        assert loaded == pairs

    def test_load_chunks(self, tmp_path):
        path = tmp_path / "chunks.jsonl"
        path.write_text(
            '{"chunk_id":"c1","source":"s","reference":"r","candidates":["a","b"]}\n',
            encoding="utf-8",
        )
        chunks = lb.load_chunks(path)
        assert chunks == [lb.Chunk("c1", "s", "r", ("a", "b"))]

    def test_load_chunks_missing_field(self, tmp_path):
        path = tmp_path / "chunks.jsonl"
        path.write_text('{"chunk_id":"c1"}\n', encoding="utf-8")
        with pytest.raises(SuiteError, match="chunk record 1"):
            lb.load_chunks(path)


class TestMeanTokenIncrement:
    def test_uniform_increment(self):
        segs = tuple(
            lb.Segment("d1", i, " ".join(["s"] * 4), " ".join(["t"] * 4), "en-de_DE")
            for i in range(4)
        )
        corpus = lb.Corpus("en-de_DE", (lb.Document("d1", segs, "en-de_DE"),))
        suite = lb.build_passage_groups(corpus, WS)
        assert lb.mean_token_increment(suite.groups) == 4.0
        assert lb.mean_token_increment(suite.groups, side="source") == 4.0

    def test_single_passage_groups_rejected(self):
        corpus = make_corpus(n_docs=1, n_segs=1)
        suite = lb.build_passage_groups(corpus, WS)
        with pytest.raises(SuiteError, match="no consecutive"):
            lb.mean_token_increment(suite.groups)


# property tests: prefix structure and bin nesting hold for arbitrary inputs

@st.composite
def doc_strategy(draw):
    n_segs = draw(st.integers(min_value=1, max_value=6))
    segs = []
    for i in range(n_segs):
        words = draw(st.lists(st.sampled_from(["aa", "bb", "cc", "dd"]),
                              min_size=1, max_size=5))
        text = " ".join(words)
        segs.append(lb.Segment("d1", i, text, text, "en-de_DE"))
    return lb.Document("d1", tuple(segs), "en-de_DE")


@given(doc_strategy(), st.integers(min_value=1, max_value=8))
@settings(max_examples=60, deadline=None)
def test_prefix_property_always_holds(doc, max_segments):
    corpus = lb.Corpus("en-de_DE", (doc,))
    suite = lb.build_passage_groups(corpus, WS, max_segments=max_segments,
                                    window_tokens=10_000)
    for group in suite.groups:
        assert lb.check_prefix_property(group)
        assert [p.index for p in group.passages] == list(range(1, len(group.passages) + 1))


@given(st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=0, max_size=20))
@settings(max_examples=60, deadline=None)
def test_bins_always_nest(rel_diffs):
    pairs = []
    for i, rd in enumerate(rel_diffs):
        n_short = 1000
        n_long = round(n_short * (1 + rd))
        rd_exact = (n_long - n_short) / n_short
        pairs.append(lb.HypothesisPair(
            f"c{i}", "s", "r",
            lb.Candidate("a", n_short), lb.Candidate("b", n_long), rd_exact,
        ))
    bins = lb.bin_pairs(pairs, thresholds=(0.025, 0.05, 0.075, 0.10))
    sizes = [len(b.pairs) for b in bins]
    assert sizes == sorted(sizes, reverse=True)
    for a, b in zip(bins, bins[1:]):
        ids_a = {p.chunk_id for p in a.pairs}
        assert all(p.chunk_id in ids_a for p in b.pairs)
