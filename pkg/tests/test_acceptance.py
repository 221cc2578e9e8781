"""Acceptance gate: one test per headline criterion.

Each test prints a PASS/FAIL verdict line naming its criterion (visible with
`pytest -s`; pytest shows the captured line for failing tests either way) and
enforces the stated tolerances and runtime budgets.
"""

from __future__ import annotations

import contextlib
import json
import math
import random
import time

import lenbias as lb
from conftest import make_chunks, make_corpus, make_sentence, write_corpus_tsv
from lenbias.cli import main
from lenbias.report import preference_to_dict, trend_to_dict

WHITESPACE = lb.TokenCounter(scheme="whitespace")


@contextlib.contextmanager
def verdict(name):
    try:
        yield
    except BaseException:
        print(f"FAIL {name}")
        raise
    print(f"PASS {name}")


def score_map(spec, requests):
    return {r.id: r.score for r in lb.score_batch(spec, requests)}


def passage_requests(groups):
    return [
        lb.ScoreRequest(f"{g.doc_id}#p{p.index}", p.source_text,
                        p.hypothesis_text, None, "qe")
        for g in groups for p in g.passages
    ]


def pair_requests(pairs):
    out = []
    for pair in pairs:
        out.append(lb.ScoreRequest(f"{pair.chunk_id}#short", pair.source_text,
                                   pair.shorter.text, None, "qe"))
        out.append(lb.ScoreRequest(f"{pair.chunk_id}#long", pair.source_text,
                                   pair.longer.text, None, "qe"))
    return out


def scores_by_doc(groups, scores):
    return {g.doc_id: [scores[f"{g.doc_id}#p{p.index}"] for p in g.passages]
            for g in groups}


def scores_by_chunk(pairs, scores):
    return {p.chunk_id: (scores[f"{p.chunk_id}#short"], scores[f"{p.chunk_id}#long"])
            for p in pairs}


def test_synthetic_bias_detection():
    with verdict("synthetic-bias detection"):
        t0 = time.perf_counter()
        corpus = make_corpus(n_docs=50, n_segs=5, seed=11, growing=True)
        groups = lb.build_passage_groups(corpus, WHITESPACE).groups
        assert len(groups) == 50
        spec = lb.ScorerSpec(kind="synthetic_biased",
                             params={"base": 0.0, "alpha": 0.01, "sigma": 0.0})
        by_doc = scores_by_doc(groups, score_map(spec, passage_requests(groups)))

        trend = lb.decreasing_trend_proportion(groups, by_doc)
        assert trend.proportion == 1.0
        assert trend.n_docs == 50 and trend.n_skipped == 0

        curve = lb.delta_curve(groups, by_doc)
        means = [curve[i].mean_delta for i in sorted(curve)]
        assert len(means) == 5
        assert all(b < a for a, b in zip(means, means[1:]))

        pairs = lb.build_hypothesis_pairs(make_chunks(n_chunks=30, seed=12),
                                          WHITESPACE)
        by_chunk = scores_by_chunk(pairs, score_map(spec, pair_requests(pairs)))
        for length_bin in lb.bin_pairs(pairs, lb.DEFAULT_THRESHOLDS):
            result = lb.shorter_preference_rate(length_bin, by_chunk)
            assert result.n_pairs > 0
            assert result.rate == 1.0
        assert time.perf_counter() - t0 < 5.0


def test_null_calibration():
    with verdict("null calibration"):
        t0 = time.perf_counter()
        pairs = lb.build_hypothesis_pairs(make_chunks(n_chunks=500, seed=21),
                                          WHITESPACE)
        assert len(pairs) == 500
        spec = lb.ScorerSpec(kind="synthetic_biased",
                             params={"alpha": 0.0, "sigma": 0.5, "seed": 99})
        requests = pair_requests(pairs)
        first = [r.score for r in lb.score_batch(spec, requests)]
        second = [r.score for r in lb.score_batch(spec, requests)]
        assert first == second  # fixed seed, fixed scores

        by_chunk = scores_by_chunk(pairs, score_map(spec, requests))
        result = lb.shorter_preference_rate(lb.LengthBin(0.0, tuple(pairs)), by_chunk)
        lo, hi = lb.wilson_ci(0.5 * 500, 500, 0.99)
        assert lo <= result.rate <= hi

        indicators = [1.0 if s > l else 0.5 if s == l else 0.0
                      for s, l in by_chunk.values()]
        estimate = lb.bias_estimate(indicators, 0.5)
        assert abs(estimate.bias) < 0.06
        assert time.perf_counter() - t0 < 5.0


def test_density_round_trip():
    with verdict("density round trip"):
        rng = random.Random(42)
        for _ in range(10_000):
            rating = rng.uniform(-25.0, 0.0)
            length = rng.randint(1, 2000)
            back = lb.from_density(lb.to_density(rating, length), length)
            assert abs(back - rating) <= 1e-12 * max(1.0, abs(rating))


def test_normalization_efficacy():
    with verdict("normalization efficacy"):
        corpus = make_corpus(n_docs=12, n_segs=5, seed=31)
        groups = lb.build_passage_groups(corpus, WHITESPACE).groups
        requests = passage_requests(groups)

        alpha = 0.02
        biased = lb.ScorerSpec(kind="synthetic_biased",
                               params={"alpha": alpha, "sigma": 0.0})
        raw_slope = lb.slope_of_score_changes(
            lb.delta_curve(groups, scores_by_doc(groups, score_map(biased, requests))))
        expected = alpha * lb.mean_token_increment(groups)
        assert abs(raw_slope - expected) <= 1e-9

        # a density model that is exact on error-free text: constant density 0
        flat_density = lb.ScorerSpec(
            kind="synthetic_biased",
            params={"alpha": 0.0, "sigma": 0.0, "emit_density": True},
            label="flat-density")
        wrapped = lb.wrap_density_scorer(flat_density, WHITESPACE)
        wrapped_slope = lb.slope_of_score_changes(
            lb.delta_curve(groups, scores_by_doc(groups, score_map(wrapped, requests))))
        assert abs(wrapped_slope) <= 1e-9


def oracle_delta_curve(groups, by_doc):
    deltas: dict[int, list[float]] = {}
    for group in groups:
        scores = by_doc[group.doc_id]
        for passage, score in zip(group.passages, scores):
            deltas.setdefault(passage.index, []).append(score - scores[0])
    out = {}
    for index, values in deltas.items():
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        out[index] = (mean, math.sqrt(var), len(values))
    return out


def oracle_trend(groups, by_doc, first, last):
    n_docs = n_decreasing = n_skipped = 0
    for group in groups:
        positions = {p.index: k for k, p in enumerate(group.passages)}
        if first not in positions or last not in positions:
            n_skipped += 1
            continue
        n_docs += 1
        scores = by_doc[group.doc_id]
        if scores[positions[last]] < scores[positions[first]]:
            n_decreasing += 1
    proportion = n_decreasing / n_docs if n_docs else 0.0
    return n_docs, n_decreasing, n_skipped, proportion


def oracle_rate(bin_pairs_seq, by_chunk):
    wins = 0.0
    for pair in bin_pairs_seq:
        short_score, long_score = by_chunk[pair.chunk_id]
        wins += 1.0 if short_score > long_score else 0.5 if short_score == long_score else 0.0
    return wins, wins / len(bin_pairs_seq)


def oracle_wilson(successes, n, level):
    import statistics

    z = statistics.NormalDist().inv_cdf(0.5 + level / 2.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def test_oracle_equivalence():
    with verdict("oracle equivalence"):
        rng = random.Random(5150)
        for trial in range(100):
            corpus = make_corpus(n_docs=rng.randint(2, 6),
                                 n_segs=rng.randint(2, 5), seed=trial)
            groups = lb.build_passage_groups(corpus, WHITESPACE).groups
            # ragged passage counts: some groups keep only a prefix
            groups = [
                lb.PassageGroup(g.doc_id, g.lang_pair,
                                g.passages[:rng.randint(1, len(g.passages))])
                for g in groups
            ]
            by_doc = {g.doc_id: [rng.uniform(-25.0, 0.0) for _ in g.passages]
                      for g in groups}

            got_curve = lb.delta_curve(groups, by_doc)
            want_curve = oracle_delta_curve(groups, by_doc)
            assert set(got_curve) == set(want_curve)
            for index, (mean, stddev, n) in want_curve.items():
                point = got_curve[index]
                assert abs(point.mean_delta - mean) <= 1e-9
                assert abs(point.stddev - stddev) <= 1e-9
                assert point.n == n

            last = max(len(g.passages) for g in groups)
            if last >= 2:
                got = lb.decreasing_trend_proportion(groups, by_doc, first=1, last=last)
                n_docs, n_dec, n_skip, prop = oracle_trend(groups, by_doc, 1, last)
                assert (got.n_docs, got.n_decreasing, got.n_skipped) == (
                    n_docs, n_dec, n_skip)
                assert abs(got.proportion - prop) <= 1e-9

            chunks = make_chunks(n_chunks=rng.randint(2, 5), seed=1000 + trial,
                                 ref_tokens=220, spread=rng.randint(5, 60))
            pairs = lb.build_hypothesis_pairs(chunks, WHITESPACE)
            by_chunk = {p.chunk_id: (rng.uniform(-25.0, 0.0), rng.uniform(-25.0, 0.0))
                        for p in pairs}
            if trial % 7 == 0 and pairs:
                by_chunk[pairs[0].chunk_id] = (-3.0, -3.0)  # force a tie
            for length_bin in lb.bin_pairs(pairs, lb.DEFAULT_THRESHOLDS):
                got_pref = lb.shorter_preference_rate(length_bin, by_chunk)
                assert got_pref.n_pairs == len(length_bin.pairs)
                if not length_bin.pairs:
                    assert got_pref.rate is None
                    continue
                wins, rate = oracle_rate(length_bin.pairs, by_chunk)
                lo, hi = oracle_wilson(wins, len(length_bin.pairs), 0.95)
                assert abs(got_pref.rate - rate) <= 1e-9
                assert abs(got_pref.ci_low - lo) <= 1e-9
                assert abs(got_pref.ci_high - hi) <= 1e-9

            n = rng.randint(1, 400)
            successes = round(rng.uniform(0, n) * 2) / 2.0
            got_ci = lb.wilson_ci(successes, n, 0.95)
            want_ci = oracle_wilson(successes, n, 0.95)
            assert abs(got_ci[0] - want_ci[0]) <= 1e-9
            assert abs(got_ci[1] - want_ci[1]) <= 1e-9


def test_mqm_weighting():
    with verdict("MQM weighting"):
        rng = random.Random(77)
        assert lb.mqm_score([]) == 0.0
        for _ in range(300):
            n_minor = rng.randint(0, 6)
            n_major = rng.randint(0, 6)
            annotations = []
            for _ in range(n_minor):
                start = rng.randint(0, 40)
                annotations.append(lb.MqmAnnotation(
                    start, start + rng.randint(0, 5), "minor",
                    rng.choice(("accuracy", "fluency")), "planted"))
            for _ in range(n_major):
                start = rng.randint(0, 40)
                annotations.append(lb.MqmAnnotation(
                    start, start + rng.randint(0, 5), "major",
                    rng.choice(("accuracy", "fluency")), "planted"))
            rng.shuffle(annotations)
            assert lb.mqm_score(annotations) == -n_minor - 5 * n_major


def test_golden_table_formats(tmp_path):
    with verdict("golden table formats"):
        groups = []
        by_doc = {}
        for d in range(472):
            doc_id = f"g{d:03d}"
            passages = tuple(
                lb.Passage(i, f"s {i}", f"h {i}", 2 * i, 2 * i) for i in range(1, 6))
            groups.append(lb.PassageGroup(doc_id, "en-de_DE", passages))
            by_doc[doc_id] = ([0.0, -0.1, -0.2, -0.3, -0.4] if d < 378
                              else [0.0, 0.0, 0.0, 0.0, 0.1])
        trend = lb.decreasing_trend_proportion(groups, by_doc)
        assert (trend.n_docs, trend.n_decreasing) == (472, 378)

        pairs = tuple(
            lb.HypothesisPair(f"c{k:03d}", "src", "ref",
                              lb.Candidate("a b", 2), lb.Candidate("a b c", 3), 0.5)
            for k in range(101))
        by_chunk = {pair.chunk_id: ((-1.0, -2.0) if k < 56 else (-2.0, -1.0))
                    for k, pair in enumerate(pairs)}
        pref = lb.shorter_preference_rate(lb.LengthBin(0.05, pairs), by_chunk)
        assert pref.n_pairs == 101 and pref.shorter_wins == 56.0

        report = lb.BiasReport(metadata={}, scorers={"toy QE": {
            "orientation": "higher_better",
            "delta_curves": {}, "slopes": {},
            "trends": {"en-de_DE": trend_to_dict(trend)},
            "preferences": {"en-de_DE": [preference_to_dict(pref)]},
            "histogram": None, "bias": {},
        }})
        lb.write_report(report, str(tmp_path))

        trend_rows = (tmp_path / "trend_toy-qe.csv").read_text(
            encoding="utf-8").splitlines()
        row = next(r for r in trend_rows if r.startswith("en-de_DE,"))
        assert row.split(",") == ["en-de_DE", "472", "80.1"]

        pref_rows = (tmp_path / "preference_toy-qe_en-xx.csv").read_text(
            encoding="utf-8").splitlines()
        row = next(r for r in pref_rows if r.startswith("en-de_DE,"))
        assert row.split(",")[1] == "55.4 (101)"


def test_protocol_robustness(tmp_path, echo_adapter, capsys):
    with verdict("protocol robustness"):
        t0 = time.perf_counter()
        token_pool = ("这是一个短句", "هذه-جملة", "यह-वाक्य", "🌍", "👩‍🔬", "ässä", "plain")
        rng = random.Random(8)
        docs = []
        for d in range(200):
            doc_id = f"文档-{d:03d}-🌍"
            segs = tuple(
                lb.Segment(doc_id, i,
                           " ".join(rng.choice(token_pool) for _ in range(rng.randint(3, 8))),
                           " ".join(rng.choice(token_pool) for _ in range(rng.randint(3, 8))),
                           "zh-de_DE")
                for i in range(5))
            docs.append(lb.Document(doc_id, segs, "zh-de_DE"))
        tsv = tmp_path / "corpus.tsv"
        write_corpus_tsv(lb.Corpus("zh-de_DE", tuple(docs)), tsv)
        passages = tmp_path / "passages.jsonl"
        assert main(["build-suite", "--corpus", str(tsv), "--format", "tsv",
                     "--passages-out", str(passages)]) == 0
        scores = tmp_path / "scores.jsonl"
        rc = main(["score", "--suite", str(passages),
                   "--scorer", "external_subprocess",
                   "--params", json.dumps({"command": echo_adapter("--shuffle")}),
                   "--out", str(scores)])
        assert rc == 0

        records = lb.read_jsonl(scores)
        assert len(records) == 1000
        groups = [lb.passage_group_from_dict(o) for o in lb.read_jsonl(passages)]
        expected_order = [f"{g.doc_id}#p{p.index}" for g in groups for p in g.passages]
        assert [r["id"] for r in records] == expected_order
        expected = {f"{g.doc_id}#p{p.index}": -len(p.hypothesis_text) / 1000.0
                    for g in groups for p in g.passages}
        assert {r["id"]: r["score"] for r in records} == expected
        assert time.perf_counter() - t0 < 10.0

        capsys.readouterr()
        rc = main(["score", "--suite", str(passages),
                   "--scorer", "external_subprocess",
                   "--params", json.dumps({"command": echo_adapter("--crash-after", "1")}),
                   "--out", str(tmp_path / "crash.jsonl")])
        assert rc == 2
        err_lines = capsys.readouterr().err.strip().splitlines()
        assert len(err_lines) == 1 and err_lines[0].startswith("error:")


def test_perturbation_locality():
    with verdict("perturbation locality"):
        rng = random.Random(9)
        docs = []
        for d in range(20):
            doc_id = f"loc{d:02d}"
            first = f"There is {40 + d} stones near Berlin."
            rest = [make_sentence(rng, rng.randint(4, 9)) for _ in range(4)]
            segs = tuple(
                lb.Segment(doc_id, i, f"source {d} line {i}.", text, "en-de_DE")
                for i, text in enumerate([first, *rest]))
            docs.append(lb.Document(doc_id, segs, "en-de_DE"))
        corpus = lb.Corpus("en-de_DE", tuple(docs))
        groups = lb.build_passage_groups(corpus, WHITESPACE).groups
        assert len(groups) == 20

        combos = (("minor", "accuracy"), ("major", "accuracy"),
                  ("minor", "fluency"), ("major", "fluency"))
        for severity, dimension in combos:
            for group in groups:
                pg = lb.perturb_with_fallback(group, severity, dimension, seed=3)
                assert pg is not None, (severity, dimension, group.doc_id)
                assert pg.gold_rating == (-1.0 if severity == "minor" else -5.0)
                base_first = group.passages[0].hypothesis_text
                new_first = pg.hypotheses[0]
                assert new_first != base_first
                for passage, hypothesis in zip(group.passages, pg.hypotheses):
                    suffix = passage.hypothesis_text[len(base_first):]
                    assert hypothesis == new_first + suffix
