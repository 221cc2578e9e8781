"""Config parsing and the end-to-end audit pipeline."""

import json

import pytest

import lenbias as lb
from lenbias import ConfigError, CorpusError, ScorerError
from lenbias.audit import parse_config

from conftest import make_chunks, make_corpus, write_chunks_jsonl, write_corpus_tsv


def base_raw(tmp_path, **overrides):
    corpus = make_corpus(n_docs=6, n_segs=5, seed=1)
    write_corpus_tsv(corpus, tmp_path / "corpus.tsv")
    raw = {
        "corpora": [{"path": "corpus.tsv", "format": "tsv"}],
        "scorers": [{"label": "toy", "kind": "synthetic_biased",
                     "params": {"alpha": 0.01, "sigma": 0.0}}],
        "seed": 3,
    }
    raw.update(overrides)
    return raw


def parse(tmp_path, **overrides):
    return parse_config(base_raw(tmp_path, **overrides), base_dir=str(tmp_path))


def perturbable_corpus():
    """Every first segment carries a numeral so numeral_shift always applies."""
    targets = ["There are 42 stones here.", "They sit by the Rhine.",
               "Nobody moves them at night.", "The water is cold today.",
               "Stones stay forever after."]
    docs = []
    for d in range(4):
        segs = tuple(
            lb.Segment(f"p{d}", i, f"source {d} sentence {i} here.",
                       targets[i], "en-de_DE")
            for i in range(5)
        )
        docs.append(lb.Document(f"p{d}", segs, "en-de_DE"))
    return lb.Corpus("en-de_DE", tuple(docs))


class TestParseConfig:
    def test_minimal_valid(self, tmp_path):
        config = parse(tmp_path)
        assert config.seed == 3
        assert config.counter.scheme == "whitespace"
        assert config.scorers[0].label == "toy"
        assert config.thresholds == lb.DEFAULT_THRESHOLDS
        assert len(config.digest) == 64

    def test_digest_tracks_content(self, tmp_path):
        a = parse(tmp_path)
        b = parse(tmp_path)
        c = parse(tmp_path, seed=4)
        assert a.digest == b.digest
        assert a.digest != c.digest

    def test_relative_paths_resolved(self, tmp_path):
        config = parse(tmp_path)
        assert config.corpora[0].path.startswith(str(tmp_path))
        assert config.corpora[0].display == "corpus.tsv"

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            parse(tmp_path, bogus=1)

    def test_needs_corpora(self, tmp_path):
        with pytest.raises(ConfigError, match="at least one corpus"):
            parse(tmp_path, corpora=[])

    def test_needs_scorers(self, tmp_path):
        with pytest.raises(ConfigError, match="at least one scorer"):
            parse(tmp_path, scorers=[])

    def test_corpus_file_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            parse(tmp_path, corpora=[{"path": "nope.tsv"}])

    def test_unknown_corpus_format(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown format"):
            parse(tmp_path, corpora=[{"path": "corpus.tsv", "format": "xml"}])

    def test_unknown_scorer_kind(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown kind"):
            parse(tmp_path, scorers=[{"kind": "quantum"}])

    def test_unknown_mode_and_orientation(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown mode"):
            parse(tmp_path, scorers=[{"kind": "lexical_overlap", "mode": "zz"}])
        with pytest.raises(ConfigError, match="unknown orientation"):
            parse(tmp_path, scorers=[{"kind": "lexical_overlap",
                                      "orientation": "zz"}])

    def test_external_needs_command_or_url(self, tmp_path):
        with pytest.raises(ConfigError, match="params.command"):
            parse(tmp_path, scorers=[{"kind": "external_subprocess"}])
        with pytest.raises(ConfigError, match="params.url"):
            parse(tmp_path, scorers=[{"kind": "external_http"}])

    def test_duplicate_labels(self, tmp_path):
        scorers = [{"label": "x", "kind": "synthetic_biased"},
                   {"label": "x", "kind": "lexical_overlap"}]
        with pytest.raises(ConfigError, match="duplicate scorer label"):
            parse(tmp_path, scorers=scorers)

    def test_perturbation_validation(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown category"):
            parse(tmp_path, perturbations=[{"severity": "huge",
                                            "dimension": "accuracy"}])
        with pytest.raises(ConfigError, match="does not realize"):
            parse(tmp_path, perturbations=[{"severity": "minor",
                                            "dimension": "accuracy",
                                            "rule": "negation"}])
        with pytest.raises(ConfigError, match="duplicate perturbation category"):
            parse(tmp_path, perturbations=[
                {"severity": "minor", "dimension": "accuracy"},
                {"severity": "minor", "dimension": "accuracy",
                 "rule": "noun_typo"}])

    def test_threshold_validation(self, tmp_path):
        with pytest.raises(ConfigError, match="strictly increasing"):
            parse(tmp_path, suite={"thresholds": [0.05, 0.05]})
        with pytest.raises(ConfigError, match="positive"):
            parse(tmp_path, suite={"thresholds": [-0.1, 0.05]})

    def test_histogram_validation(self, tmp_path):
        with pytest.raises(ConfigError, match="bin_width"):
            parse(tmp_path, histogram={"range": [0, 1]})
        with pytest.raises(ConfigError, match="hi > lo"):
            parse(tmp_path, histogram={"bin_width": 0.1, "range": [1, 0]})

    def test_preference_level_validation(self, tmp_path):
        with pytest.raises(ConfigError, match="preference_level"):
            parse(tmp_path, preference_level=1.0)

    def test_counter_coercion(self, tmp_path):
        assert parse(tmp_path, counter="character").counter.scheme == "character"
        config = parse(tmp_path, counter={"scheme": "external",
                                          "external_command": ["wc", "-w"]})
        assert config.counter.external_command == ("wc", "-w")

    def test_perturbation_seed_defaults_to_config_seed(self, tmp_path):
        config = parse(tmp_path, perturbations=[
            {"severity": "minor", "dimension": "accuracy"}])
        assert config.perturbations[0].seed == 3


class TestLoadConfig:
    def test_explicit_path(self, tmp_path):
        raw = base_raw(tmp_path)
        path = tmp_path / "audit.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        config = lb.load_config(str(path))
        assert config.seed == 3

    def test_env_fallback(self, tmp_path, monkeypatch):
        raw = base_raw(tmp_path)
        path = tmp_path / "audit.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        monkeypatch.setenv("LENBIAS_CONFIG", str(path))
        assert lb.load_config().seed == 3

    def test_no_path_no_env(self, monkeypatch):
        monkeypatch.delenv("LENBIAS_CONFIG", raising=False)
        with pytest.raises(ConfigError, match="LENBIAS_CONFIG"):
            lb.load_config()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            lb.load_config(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            lb.load_config(str(path))

    def test_non_object(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1,2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            lb.load_config(str(path))


class TestRunAudit:
    def test_synthetic_end_to_end(self, tmp_path):
        config = parse(tmp_path, histogram={"bin_width": 0.05, "range": [-1.0, 0.0]})
        report = lb.run_audit(config)
        block = report.scorers["toy"]
        assert block["trends"]["aggregate"]["proportion"] == 1.0
        assert block["trends"]["en-de_DE"]["n_docs"] == 6
        assert block["slopes"]["en-de_DE"] > 0
        assert block["bias"]["clean"]["n"] == 30
        hist = block["histogram"]
        assert (sum(hist["counts"]) + hist["underflow"] + hist["overflow"]) == 30
        assert not report.failures

    def test_metadata_contents(self, tmp_path):
        config = parse(tmp_path)
        report = lb.run_audit(config)
        meta = report.metadata
        assert meta["config_digest"] == config.digest
        assert meta["seed"] == 3
        assert meta["counter"] == "whitespace"
        assert meta["groups"] == {"en-de_DE": {"n_groups": 6, "n_discarded": 0}}
        assert meta["corpora"][0]["path"] == "corpus.tsv"
        assert meta["scorers"][0]["label"] == "toy"

    def test_duplicate_doc_ids_across_corpora(self, tmp_path):
        corpus = make_corpus(n_docs=2, n_segs=2, seed=1)
        write_corpus_tsv(corpus, tmp_path / "a.tsv")
        write_corpus_tsv(corpus, tmp_path / "b.tsv")
        raw = base_raw(tmp_path, corpora=[{"path": "a.tsv"}, {"path": "b.tsv"}])
        config = parse_config(raw, base_dir=str(tmp_path))
        with pytest.raises(CorpusError, match="more than one corpus"):
            lb.run_audit(config)

    def test_failure_isolation(self, tmp_path):
        scorers = [
            {"label": "good", "kind": "synthetic_biased", "params": {"alpha": 0.01}},
            {"label": "broken", "kind": "external_subprocess",
             "params": {"command": ["/no/such/adapter"]}},
        ]
        config = parse(tmp_path, scorers=scorers)
        report = lb.run_audit(config)
        assert "good" in report.scorers
        assert "broken" in report.failures
        assert "cannot launch" in report.failures["broken"]

    def test_all_scorers_failing_aborts(self, tmp_path):
        scorers = [{"label": "broken", "kind": "external_subprocess",
                    "params": {"command": ["/no/such/adapter"]}}]
        config = parse(tmp_path, scorers=scorers)
        with pytest.raises(ScorerError, match="all scorers failed"):
            lb.run_audit(config)

    def test_perturbation_block(self, tmp_path):
        config = parse(tmp_path, perturbations=[
            {"severity": "minor", "dimension": "accuracy", "rule": "numeral_shift"},
            {"severity": "major", "dimension": "accuracy"},
        ])
        # swap in a corpus whose first segments all carry a numeral; the
        # config only records the path, so writing after parse is fine
        write_corpus_tsv(perturbable_corpus(), tmp_path / "corpus.tsv")
        report = lb.run_audit(config)
        pblock = report.scorers["toy"]["perturbations"]
        minor = pblock["minor-accuracy"]
        assert minor["n_groups"] == 4 and minor["n_skipped"] == 0
        assert minor["rule_counts"] == {"numeral_shift": 4}
        assert minor["gold_rating"] == -1.0
        assert minor["bias"]["true_quality"] == -1.0
        assert minor["bias"]["n"] == 20
        major = pblock["major-accuracy"]
        assert major["gold_rating"] == -5.0

    def test_preferences_block(self, tmp_path):
        write_chunks_jsonl(make_chunks(n_chunks=8, seed=2),
                           tmp_path / "chunks.jsonl")
        config = parse(tmp_path, chunks=[{"path": "chunks.jsonl",
                                          "lang_pair": "en-de_DE"}])
        report = lb.run_audit(config)
        block = report.scorers["toy"]
        prefs = block["preferences"]
        assert "en-de_DE" in prefs and "aggregate:en-xx" in prefs
        assert len(prefs["en-de_DE"]) == len(lb.DEFAULT_THRESHOLDS)
        # alpha > 0 penalizes length: the shorter side always wins
        filled = [c for c in prefs["en-de_DE"] if c["n_pairs"] > 0]
        assert filled and all(c["rate"] == 1.0 for c in filled)
        assert block["bias"]["preference"]["true_quality"] == 0.5
        assert report.metadata["pairs"] == {"en-de_DE": 8}

    def test_duplicate_chunk_ids_across_files(self, tmp_path):
        chunks = make_chunks(n_chunks=2, seed=2)
        write_chunks_jsonl(chunks, tmp_path / "c1.jsonl")
        write_chunks_jsonl(chunks, tmp_path / "c2.jsonl")
        config = parse(tmp_path, chunks=[
            {"path": "c1.jsonl", "lang_pair": "en-de_DE"},
            {"path": "c2.jsonl", "lang_pair": "en-fr_FR"}])
        with pytest.raises(CorpusError, match="more than one chunk file"):
            lb.run_audit(config)

    def test_json_byte_determinism(self, tmp_path):
        write_chunks_jsonl(make_chunks(n_chunks=5, seed=4),
                           tmp_path / "chunks.jsonl")
        config = parse(
            tmp_path,
            chunks=[{"path": "chunks.jsonl", "lang_pair": "en-de_DE"}],
            perturbations=[{"severity": "minor", "dimension": "fluency"}],
            histogram={"bin_width": 0.1, "range": [-1.0, 0.5]},
        )
        assert lb.run_audit(config).to_json() == lb.run_audit(config).to_json()

    def test_lower_worse_orientation_flips_scores(self, tmp_path):
        # same magnitude scorer reported on a penalty scale: declared
        # lower_worse must make the trends come out identical
        scorers = [
            {"label": "hb", "kind": "synthetic_biased",
             "params": {"alpha": 0.01, "sigma": 0.0}},
            {"label": "lw", "kind": "synthetic_biased",
             "params": {"alpha": -0.01, "sigma": 0.0}, "orientation": "lower_worse"},
        ]
        config = parse(tmp_path, scorers=scorers)
        report = lb.run_audit(config)
        assert (report.scorers["hb"]["trends"]["aggregate"]
                == report.scorers["lw"]["trends"]["aggregate"])

    def test_external_adapter_through_audit(self, tmp_path, echo_adapter):
        scorers = [{"label": "echo", "kind": "external_subprocess",
                    "params": {"command": list(echo_adapter())},
                    "orientation": "lower_worse"}]
        config = parse(tmp_path, scorers=scorers)
        report = lb.run_audit(config)
        # echo score = -len(hyp)/1000 (higher_better form); declared
        # lower_worse flips it, so longer passages score higher and no
        # decreasing trend appears
        assert report.scorers["echo"]["trends"]["aggregate"]["proportion"] == 0.0
