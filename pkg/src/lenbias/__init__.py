"""Corpus-driven length-bias audits for machine-translation quality scorers.

The pipeline: ingest parallel corpora (corpus), build cumulative-passage and
hypothesis-pair probe suites (suites), optionally insert controlled MQM
errors (perturb), score everything through a uniform scorer gateway
(gateway), estimate bias statistics (stats, normalize), and render tables
and charts (report). audit drives the whole run from one JSON config, and
conformance checks external adapters against the wire protocol.
"""

from .corpus import (Corpus, Document, Segment, TokenCounter, count_tokens,
                     count_tokens_many, load_corpus, save_corpus)
from .errors import (ConfigError, CorpusError, CounterError, LenBiasError,
                     PerturbationRejected, ProtocolError, RuleInapplicableError,
                     ScorerError, SuiteError)
from .suites import (DEFAULT_THRESHOLDS, Candidate, Chunk, HypothesisPair,
                     LengthBin, Passage, PassageGroup, PassageSuite, bin_pairs,
                     build_hypothesis_pairs, build_passage_groups,
                     check_prefix_property, hypothesis_pair_from_dict,
                     hypothesis_pair_to_dict, load_chunks, mean_token_increment,
                     passage_group_from_dict, passage_group_to_dict, read_jsonl,
                     write_jsonl)
from .perturb import (CATEGORY_RULES, DIMENSIONS, MAJOR_PENALTY, MINOR_PENALTY,
                      RULE_CATEGORY, SEVERITIES, MqmAnnotation,
                      PerturbationSpec, PerturbedGroup, apply_perturbation,
                      external_perturb, mqm_score, perturb_with_fallback,
                      perturbed_group_from_dict, perturbed_group_to_dict)
from .gateway import (KINDS, MODES, ORIENTATIONS, ScoreRequest, ScoreResponse,
                      ScorerSpec, lexical_overlap_score, orient, orient_scores,
                      score_batch, synthetic_biased_score)
from .normalize import (DensityRecord, from_density, group_normalize, to_density,
                        wrap_density_scorer)
from .stats import (BiasEstimate, DeltaCurve, DeltaPoint, Histogram,
                    PreferenceResult, TrendResult, bias_estimate,
                    decreasing_trend_proportion, delta_curve, score_histogram,
                    shorter_preference_rate, slope_of_score_changes, wilson_ci)
from .report import (BiasReport, emit_charts, emit_tables, fmt_pct, fmt_score,
                     round_half_even, svg_bar_chart, svg_line_chart, write_report)
from .audit import AuditConfig, load_config, parse_config, run_audit
from .conformance import CheckResult, all_passed, get_vectors, run_conformance
from .rng import SplitMix64, fnv1a64, key_seed

__version__ = "0.1.0"

__all__ = [
    "AuditConfig", "BiasEstimate", "BiasReport", "Candidate", "CheckResult",
    "Chunk", "ConfigError", "Corpus", "CorpusError", "CounterError",
    "DEFAULT_THRESHOLDS", "DIMENSIONS", "DeltaCurve", "DeltaPoint",
    "DensityRecord", "Document", "Histogram", "HypothesisPair", "KINDS",
    "LenBiasError", "LengthBin", "MAJOR_PENALTY", "MINOR_PENALTY", "MODES",
    "MqmAnnotation", "ORIENTATIONS", "Passage", "SEVERITIES",
    "PassageGroup", "PassageSuite", "PerturbationRejected", "PerturbationSpec",
    "PerturbedGroup", "PreferenceResult", "ProtocolError", "RULE_CATEGORY",
    "CATEGORY_RULES", "RuleInapplicableError", "ScoreRequest", "ScoreResponse",
    "ScorerError", "ScorerSpec", "Segment", "SplitMix64", "SuiteError",
    "TokenCounter", "TrendResult", "all_passed", "apply_perturbation",
    "bias_estimate", "bin_pairs", "build_hypothesis_pairs",
    "build_passage_groups", "check_prefix_property", "count_tokens",
    "count_tokens_many", "decreasing_trend_proportion", "delta_curve",
    "emit_charts", "emit_tables", "external_perturb", "fmt_pct", "fmt_score",
    "fnv1a64", "from_density", "get_vectors", "group_normalize", "key_seed",
    "lexical_overlap_score", "load_chunks", "load_config", "load_corpus",
    "hypothesis_pair_from_dict", "hypothesis_pair_to_dict",
    "mean_token_increment", "mqm_score", "orient", "orient_scores",
    "parse_config", "passage_group_from_dict", "passage_group_to_dict",
    "perturb_with_fallback", "perturbed_group_from_dict",
    "perturbed_group_to_dict", "read_jsonl", "round_half_even", "run_audit",
    "run_conformance", "save_corpus", "score_batch", "score_histogram",
    "shorter_preference_rate", "slope_of_score_changes", "svg_bar_chart",
    "svg_line_chart", "synthetic_biased_score", "to_density", "wilson_ci",
    "wrap_density_scorer", "write_jsonl", "write_report",
]
