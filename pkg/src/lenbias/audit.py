"""End-to-end audit orchestration.

run_audit() drives the whole pipeline from one JSON config: ingest corpora,
build passage groups and hypothesis pairs, score every probe with every
configured scorer, and assemble a BiasReport. A scorer that fails mid-run is
recorded under failures and the audit continues with the rest; only losing
every scorer aborts the run.

Config resolution: an explicit path wins, otherwise the LENBIAS_CONFIG
environment variable names the file. Relative paths inside the config are
resolved against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata
from typing import Mapping, Sequence

from .corpus import Corpus, TokenCounter, load_corpus
from .errors import (ConfigError, CorpusError, CounterError, ProtocolError,
                     RuleInapplicableError, ScorerError)
from .gateway import (KINDS, MODES, ORIENTATIONS, ScoreRequest, ScorerSpec, orient,
                      score_batch)
from .normalize import wrap_density_scorer
from .perturb import (CATEGORY_RULES, RULE_CATEGORY, PerturbationSpec,
                      apply_perturbation, perturb_with_fallback)
from .report import (ROUNDING_NOTE, BiasReport, bias_to_dict, delta_curve_to_dict,
                     histogram_to_dict, preference_to_dict, trend_to_dict)
from .stats import (bias_estimate, decreasing_trend_proportion, delta_curve,
                    score_histogram, shorter_preference_rate,
                    slope_of_score_changes)
from .suites import (DEFAULT_THRESHOLDS, HypothesisPair, PassageGroup, bin_pairs,
                     build_hypothesis_pairs, build_passage_groups, load_chunks)

ENV_CONFIG = "LENBIAS_CONFIG"

CLEAN_TRUE_QUALITY = 0.0  # error-free targets carry zero MQM penalty
PREFERENCE_TRUE_QUALITY = 0.5  # unbiased scorer prefers the shorter side half the time


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    format: str = "tsv"
    display: str = ""


@dataclass(frozen=True)
class ChunkEntry:
    path: str
    lang_pair: str
    display: str = ""


@dataclass(frozen=True)
class ScorerEntry:
    label: str
    spec: ScorerSpec
    mode: str = "qe"
    wrap_density: bool = False


@dataclass(frozen=True)
class PerturbEntry:
    severity: str
    dimension: str
    rule: str | None = None  # None picks per-group from the category's rules
    seed: int = 0

    @property
    def category(self) -> str:
        return f"{self.severity}-{self.dimension}"


@dataclass(frozen=True)
class AuditConfig:
    corpora: tuple[CorpusEntry, ...]
    scorers: tuple[ScorerEntry, ...]
    counter: TokenCounter = field(default_factory=lambda: TokenCounter(scheme="whitespace"))
    max_segments: int = 5
    window_tokens: int = 500
    separator: str = " "
    min_chunk_tokens: int = 200
    max_chunk_tokens: int = 500
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    chunks: tuple[ChunkEntry, ...] = ()
    perturbations: tuple[PerturbEntry, ...] = ()
    histogram: tuple[float, float, float] | None = None  # (bin_width, lo, hi)
    out_dir: str = "out"
    seed: int = 0
    preference_level: float = 0.95
    timeout_secs: float = 120.0
    digest: str = ""


def _fail(message: str) -> ConfigError:
    return ConfigError(message)


def _expect_keys(obj: Mapping, allowed: set[str], where: str):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _fail(f"{where}: unknown key(s) {', '.join(map(repr, unknown))}")


def _coerce_counter(value) -> TokenCounter:
    if value is None:
        return TokenCounter(scheme="whitespace")
    if isinstance(value, str):
        return TokenCounter(scheme=value)
    if isinstance(value, Mapping):
        _expect_keys(value, {"scheme", "external_command"}, "counter")
        command = value.get("external_command")
        return TokenCounter(
            scheme=value.get("scheme", "whitespace"),
            external_command=tuple(command) if command else None,
        )
    raise _fail(f"counter: cannot interpret {value!r}")


def config_digest(raw: Mapping) -> str:
    canonical = json.dumps(raw, ensure_ascii=False, sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | None = None) -> AuditConfig:
    """Read and validate an audit config from `path` or $LENBIAS_CONFIG."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
        if not path:
            raise _fail(f"no config path given and {ENV_CONFIG} is unset")
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except FileNotFoundError:
        raise _fail(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise _fail(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise _fail("config must be a JSON object")
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def parse_config(raw: Mapping, base_dir: str = ".") -> AuditConfig:
    _expect_keys(raw, {"corpora", "counter", "suite", "chunks", "scorers",
                       "perturbations", "histogram", "out_dir", "seed",
                       "preference_level", "timeout_secs"}, "config")

    def resolve(rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(base_dir, rel)

    corpora = []
    for i, entry in enumerate(raw.get("corpora", [])):
        where = f"corpora[{i}]"
        if not isinstance(entry, Mapping) or "path" not in entry:
            raise _fail(f"{where}: needs a 'path'")
        _expect_keys(entry, {"path", "format"}, where)
        fmt = entry.get("format", "tsv")
        if fmt not in ("tsv", "jsonl"):
            raise _fail(f"{where}: unknown format {fmt!r}")
        resolved = resolve(entry["path"])
        if not os.path.exists(resolved):
            raise _fail(f"{where}: file not found: {entry['path']}")
        corpora.append(CorpusEntry(resolved, fmt, display=entry["path"]))
    if not corpora:
        raise _fail("config needs at least one corpus")

    chunks = []
    for i, entry in enumerate(raw.get("chunks", [])):
        where = f"chunks[{i}]"
        if not isinstance(entry, Mapping) or "path" not in entry or "lang_pair" not in entry:
            raise _fail(f"{where}: needs 'path' and 'lang_pair'")
        _expect_keys(entry, {"path", "lang_pair"}, where)
        resolved = resolve(entry["path"])
        if not os.path.exists(resolved):
            raise _fail(f"{where}: file not found: {entry['path']}")
        chunks.append(ChunkEntry(resolved, entry["lang_pair"], display=entry["path"]))

    scorers = []
    labels_seen = set()
    for i, entry in enumerate(raw.get("scorers", [])):
        where = f"scorers[{i}]"
        if not isinstance(entry, Mapping) or "kind" not in entry:
            raise _fail(f"{where}: needs a 'kind'")
        _expect_keys(entry, {"label", "kind", "params", "orientation", "mode",
                             "wrap_density"}, where)
        kind = entry["kind"]
        if kind not in KINDS:
            raise _fail(f"{where}: unknown kind {kind!r}")
        mode = entry.get("mode", "qe")
        if mode not in MODES:
            raise _fail(f"{where}: unknown mode {mode!r}")
        orientation = entry.get("orientation", "higher_better")
        if orientation not in ORIENTATIONS:
            raise _fail(f"{where}: unknown orientation {orientation!r}")
        params = dict(entry.get("params", {}))
        if kind == "external_subprocess":
            command = params.get("command")
            if not command or not isinstance(command, list):
                raise _fail(f"{where}: external_subprocess needs params.command (a list)")
        if kind == "external_http" and not params.get("url"):
            raise _fail(f"{where}: external_http needs params.url")
        label = entry.get("label") or kind
        if label in labels_seen:
            raise _fail(f"{where}: duplicate scorer label {label!r}")
        labels_seen.add(label)
        spec = ScorerSpec(kind=kind, params=params, declared_orientation=orientation,
                          label=label)
        scorers.append(ScorerEntry(label, spec, mode,
                                   bool(entry.get("wrap_density", False))))
    if not scorers:
        raise _fail("config needs at least one scorer")

    perturbations = []
    seen_categories = set()
    for i, entry in enumerate(raw.get("perturbations", [])):
        where = f"perturbations[{i}]"
        if not isinstance(entry, Mapping):
            raise _fail(f"{where}: must be an object")
        _expect_keys(entry, {"severity", "dimension", "rule", "seed"}, where)
        severity = entry.get("severity")
        dimension = entry.get("dimension")
        if (severity, dimension) not in CATEGORY_RULES:
            raise _fail(f"{where}: unknown category ({severity!r}, {dimension!r})")
        rule = entry.get("rule")
        if rule is not None:
            if rule not in RULE_CATEGORY:
                raise _fail(f"{where}: unknown rule {rule!r}")
            if RULE_CATEGORY[rule] != (severity, dimension):
                raise _fail(f"{where}: rule {rule!r} does not realize "
                            f"({severity!r}, {dimension!r})")
        category = f"{severity}-{dimension}"
        if category in seen_categories:
            raise _fail(f"{where}: duplicate perturbation category {category!r}")
        seen_categories.add(category)
        perturbations.append(PerturbEntry(severity, dimension, rule,
                                          int(entry.get("seed", raw.get("seed", 0)))))

    suite = raw.get("suite", {})
    _expect_keys(suite, {"max_segments", "window_tokens", "separator",
                         "min_chunk_tokens", "max_chunk_tokens", "thresholds"},
                 "suite")
    thresholds = tuple(suite.get("thresholds", DEFAULT_THRESHOLDS))
    if any(t <= 0 for t in thresholds) or list(thresholds) != sorted(set(thresholds)):
        raise _fail("suite.thresholds must be positive and strictly increasing")

    histogram = None
    if raw.get("histogram") is not None:
        h = raw["histogram"]
        _expect_keys(h, {"bin_width", "range"}, "histogram")
        if "bin_width" not in h or "range" not in h or len(h["range"]) != 2:
            raise _fail("histogram needs bin_width and range [lo, hi]")
        lo, hi = float(h["range"][0]), float(h["range"][1])
        if not (float(h["bin_width"]) > 0 and hi > lo):
            raise _fail("histogram needs bin_width > 0 and range hi > lo")
        histogram = (float(h["bin_width"]), lo, hi)

    level = float(raw.get("preference_level", 0.95))
    if not 0.0 < level < 1.0:
        raise _fail(f"preference_level must be in (0, 1), got {level}")

    return AuditConfig(
        corpora=tuple(corpora),
        scorers=tuple(scorers),
        counter=_coerce_counter(raw.get("counter")),
        max_segments=int(suite.get("max_segments", 5)),
        window_tokens=int(suite.get("window_tokens", 500)),
        separator=suite.get("separator", " "),
        min_chunk_tokens=int(suite.get("min_chunk_tokens", 200)),
        max_chunk_tokens=int(suite.get("max_chunk_tokens", 500)),
        thresholds=thresholds,
        chunks=tuple(chunks),
        perturbations=tuple(perturbations),
        histogram=histogram,
        out_dir=raw.get("out_dir", "out"),
        seed=int(raw.get("seed", 0)),
        preference_level=level,
        timeout_secs=float(raw.get("timeout_secs", 120.0)),
        digest=config_digest(raw),
    )


# --- pipeline ------------------------------------------------------------------

def _package_version() -> str:
    try:
        return importlib_metadata.version("lenbias")
    except importlib_metadata.PackageNotFoundError:
        return "0+unknown"


def _passage_requests(groups: Sequence[PassageGroup], mode: str,
                      hypotheses: Mapping[str, Sequence[str]] | None = None,
                      ) -> list[ScoreRequest]:
    """One request per passage; ids are '<doc_id>#p<index>'.

    For clean suites the gold target is its own reference. `hypotheses`
    substitutes perturbed texts, in which case the clean text becomes the
    reference.
    """
    requests = []
    for group in groups:
        for k, passage in enumerate(group.passages):
            hyp = passage.hypothesis_text
            ref = hyp
            if hypotheses is not None:
                hyp = hypotheses[group.doc_id][k]
            requests.append(ScoreRequest(
                id=f"{group.doc_id}#p{passage.index}",
                source=passage.source_text,
                hypothesis=hyp,
                reference=ref if mode in ("ref", "hybrid") else None,
                mode=mode,
            ))
    return requests


def _pair_requests(pairs: Sequence[HypothesisPair], mode: str) -> list[ScoreRequest]:
    requests = []
    for pair in pairs:
        ref = pair.reference_text if mode in ("ref", "hybrid") else None
        requests.append(ScoreRequest(f"{pair.chunk_id}#short", pair.source_text,
                                     pair.shorter.text, ref, mode))
        requests.append(ScoreRequest(f"{pair.chunk_id}#long", pair.source_text,
                                     pair.longer.text, ref, mode))
    return requests


def _scores_by_doc(groups: Sequence[PassageGroup], scores: Sequence[float],
                   requests: Sequence[ScoreRequest]) -> dict[str, list[float]]:
    by_id = {req.id: score for req, score in zip(requests, scores)}
    out: dict[str, list[float]] = {}
    for group in groups:
        out[group.doc_id] = [by_id[f"{group.doc_id}#p{p.index}"]
                             for p in group.passages]
    return out


def _effective_spec(entry: ScorerEntry, counter: TokenCounter) -> ScorerSpec:
    if entry.wrap_density:
        return wrap_density_scorer(entry.spec, counter)
    return entry.spec


def run_audit(config: AuditConfig) -> BiasReport:
    """Execute the full audit described by `config` and return its report."""
    corpora: list[Corpus] = []
    groups_by_lang: dict[str, list[PassageGroup]] = {}
    discarded_by_lang: dict[str, int] = {}
    seen_docs: set[str] = set()
    for entry in config.corpora:
        corpus = load_corpus(entry.path, entry.format)
        overlap = seen_docs.intersection(d.doc_id for d in corpus.documents)
        if overlap:
            raise CorpusError(
                f"doc_id {sorted(overlap)[0]!r} appears in more than one corpus")
        seen_docs.update(d.doc_id for d in corpus.documents)
        corpora.append(corpus)
        suite = build_passage_groups(
            corpus, config.counter, max_segments=config.max_segments,
            window_tokens=config.window_tokens, separator=config.separator)
        groups_by_lang.setdefault(corpus.lang_pair, []).extend(suite.groups)
        discarded_by_lang[corpus.lang_pair] = (
            discarded_by_lang.get(corpus.lang_pair, 0) + suite.discarded)
    all_groups = [g for lang in sorted(groups_by_lang)
                  for g in groups_by_lang[lang]]

    pairs_by_lang: dict[str, list[HypothesisPair]] = {}
    seen_chunks: set[str] = set()
    for entry in config.chunks:
        chunk_list = load_chunks(entry.path)
        pairs = build_hypothesis_pairs(
            chunk_list, config.counter,
            min_tokens=config.min_chunk_tokens, max_tokens=config.max_chunk_tokens)
        overlap = seen_chunks.intersection(p.chunk_id for p in pairs)
        if overlap:
            raise CorpusError(
                f"chunk_id {sorted(overlap)[0]!r} appears in more than one chunk file")
        seen_chunks.update(p.chunk_id for p in pairs)
        pairs_by_lang.setdefault(entry.lang_pair, []).extend(pairs)

    report = BiasReport(metadata=_metadata(config, corpora, groups_by_lang,
                                           discarded_by_lang, pairs_by_lang))

    for entry in config.scorers:
        try:
            report.scorers[entry.label] = _audit_one_scorer(
                config, entry, groups_by_lang, all_groups, pairs_by_lang)
        except (ScorerError, ProtocolError, CounterError) as exc:
            report.failures[entry.label] = str(exc)

    if config.scorers and not report.scorers:
        details = "; ".join(f"{label}: {msg}"
                            for label, msg in sorted(report.failures.items()))
        raise ScorerError(f"all scorers failed: {details}")
    return report


def _metadata(config: AuditConfig, corpora: Sequence[Corpus],
              groups_by_lang: Mapping[str, Sequence[PassageGroup]],
              discarded_by_lang: Mapping[str, int],
              pairs_by_lang: Mapping[str, Sequence[HypothesisPair]]) -> dict:
    return {
        "generated_by": f"lenbias {_package_version()}",
        "config_digest": config.digest,
        "seed": config.seed,
        "counter": config.counter.describe(),
        "suite": {
            "max_segments": config.max_segments,
            "window_tokens": config.window_tokens,
            "separator": config.separator,
            "min_chunk_tokens": config.min_chunk_tokens,
            "max_chunk_tokens": config.max_chunk_tokens,
            "thresholds": list(config.thresholds),
        },
        "conventions": {
            "orientation": "internal scores are higher-is-better",
            "rel_diff": "(longer - shorter) / shorter, token counts",
            "ties": "equal-length candidates resolve to first in input order",
            "length_unit": "tokens per the configured counter",
            "rounding": ROUNDING_NOTE,
            "true_quality": {"clean": CLEAN_TRUE_QUALITY,
                             "preference": PREFERENCE_TRUE_QUALITY},
        },
        "preference_level": config.preference_level,
        "corpora": [
            {"path": entry.display or entry.path, "format": entry.format,
             "lang_pair": corpus.lang_pair, "n_documents": len(corpus.documents)}
            for entry, corpus in zip(config.corpora, corpora)
        ],
        "groups": {lang: {"n_groups": len(groups_by_lang[lang]),
                          "n_discarded": discarded_by_lang.get(lang, 0)}
                   for lang in sorted(groups_by_lang)},
        "pairs": {lang: len(pairs_by_lang[lang]) for lang in sorted(pairs_by_lang)},
        "scorers": [
            {"label": e.label, "kind": e.spec.kind, "mode": e.mode,
             "orientation": e.spec.declared_orientation,
             "wrap_density": e.wrap_density}
            for e in config.scorers
        ],
        "perturbations": [
            {"severity": p.severity, "dimension": p.dimension,
             "rule": p.rule, "seed": p.seed}
            for p in config.perturbations
        ],
    }


def _audit_one_scorer(config: AuditConfig, entry: ScorerEntry,
                      groups_by_lang: Mapping[str, list[PassageGroup]],
                      all_groups: Sequence[PassageGroup],
                      pairs_by_lang: Mapping[str, list[HypothesisPair]]) -> dict:
    spec = _effective_spec(entry, config.counter)
    block: dict = {
        "kind": entry.spec.kind,
        "mode": entry.mode,
        "orientation": entry.spec.declared_orientation,
        "wrap_density": entry.wrap_density,
        "delta_curves": {},
        "slopes": {},
        "trends": {},
        "preferences": {},
        "histogram": None,
        "bias": {},
        "perturbations": {},
    }

    trend_last = min(config.max_segments, 5) if config.max_segments >= 2 else 2

    all_scores: list[float] = []
    if all_groups:
        requests = _passage_requests(all_groups, entry.mode)
        responses = score_batch(spec, requests, config.timeout_secs)
        oriented = [orient(spec.declared_orientation, r.score) for r in responses]
        all_scores = oriented
        by_doc = _scores_by_doc(all_groups, oriented, requests)

        for lang in sorted(groups_by_lang):
            lang_groups = groups_by_lang[lang]
            curve = delta_curve(lang_groups, by_doc)
            block["delta_curves"][lang] = delta_curve_to_dict(curve)
            if len(curve) >= 2:
                block["slopes"][lang] = slope_of_score_changes(curve)
            block["trends"][lang] = trend_to_dict(decreasing_trend_proportion(
                lang_groups, by_doc, first=1, last=trend_last))
        if len(groups_by_lang) > 1:
            curve = delta_curve(all_groups, by_doc)
            block["delta_curves"]["aggregate"] = delta_curve_to_dict(curve)
            if len(curve) >= 2:
                block["slopes"]["aggregate"] = slope_of_score_changes(curve)
        block["trends"]["aggregate"] = trend_to_dict(decreasing_trend_proportion(
            all_groups, by_doc, first=1, last=trend_last))

        block["bias"]["clean"] = bias_to_dict(
            bias_estimate(all_scores, CLEAN_TRUE_QUALITY))
        if config.histogram is not None:
            width, lo, hi = config.histogram
            block["histogram"] = histogram_to_dict(
                score_histogram(all_scores, width, lo, hi))

        for pentry in config.perturbations:
            block["perturbations"][pentry.category] = _audit_perturbation(
                config, entry, spec, pentry, all_groups)

    if pairs_by_lang:
        _audit_preferences(config, entry, spec, pairs_by_lang, block)

    return block


def _audit_perturbation(config: AuditConfig, entry: ScorerEntry, spec: ScorerSpec,
                        pentry: PerturbEntry,
                        all_groups: Sequence[PassageGroup]) -> dict:
    perturbed = []
    rule_counts: dict[str, int] = {}
    n_skipped = 0
    for group in all_groups:
        if pentry.rule is not None:
            pspec = PerturbationSpec(pentry.severity, pentry.dimension,
                                     pentry.seed, pentry.rule)
            try:
                pg = apply_perturbation(group, pspec)
            except RuleInapplicableError:
                pg = None
        else:
            pg = perturb_with_fallback(group, pentry.severity, pentry.dimension,
                                       pentry.seed)
        if pg is None:
            n_skipped += 1
            continue
        perturbed.append(pg)
        rule_counts[pg.spec.rule] = rule_counts.get(pg.spec.rule, 0) + 1

    out = {
        "n_groups": len(perturbed),
        "n_skipped": n_skipped,
        "rule_counts": dict(sorted(rule_counts.items())),
        "gold_rating": None,
        "bias": None,
    }
    if not perturbed:
        return out
    gold = perturbed[0].gold_rating
    hypotheses = {pg.base.doc_id: list(pg.hypotheses) for pg in perturbed}
    requests = _passage_requests([pg.base for pg in perturbed], entry.mode,
                                 hypotheses=hypotheses)
    responses = score_batch(spec, requests, config.timeout_secs)
    oriented = [orient(spec.declared_orientation, r.score) for r in responses]
    out["gold_rating"] = gold
    out["bias"] = bias_to_dict(bias_estimate(oriented, gold))
    return out


def _audit_preferences(config: AuditConfig, entry: ScorerEntry, spec: ScorerSpec,
                       pairs_by_lang: Mapping[str, list[HypothesisPair]],
                       block: dict):
    from .report import direction_of

    win_indicators: list[float] = []
    pair_scores_by_lang: dict[str, dict[str, tuple[float, float]]] = {}
    for lang in sorted(pairs_by_lang):
        pairs = pairs_by_lang[lang]
        if not pairs:
            continue
        requests = _pair_requests(pairs, entry.mode)
        responses = score_batch(spec, requests, config.timeout_secs)
        oriented = [orient(spec.declared_orientation, r.score) for r in responses]
        scores: dict[str, tuple[float, float]] = {}
        for pair, short_score, long_score in zip(pairs, oriented[0::2], oriented[1::2]):
            scores[pair.chunk_id] = (short_score, long_score)
            if short_score > long_score:
                win_indicators.append(1.0)
            elif short_score == long_score:
                win_indicators.append(0.5)
            else:
                win_indicators.append(0.0)
        pair_scores_by_lang[lang] = scores

        bins = bin_pairs(pairs, config.thresholds)
        block["preferences"][lang] = [
            preference_to_dict(shorter_preference_rate(b, scores,
                                                       config.preference_level))
            for b in bins
        ]

    by_direction: dict[str, list[str]] = {}
    for lang in sorted(pair_scores_by_lang):
        by_direction.setdefault(direction_of(lang), []).append(lang)
    for direction in sorted(by_direction):
        langs = by_direction[direction]
        pooled_pairs = [p for lang in langs for p in pairs_by_lang[lang]]
        pooled_scores: dict[str, tuple[float, float]] = {}
        for lang in langs:
            pooled_scores.update(pair_scores_by_lang[lang])
        bins = bin_pairs(pooled_pairs, config.thresholds)
        block["preferences"][f"aggregate:{direction}"] = [
            preference_to_dict(shorter_preference_rate(b, pooled_scores,
                                                       config.preference_level))
            for b in bins
        ]

    if win_indicators:
        block["bias"]["preference"] = bias_to_dict(
            bias_estimate(win_indicators, PREFERENCE_TRUE_QUALITY))
