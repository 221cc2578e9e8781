"""Command-line front end.

Stages mirror the library pipeline and exchange JSONL files so any stage can
be rerun without repeating the ones before it (external scoring is the
expensive step worth caching). Exit codes: 0 success, 1 config or input
error, 2 scorer or protocol failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import shlex
import sys
from typing import Sequence

from . import audit as audit_mod
from . import conformance as conformance_mod
from .corpus import TokenCounter, load_corpus, save_corpus
from .errors import (ConfigError, CorpusError, CounterError, LenBiasError,
                     PerturbationRejected, ProtocolError, RuleInapplicableError,
                     ScorerError, SuiteError)
from .gateway import (KINDS, MODES, ORIENTATIONS, ScoreRequest, ScorerSpec, orient,
                      score_batch)
from .normalize import wrap_density_scorer
from .perturb import (RULE_CATEGORY, PerturbationSpec, apply_perturbation,
                      perturb_with_fallback, perturbed_group_from_dict,
                      perturbed_group_to_dict)
from .report import (ROUNDING_NOTE, BiasReport, bias_to_dict, delta_curve_to_dict,
                     histogram_to_dict, preference_to_dict, trend_to_dict,
                     write_report)
from .stats import (bias_estimate, decreasing_trend_proportion, delta_curve,
                    score_histogram, shorter_preference_rate,
                    slope_of_score_changes)
from .suites import (DEFAULT_THRESHOLDS, bin_pairs, build_hypothesis_pairs,
                     build_passage_groups, hypothesis_pair_from_dict,
                     hypothesis_pair_to_dict, load_chunks,
                     passage_group_from_dict, passage_group_to_dict, read_jsonl,
                     write_jsonl)


def _say(message: str):
    print(message)


def _counter_from_args(args) -> TokenCounter:
    command = tuple(shlex.split(args.counter_command)) if args.counter_command else None
    return TokenCounter(scheme=args.counter, external_command=command)


def _parse_thresholds(text: str | None) -> tuple[float, ...]:
    if not text:
        return DEFAULT_THRESHOLDS
    return tuple(float(part) for part in text.split(","))


def _parse_histogram(text: str | None) -> tuple[float, float, float] | None:
    if not text:
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--histogram expects WIDTH:LO:HI, got {text!r}")
    return float(parts[0]), float(parts[1]), float(parts[2])


# --- subcommand handlers --------------------------------------------------------

def cmd_ingest(args) -> int:
    corpus = load_corpus(args.infile, args.format)
    save_corpus(corpus, args.out, args.out_format)
    segments = sum(len(d.segments) for d in corpus.documents)
    _say(f"ingested {len(corpus.documents)} documents / {segments} segments "
         f"({corpus.lang_pair}) -> {args.out}")
    return 0


def cmd_build_suite(args) -> int:
    counter = _counter_from_args(args)
    corpus = load_corpus(args.corpus, args.format)
    suite = build_passage_groups(
        corpus, counter, max_segments=args.max_segments,
        window_tokens=args.window_tokens, separator=args.separator)
    write_jsonl(args.passages_out, (passage_group_to_dict(g) for g in suite.groups))
    _say(f"built {len(suite.groups)} passage groups "
         f"({suite.discarded} documents discarded by the token window) "
         f"-> {args.passages_out}")
    if args.chunks:
        pairs = build_hypothesis_pairs(
            load_chunks(args.chunks), counter,
            min_tokens=args.min_tokens, max_tokens=args.max_tokens)
        write_jsonl(args.pairs_out, (hypothesis_pair_to_dict(p) for p in pairs))
        _say(f"built {len(pairs)} hypothesis pairs -> {args.pairs_out}")
    return 0


def cmd_perturb(args) -> int:
    if args.rule is not None and args.rule not in RULE_CATEGORY:
        raise ConfigError(f"unknown rule {args.rule!r}")
    groups = [passage_group_from_dict(o) for o in read_jsonl(args.passages)]
    perturbed = []
    skipped = 0
    for group in groups:
        if args.rule is not None:
            spec = PerturbationSpec(args.severity, args.dimension, args.seed, args.rule)
            try:
                perturbed.append(apply_perturbation(group, spec))
                continue
            except RuleInapplicableError:
                skipped += 1
                continue
        pg = perturb_with_fallback(group, args.severity, args.dimension, args.seed)
        if pg is None:
            skipped += 1
        else:
            perturbed.append(pg)
    write_jsonl(args.out, (perturbed_group_to_dict(pg) for pg in perturbed))
    _say(f"perturbed {len(perturbed)} groups ({skipped} skipped, no applicable rule) "
         f"-> {args.out}")
    return 0


def _scorer_from_args(args) -> ScorerSpec:
    params = json.loads(args.params) if args.params else {}
    if not isinstance(params, dict):
        raise ConfigError("--params must be a JSON object")
    spec = ScorerSpec(kind=args.scorer, params=params,
                      declared_orientation=args.orientation, label=args.label)
    if args.wrap_density:
        spec = wrap_density_scorer(spec, _counter_from_args(args))
    return spec


def _suite_requests(records: list[dict], mode: str) -> list[ScoreRequest]:
    """Build scoring requests from passage, perturbed, or pair records."""
    requests: list[ScoreRequest] = []
    for obj in records:
        if "hypotheses" in obj:  # perturbed group
            pg = perturbed_group_from_dict(obj)
            for passage, hyp in zip(pg.base.passages, pg.hypotheses):
                ref = passage.hypothesis_text if mode in ("ref", "hybrid") else None
                requests.append(ScoreRequest(f"{pg.base.doc_id}#p{passage.index}",
                                             passage.source_text, hyp, ref, mode))
        elif "passages" in obj:  # clean passage group
            group = passage_group_from_dict(obj)
            for passage in group.passages:
                ref = passage.hypothesis_text if mode in ("ref", "hybrid") else None
                requests.append(ScoreRequest(f"{group.doc_id}#p{passage.index}",
                                             passage.source_text,
                                             passage.hypothesis_text, ref, mode))
        elif "shorter" in obj:  # hypothesis pair
            pair = hypothesis_pair_from_dict(obj)
            ref = pair.reference_text if mode in ("ref", "hybrid") else None
            requests.append(ScoreRequest(f"{pair.chunk_id}#short", pair.source_text,
                                         pair.shorter.text, ref, mode))
            requests.append(ScoreRequest(f"{pair.chunk_id}#long", pair.source_text,
                                         pair.longer.text, ref, mode))
        else:
            raise ConfigError("unrecognized suite record (expected passage groups, "
                              "perturbed groups, or hypothesis pairs)")
    return requests


def cmd_score(args) -> int:
    records = read_jsonl(args.suite)
    requests = _suite_requests(records, args.mode)
    spec = _scorer_from_args(args)
    responses = score_batch(spec, requests, args.timeout_secs)
    write_jsonl(args.out, (
        {"id": r.id, "score": r.score, "is_density": r.is_density,
         "spans": None if r.spans is None else [
             {"start": s.start, "end": s.end, "severity": s.severity,
              "dimension": s.dimension, "note": s.note} for s in r.spans]}
        for r in responses))
    _say(f"scored {len(responses)} requests with {spec.effective_label} -> {args.out}")
    return 0


def _load_scores(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for obj in read_jsonl(path):
        out[obj["id"]] = float(obj["score"])
    return out


def _parse_labelled(values: Sequence[str], flag: str) -> list[tuple[str, str]]:
    pairs = []
    for value in values:
        label, sep, path = value.partition("=")
        if not sep or not label or not path:
            raise ConfigError(f"{flag} expects LABEL=PATH, got {value!r}")
        pairs.append((label, path))
    return pairs


def cmd_analyze(args) -> int:
    orientations = dict(_parse_labelled(args.orient or [], "--orient"))
    for label, orientation in orientations.items():
        if orientation not in ORIENTATIONS:
            raise ConfigError(f"unknown orientation {orientation!r} for {label!r}")
    thresholds = _parse_thresholds(args.thresholds)
    histogram = _parse_histogram(args.histogram)

    report = BiasReport(metadata={
        "generated_by": "lenbias analyze",
        "config_digest": None,
        "conventions": {
            "orientation": "internal scores are higher-is-better",
            "rel_diff": "(longer - shorter) / shorter, token counts",
            "ties": "equal-length candidates resolve to first in input order",
            "rounding": ROUNDING_NOTE,
        },
        "preference_level": args.level,
        "thresholds": list(thresholds),
    })

    groups = ([passage_group_from_dict(o) for o in read_jsonl(args.passages)]
              if args.passages else [])
    pairs = ([hypothesis_pair_from_dict(o) for o in read_jsonl(args.pairs)]
             if args.pairs else [])

    labels = {label for label, _ in
              _parse_labelled(args.passage_scores or [], "--passage-scores")}
    labels.update(label for label, _ in
                  _parse_labelled(args.pair_scores or [], "--pair-scores"))
    if not labels:
        raise ConfigError("analyze needs --passage-scores and/or --pair-scores")

    passage_paths = dict(_parse_labelled(args.passage_scores or [], "--passage-scores"))
    pair_paths = dict(_parse_labelled(args.pair_scores or [], "--pair-scores"))

    for label in sorted(labels):
        orientation = orientations.get(label, "higher_better")
        block: dict = {"orientation": orientation, "delta_curves": {}, "slopes": {},
                       "trends": {}, "preferences": {}, "histogram": None, "bias": {}}

        if label in passage_paths:
            if not groups:
                raise ConfigError("--passage-scores given without --passages")
            raw = _load_scores(passage_paths[label])
            by_doc: dict[str, list[float]] = {}
            for group in groups:
                try:
                    by_doc[group.doc_id] = [
                        orient(orientation, raw[f"{group.doc_id}#p{p.index}"])
                        for p in group.passages]
                except KeyError as exc:
                    raise ConfigError(
                        f"{passage_paths[label]}: missing score for {exc.args[0]!r}"
                    ) from exc
            by_lang: dict[str, list] = {}
            for group in groups:
                by_lang.setdefault(group.lang_pair, []).append(group)
            trend_last = min(args.trend_last, max(len(g.passages) for g in groups))
            for lang in sorted(by_lang):
                curve = delta_curve(by_lang[lang], by_doc)
                block["delta_curves"][lang] = delta_curve_to_dict(curve)
                if len(curve) >= 2:
                    block["slopes"][lang] = slope_of_score_changes(curve)
                block["trends"][lang] = trend_to_dict(decreasing_trend_proportion(
                    by_lang[lang], by_doc, first=1, last=trend_last))
            block["trends"]["aggregate"] = trend_to_dict(decreasing_trend_proportion(
                groups, by_doc, first=1, last=trend_last))
            if len(by_lang) > 1:
                curve = delta_curve(groups, by_doc)
                block["delta_curves"]["aggregate"] = delta_curve_to_dict(curve)
                if len(curve) >= 2:
                    block["slopes"]["aggregate"] = slope_of_score_changes(curve)
            all_scores = [s for doc in sorted(by_doc) for s in by_doc[doc]]
            block["bias"]["clean"] = bias_to_dict(bias_estimate(all_scores, 0.0))
            if histogram is not None:
                width, lo, hi = histogram
                block["histogram"] = histogram_to_dict(
                    score_histogram(all_scores, width, lo, hi))

        if label in pair_paths:
            if not pairs:
                raise ConfigError("--pair-scores given without --pairs")
            raw = _load_scores(pair_paths[label])
            scores: dict[str, tuple[float, float]] = {}
            indicators: list[float] = []
            for pair in pairs:
                try:
                    short_score = orient(orientation, raw[f"{pair.chunk_id}#short"])
                    long_score = orient(orientation, raw[f"{pair.chunk_id}#long"])
                except KeyError as exc:
                    raise ConfigError(
                        f"{pair_paths[label]}: missing score for {exc.args[0]!r}"
                    ) from exc
                scores[pair.chunk_id] = (short_score, long_score)
                indicators.append(1.0 if short_score > long_score
                                  else 0.5 if short_score == long_score else 0.0)
            bins = bin_pairs(pairs, thresholds)
            block["preferences"][args.pairs_lang] = [
                preference_to_dict(shorter_preference_rate(b, scores, args.level))
                for b in bins]
            block["bias"]["preference"] = bias_to_dict(bias_estimate(indicators, 0.5))

        report.scorers[label] = block

    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write(report.to_json())
    _say(f"analyzed {len(labels)} scorer(s) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    with open(args.report, encoding="utf-8") as handle:
        report = BiasReport.from_json(handle.read())
    written = write_report(report, args.out_dir)
    for path in written:
        _say(f"wrote {path}")
    return 0


def cmd_audit(args) -> int:
    config = audit_mod.load_config(args.config)
    if args.out_dir:
        config = dataclasses.replace(config, out_dir=args.out_dir)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    report = audit_mod.run_audit(config)
    written = write_report(report, config.out_dir)
    for path in written:
        _say(f"wrote {path}")
    for label, message in sorted(report.failures.items()):
        print(f"warning: scorer {label!r} failed: {message}", file=sys.stderr)
    return 0


def cmd_conformance(args) -> int:
    cmd = list(args.adapter_cmd)
    if cmd and cmd[0] == "--":
        cmd = cmd[1:]
    if not cmd:
        raise ConfigError("conformance needs an adapter command after '--'")
    results = conformance_mod.run_conformance(cmd, args.timeout_secs)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        _say(f"{status} {result.name}: {result.detail}")
    return 0 if conformance_mod.all_passed(results) else 2


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lenbias",
        description="Audit machine-translation quality scorers for length bias.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_counter_args(p):
        p.add_argument("--counter", default="whitespace",
                       choices=["whitespace", "character", "external"],
                       help="token counting scheme (default: whitespace)")
        p.add_argument("--counter-command", default=None,
                       help="command line for the external counter")

    p = sub.add_parser("ingest", help="parse a corpus file and write canonical JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", default="tsv", choices=["tsv", "jsonl"])
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", default="jsonl", choices=["tsv", "jsonl"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-suite",
                       help="build passage groups (and hypothesis pairs) from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", default="jsonl", choices=["tsv", "jsonl"])
    p.add_argument("--passages-out", default="passages.jsonl")
    p.add_argument("--max-segments", type=int, default=5)
    p.add_argument("--window-tokens", type=int, default=500)
    p.add_argument("--separator", default=" ")
    p.add_argument("--chunks", default=None,
                   help="chunk-candidate JSONL to build hypothesis pairs from")
    p.add_argument("--pairs-out", default="pairs.jsonl")
    p.add_argument("--min-tokens", type=int, default=200)
    p.add_argument("--max-tokens", type=int, default=500)
    add_counter_args(p)
    p.set_defaults(func=cmd_build_suite)

    p = sub.add_parser("perturb", help="insert one controlled MQM error per group")
    p.add_argument("--passages", required=True)
    p.add_argument("--severity", required=True, choices=["minor", "major"])
    p.add_argument("--dimension", required=True, choices=["accuracy", "fluency"])
    p.add_argument("--rule", default=None,
                   help="specific rule; default tries the category's rules in order")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("score", help="score a suite file with one scorer")
    p.add_argument("--suite", required=True,
                   help="passages, perturbed, or pairs JSONL (detected by shape)")
    p.add_argument("--scorer", required=True, choices=list(KINDS))
    p.add_argument("--params", default=None, help="scorer params as a JSON object")
    p.add_argument("--label", default=None)
    p.add_argument("--orientation", default="higher_better",
                   choices=list(ORIENTATIONS))
    p.add_argument("--mode", default="qe", choices=list(MODES))
    p.add_argument("--wrap-density", action="store_true",
                   help="apply the density transform around the scorer")
    p.add_argument("--timeout-secs", type=float, default=120.0)
    p.add_argument("--out", required=True)
    add_counter_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze", help="compute bias statistics from cached scores")
    p.add_argument("--passages", default=None)
    p.add_argument("--passage-scores", action="append", metavar="LABEL=PATH")
    p.add_argument("--pairs", default=None)
    p.add_argument("--pair-scores", action="append", metavar="LABEL=PATH")
    p.add_argument("--orient", action="append", metavar="LABEL=ORIENTATION")
    p.add_argument("--pairs-lang", default="all",
                   help="series label for the pair preference table")
    p.add_argument("--thresholds", default=None,
                   help="comma-separated rel-diff thresholds (fractions)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--trend-last", type=int, default=5)
    p.add_argument("--histogram", default=None, metavar="WIDTH:LO:HI")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render a report JSON to tables and charts")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit", help="run the full pipeline from a JSON config")
    p.add_argument("--config", default=None,
                   help="config path (default: $LENBIAS_CONFIG)")
    p.add_argument("--out-dir", default=None, help="override the config's out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("conformance",
                       help="check an external adapter against the wire protocol")
    p.add_argument("--timeout-secs", type=float, default=120.0)
    p.add_argument("adapter_cmd", nargs=argparse.REMAINDER,
                   help="adapter command, after '--'")
    p.set_defaults(func=cmd_conformance)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ScorerError, ProtocolError, CounterError, PerturbationRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, SuiteError, RuleInapplicableError, LenBiasError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
