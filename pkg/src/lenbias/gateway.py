"""Scorer backends behind one batch interface.

Four kinds of scorer hide behind ScorerSpec: two reference implementations
that run in-process (a synthetic scorer with a tunable length bias, and a
cheap lexical-overlap metric) and two external transports (subprocess line
protocol, HTTP). score_batch() is the only entry point; batches are atomic,
responses are reordered to request order, and every id must come back exactly
once.

The synthetic scorer keys its noise stream to (seed, request id), so a
request's score never depends on batch composition or ordering.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import wire
from .corpus import TokenCounter, count_tokens, count_tokens_many
from .errors import ProtocolError, ScorerError
from .perturb import MqmAnnotation
from .rng import SplitMix64, key_seed

MODES = ("qe", "ref", "hybrid")
ORIENTATIONS = ("higher_better", "lower_worse")
KINDS = ("synthetic_biased", "lexical_overlap", "external_subprocess", "external_http")

# exact wire key order for request lines
REQUEST_KEYS = ("id", "source", "hypothesis", "reference", "mode")


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    source: str
    hypothesis: str
    reference: str | None = None
    mode: str = "qe"

    def __post_init__(self):
        if not self.id:
            raise ValueError("request id must be non-empty")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("ref", "hybrid") and self.reference is None:
            raise ValueError(f"mode {self.mode!r} requires a reference")


@dataclass(frozen=True)
class ScoreResponse:
    id: str
    score: float
    is_density: bool = False
    spans: tuple[MqmAnnotation, ...] | None = None


@dataclass(frozen=True)
class ScorerSpec:
    """Identity and configuration of one scorer.

    density_inner marks a density-transform wrapper: scoring delegates to the
    inner spec and rescales each density by hypothesis length (counted with
    density_counter).
    """

    kind: str
    params: Mapping = field(default_factory=dict)
    declared_orientation: str = "higher_better"
    label: str | None = None
    density_inner: "ScorerSpec | None" = None
    density_counter: TokenCounter | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        if self.declared_orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.declared_orientation!r}")

    @property
    def effective_label(self) -> str:
        return self.label if self.label else self.kind


def orient(orientation: str, score: float) -> float:
    """Map a raw score to the internal higher-is-better convention.

    higher_better scores pass through unchanged (MQM-style 0-is-perfect
    scales included: less negative is still better); lower_worse marks
    penalty-magnitude scales, which are negated.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"unknown orientation {orientation!r}")
    return -score if orientation == "lower_worse" else score


def orient_scores(orientation: str, scores: Sequence[float]) -> list[float]:
    return [orient(orientation, s) for s in scores]


# --- in-process scorers -------------------------------------------------------

def synthetic_biased_score(params: Mapping, request: ScoreRequest) -> float:
    """Deterministic scorer with a planted length bias.

    score = clamp(base - alpha * |h| + sigma * z) where |h| is the hypothesis
    token count and z is a unit normal drawn from a generator keyed by
    (seed, request id).
    """
    base = float(params.get("base", 0.0))
    alpha = float(params.get("alpha", 0.0))
    sigma = float(params.get("sigma", 0.0))
    seed = int(params.get("seed", 0))
    counter = _counter_from_params(params)
    tokens = count_tokens(counter, request.hypothesis)
    noise = sigma * SplitMix64(key_seed(seed, request.id)).next_normal()
    score = base - alpha * tokens + noise
    clamp = params.get("clamp")
    if clamp is not None:
        lo, hi = float(clamp[0]), float(clamp[1])
        if lo > hi:
            raise ValueError(f"clamp bounds out of order: {clamp!r}")
        score = min(hi, max(lo, score))
    return score


def lexical_overlap_score(request: ScoreRequest) -> float:
    """Multiset token F1 against the reference, shifted to an MQM-like scale.

    score = 25 * (F1 - 1): identical strings score 0.0, fully disjoint
    token multisets score -25.0.
    """
    if request.reference is None:
        raise ScorerError("lexical_overlap needs a reference (mode=qe gives none)")
    hyp = Counter(request.hypothesis.split())
    ref = Counter(request.reference.split())
    if not hyp and not ref:
        return 0.0
    overlap = sum((hyp & ref).values())
    total = sum(hyp.values()) + sum(ref.values())
    f1 = 2.0 * overlap / total if total else 0.0
    return 25.0 * (f1 - 1.0)


def _counter_from_params(params: Mapping) -> TokenCounter:
    value = params.get("counter", "whitespace")
    if isinstance(value, TokenCounter):
        return value
    if isinstance(value, str):
        return TokenCounter(scheme=value)
    if isinstance(value, Mapping):
        command = value.get("external_command")
        return TokenCounter(
            scheme=value.get("scheme", "whitespace"),
            external_command=tuple(command) if command else None,
        )
    raise ValueError(f"cannot interpret counter spec {value!r}")


# --- wire codecs ---------------------------------------------------------------

def request_to_wire(request: ScoreRequest) -> dict:
    """Request object in exact protocol key order."""
    return {
        "id": request.id,
        "source": request.source,
        "hypothesis": request.hypothesis,
        "reference": request.reference,
        "mode": request.mode,
    }


def response_from_wire(obj: dict) -> ScoreResponse:
    for key in ("id", "score"):
        if key not in obj:
            raise ProtocolError(f"response missing key {key!r}: {obj!r}")
    rid = obj["id"]
    if not isinstance(rid, str):
        raise ProtocolError(f"response id is not a string: {rid!r}")
    score = obj["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise ProtocolError(f"response score is not a number: {score!r}")
    score = float(score)
    if not math.isfinite(score):
        raise ProtocolError(f"response score is not finite: {score!r}")
    is_density = obj.get("is_density", False)
    if not isinstance(is_density, bool):
        raise ProtocolError(f"response is_density is not a boolean: {is_density!r}")
    raw_spans = obj.get("spans")
    spans = None
    if raw_spans is not None:
        if not isinstance(raw_spans, list):
            raise ProtocolError(f"response spans is not a list: {raw_spans!r}")
        try:
            spans = tuple(
                MqmAnnotation(s["start"], s["end"], s["severity"], s["dimension"],
                              s.get("note", ""))
                for s in raw_spans
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ProtocolError(f"malformed span in response: {exc}") from exc
    return ScoreResponse(rid, score, is_density, spans)


# --- batch driver --------------------------------------------------------------

def score_batch(
    scorer: ScorerSpec,
    requests: Sequence[ScoreRequest],
    timeout_secs: float = 120.0,
) -> list[ScoreResponse]:
    """Score a batch; responses come back in request order, one per request.

    Batches are atomic: a single protocol violation, adapter error line, or
    missing/duplicate/unknown response id raises and discards the batch.
    """
    if not requests:
        return []
    ids = [r.id for r in requests]
    if len(set(ids)) != len(ids):
        dup = next(i for i, n in Counter(ids).items() if n > 1)
        raise ValueError(f"duplicate request id {dup!r} in batch")

    if scorer.density_inner is not None:
        return _score_density_wrapped(scorer, requests, timeout_secs)

    if scorer.kind == "synthetic_biased":
        emit_density = bool(scorer.params.get("emit_density", False))
        return [
            ScoreResponse(r.id, synthetic_biased_score(scorer.params, r), emit_density)
            for r in requests
        ]
    if scorer.kind == "lexical_overlap":
        return [ScoreResponse(r.id, lexical_overlap_score(r)) for r in requests]
    if scorer.kind == "external_subprocess":
        command = scorer.params.get("command")
        if not command:
            raise ScorerError("external_subprocess scorer needs params['command']")
        lines = wire.exchange(
            [str(c) for c in command],
            [wire.encode_line(request_to_wire(r)) for r in requests],
            expected=len(requests),
            timeout_secs=timeout_secs,
        )
        responses = [response_from_wire(wire.decode_line(line)) for line in lines]
    elif scorer.kind == "external_http":
        url = scorer.params.get("url")
        if not url:
            raise ScorerError("external_http scorer needs params['url']")
        objs = wire.http_exchange(url, [request_to_wire(r) for r in requests],
                                  timeout_secs)
        responses = [response_from_wire(obj) for obj in objs]
    else:  # unreachable, kinds validated at construction
        raise ScorerError(f"unhandled scorer kind {scorer.kind!r}")

    return _reorder(ids, responses)


def _reorder(ids: Sequence[str], responses: Sequence[ScoreResponse]) -> list[ScoreResponse]:
    known = set(ids)
    by_id: dict[str, ScoreResponse] = {}
    for resp in responses:
        if resp.id in by_id:
            raise ProtocolError(f"duplicate response for id {resp.id!r}")
        if resp.id not in known:
            raise ProtocolError(f"response for unknown id {resp.id!r}")
        by_id[resp.id] = resp
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ProtocolError(f"missing response for id {missing[0]!r} "
                            f"({len(missing)} of {len(ids)} unanswered)")
    return [by_id[i] for i in ids]


def _score_density_wrapped(
    scorer: ScorerSpec,
    requests: Sequence[ScoreRequest],
    timeout_secs: float,
) -> list[ScoreResponse]:
    from .normalize import from_density

    inner = score_batch(scorer.density_inner, requests, timeout_secs)
    counter = scorer.density_counter or TokenCounter(scheme="whitespace")
    lengths = count_tokens_many(counter, [r.hypothesis for r in requests])
    out = []
    for request, response, tokens in zip(requests, inner, lengths):
        if not response.is_density:
            raise ScorerError(
                f"scorer {scorer.density_inner.effective_label!r} does not emit "
                "densities; cannot apply the density transform"
            )
        out.append(ScoreResponse(response.id, from_density(response.score, tokens),
                                 False, response.spans))
    return out
