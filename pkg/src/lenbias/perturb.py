"""Controlled MQM error insertion into passage groups.

Each perturbation edits the first segment of a group's hypothesis side and
splices the identical edit into every passage, so all passages of the group
carry exactly one known error and share one gold MQM rating (minor -1,
major -5).

The rule library is a deterministic, offline stand-in for LLM-generated
errors. Rules operate on whitespace word tokens, with a character-window
fallback for scripts without spaces; every random choice comes from the
fixed-algorithm generator seeded by (spec.seed, doc_id), so a perturbation is
a pure function of (group, spec). An external adapter hook accepts
higher-quality edits over a line protocol and validates them against the same
first-segment-only contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import PerturbationRejected, ProtocolError, RuleInapplicableError
from .rng import SplitMix64, key_seed
from .suites import PassageGroup, passage_group_from_dict, passage_group_to_dict
from . import wire

SEVERITIES = ("minor", "major")
DIMENSIONS = ("accuracy", "fluency")

MINOR_PENALTY = -1.0
MAJOR_PENALTY = -5.0

# rule name -> (severity, dimension) it realizes
RULE_CATEGORY = {
    "negation": ("major", "accuracy"),
    "content_swap": ("major", "accuracy"),
    "numeral_shift": ("minor", "accuracy"),
    "noun_typo": ("minor", "accuracy"),
    "clause_reverse": ("major", "fluency"),
    "word_duplication": ("minor", "fluency"),
    "drop_punct": ("minor", "fluency"),
}

# preferred rule order per category, used by perturb_with_fallback
CATEGORY_RULES = {
    ("major", "accuracy"): ("negation", "content_swap"),
    ("minor", "accuracy"): ("numeral_shift", "noun_typo"),
    ("major", "fluency"): ("clause_reverse",),
    ("minor", "fluency"): ("word_duplication", "drop_punct"),
}

_AUXILIARIES = frozenset(
    "is are was were be been being has have had will would shall can could "
    "should must does do did may might".split()
)
_FUNCTION_WORDS = frozenset(
    "the a an of to in on at by and or for with from as is was are were "
    "der die das den dem ein eine und le la les un une et de du el los las "
    "y en que".split()
)
_DECOY_WORDS = (
    "pineapple", "submarine", "trombone", "glacier", "umbrella",
    "crocodile", "turbine", "meteor",
)
_FINAL_PUNCT = ".!?。！？؟।…"
_COMMAS = ",，、،"

_WORD_RE = re.compile(r"\S+")
_DIGITS_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class PerturbationSpec:
    severity: str
    dimension: str
    seed: int
    rule: str

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.rule not in RULE_CATEGORY:
            raise ValueError(f"unknown rule {self.rule!r}")
        if RULE_CATEGORY[self.rule] != (self.severity, self.dimension):
            raise ValueError(
                f"rule {self.rule!r} realizes {RULE_CATEGORY[self.rule]}, "
                f"not ({self.severity!r}, {self.dimension!r})"
            )

    @property
    def penalty(self) -> float:
        return MAJOR_PENALTY if self.severity == "major" else MINOR_PENALTY


@dataclass(frozen=True)
class MqmAnnotation:
    """One error span in a hypothesis, MQM severity/dimension labelled."""

    start: int
    end: int
    severity: str
    dimension: str
    note: str = ""

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise ValueError(f"invalid span ({self.start}, {self.end})")
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")

    @property
    def penalty(self) -> float:
        return MAJOR_PENALTY if self.severity == "major" else MINOR_PENALTY


def mqm_score(annotations: Sequence[MqmAnnotation]) -> float:
    """Sum of MQM penalties: minor -1, major -5; no annotations scores 0."""
    return float(sum(a.penalty for a in annotations))


@dataclass(frozen=True)
class PerturbedGroup:
    """A passage group with one error spliced into every passage's first segment."""

    base: PassageGroup
    spec: PerturbationSpec
    annotations: tuple[MqmAnnotation, ...]
    gold_rating: float
    hypotheses: tuple[str, ...]  # perturbed hypothesis text per passage, in order

    def __post_init__(self):
        if len(self.hypotheses) != len(self.base.passages):
            raise ValueError("one perturbed hypothesis per passage required")


# --- rule implementations ----------------------------------------------------
#
# Each rule takes the first-segment text and the group RNG and returns
# (edited_text, (span_start, span_end), note); the span addresses the edited
# text. RuleInapplicableError signals the caller to pick another rule.


def _tokens(text: str) -> list[re.Match]:
    return list(_WORD_RE.finditer(text))


def _core_bounds(match: re.Match) -> tuple[int, int, str]:
    """Strip leading/trailing punctuation from a token; return core start/end/text."""
    token = match.group()
    start, end = match.start(), match.end()
    lead = len(token) - len(token.lstrip("\"'«“‘([{"))
    core = token[lead:]
    trail = len(core) - len(core.rstrip("\"'»”’)]}.,;:!?"))
    core = core[: len(core) - trail] if trail else core
    return start + lead, end - trail, core


def _char_positions(text: str) -> list[int]:
    return [i for i, ch in enumerate(text) if not ch.isspace()]


def _require_material(rule: str, text: str) -> str:
    """Pick the edit mode: 'word' for >= 3 word tokens, else 'char'."""
    if len(_tokens(text)) >= 3:
        return "word"
    if len(_char_positions(text)) >= 3:
        return "char"
    raise RuleInapplicableError(rule, "first segment too short (< 3 word tokens)")


def _rule_negation(text: str, rng: SplitMix64):
    if _require_material("negation", text) != "word":
        raise RuleInapplicableError("negation", "needs whitespace word tokens")
    tokens = _tokens(text)
    for tok in tokens:
        _, _, core = _core_bounds(tok)
        if core.lower() == "not":
            cut_end = min(len(text), tok.end() + 1)  # also eat one joining space
            edited = text[: tok.start()] + text[cut_end:]
            return edited, (tok.start(), tok.start()), "negation removed"
    for tok in tokens:
        _, _, core = _core_bounds(tok)
        if core.lower() in _AUXILIARIES:
            edited = text[: tok.end()] + " not" + text[tok.end():]
            return edited, (tok.end() + 1, tok.end() + 4), "negation inserted"
    raise RuleInapplicableError("negation", "no negation or auxiliary verb found")


def _rule_content_swap(text: str, rng: SplitMix64):
    mode = _require_material("content_swap", text)
    if mode == "word":
        candidates = []
        for tok in _tokens(text):
            cs, ce, core = _core_bounds(tok)
            if len(core) >= 4 and core.isalpha():
                candidates.append((cs, ce, core))
        if not candidates:
            raise RuleInapplicableError("content_swap", "no content word of length >= 4")
        cs, ce, core = candidates[rng.next_below(len(candidates))]
        decoy = _DECOY_WORDS[rng.next_below(len(_DECOY_WORDS))]
        if decoy.lower() == core.lower():
            decoy = _DECOY_WORDS[(_DECOY_WORDS.index(decoy) + 1) % len(_DECOY_WORDS)]
        if core[0].isupper():
            decoy = decoy.capitalize()
        edited = text[:cs] + decoy + text[ce:]
        return edited, (cs, cs + len(decoy)), f"content word {core!r} replaced"
    positions = _char_positions(text)
    start = positions[rng.next_below(max(1, len(positions) - 2))]
    window_end = min(len(text), start + 3)
    decoy = "XYZ" if text[start:window_end] != "XYZ" else "QQQ"
    edited = text[:start] + decoy[: window_end - start] + text[window_end:]
    return edited, (start, start + (window_end - start)), "character window replaced"


def _rule_numeral_shift(text: str, rng: SplitMix64):
    match = _DIGITS_RE.search(text)
    if match is None:
        raise RuleInapplicableError("numeral_shift", "no digit present")
    value = int(match.group())
    delta = 1 if value == 0 or rng.next_below(2) == 0 else -1
    replacement = str(value + delta)
    edited = text[: match.start()] + replacement + text[match.end():]
    span = (match.start(), match.start() + len(replacement))
    return edited, span, f"numeral {match.group()} -> {replacement}"


def _shift_letter(ch: str) -> str:
    for base in ("a", "A"):
        if base <= ch <= chr(ord(base) + 25):
            return chr((ord(ch) - ord(base) + 1) % 26 + ord(base))
    return chr(ord(ch) + 1)


def _rule_noun_typo(text: str, rng: SplitMix64):
    mode = _require_material("noun_typo", text)
    if mode == "word":
        candidates = []
        for i, tok in enumerate(_tokens(text)):
            cs, ce, core = _core_bounds(tok)
            if i > 0 and len(core) >= 2 and core[0].isupper():
                candidates.append((cs, core))
        if not candidates:
            raise RuleInapplicableError("noun_typo", "no capitalized word after position 0")
        cs, core = candidates[rng.next_below(len(candidates))]
        pos = 1 + rng.next_below(len(core) - 1)
        edited_char = _shift_letter(core[pos])
        at = cs + pos
    else:
        positions = _char_positions(text)
        at = positions[rng.next_below(len(positions))]
        edited_char = _shift_letter(text[at])
    edited = text[:at] + edited_char + text[at + 1:]
    return edited, (at, at + 1), f"letter {text[at]!r} -> {edited_char!r}"


def _rule_clause_reverse(text: str, rng: SplitMix64):
    mode = _require_material("clause_reverse", text)
    if mode == "char":
        half = max(2, len(text) // 2)
        edited = text[:half][::-1] + text[half:]
        if edited == text:
            raise RuleInapplicableError("clause_reverse", "reversal is a no-op")
        return edited, (0, half), "leading characters reversed"
    comma_at = min((i for i in (text.find(c) for c in _COMMAS) if i > 0), default=-1)
    tokens = _tokens(text)
    if comma_at > 0:
        clause_tokens = [t for t in tokens if t.end() <= comma_at]
        rest_from = comma_at
    else:
        clause_tokens = tokens[: max(2, len(tokens) // 2)]
        rest_from = clause_tokens[-1].end()
    if len(clause_tokens) < 2:
        clause_tokens = tokens[:2]
        rest_from = clause_tokens[-1].end()
    reversed_clause = " ".join(t.group() for t in reversed(clause_tokens))
    edited = reversed_clause + text[rest_from:]
    if edited == text:
        raise RuleInapplicableError("clause_reverse", "reversal is a no-op")
    return edited, (0, len(reversed_clause)), "clause word order reversed"


def _rule_word_duplication(text: str, rng: SplitMix64):
    mode = _require_material("word_duplication", text)
    if mode == "word":
        candidates = []
        for tok in _tokens(text):
            _, _, core = _core_bounds(tok)
            if core.lower() in _FUNCTION_WORDS:
                candidates.append((tok, core))
        if not candidates:
            raise RuleInapplicableError("word_duplication", "no function word found")
        tok, core = candidates[rng.next_below(len(candidates))]
        edited = text[: tok.end()] + " " + core + text[tok.end():]
        return edited, (tok.end() + 1, tok.end() + 1 + len(core)), f"{core!r} duplicated"
    positions = _char_positions(text)
    at = positions[rng.next_below(len(positions))]
    edited = text[: at + 1] + text[at] + text[at + 1:]
    return edited, (at + 1, at + 2), "character duplicated"


def _rule_drop_punct(text: str, rng: SplitMix64):
    if not text or text[-1] not in _FINAL_PUNCT:
        raise RuleInapplicableError("drop_punct", "no sentence-final punctuation")
    edited = text[:-1]
    return edited, (len(edited), len(edited)), "final punctuation dropped"


_RULES = {
    "negation": _rule_negation,
    "content_swap": _rule_content_swap,
    "numeral_shift": _rule_numeral_shift,
    "noun_typo": _rule_noun_typo,
    "clause_reverse": _rule_clause_reverse,
    "word_duplication": _rule_word_duplication,
    "drop_punct": _rule_drop_punct,
}


def _splice(group: PassageGroup, edited_s1: str) -> tuple[str, ...]:
    """Replace the first-segment prefix of every passage's hypothesis."""
    s1 = group.passages[0].hypothesis_text
    hypotheses = []
    for passage in group.passages:
        if not passage.hypothesis_text.startswith(s1):
            raise PerturbationRejected(
                f"doc {group.doc_id!r}: passage {passage.index} does not extend "
                "the first passage (prefix property violated)"
            )
        hypotheses.append(edited_s1 + passage.hypothesis_text[len(s1):])
    return tuple(hypotheses)


def apply_perturbation(group: PassageGroup, spec: PerturbationSpec) -> PerturbedGroup:
    """Insert one rule-generated error into the first segment of every passage.

    Pure function of (group, spec): random choices come from the fixed
    generator seeded by (spec.seed, doc_id). Raises RuleInapplicableError when
    the rule finds no material (no digit for numeral_shift, etc.), in which
    case the caller may pick another rule of the same category.
    """
    s1 = group.passages[0].hypothesis_text
    rng = SplitMix64(key_seed(spec.seed, group.doc_id))
    edited_s1, (start, end), note = _RULES[spec.rule](s1, rng)
    if edited_s1 == s1:
        raise RuleInapplicableError(spec.rule, "edit was a no-op")
    annotation = MqmAnnotation(start, end, spec.severity, spec.dimension,
                               f"{spec.rule}: {note}")
    annotations = (annotation,)
    return PerturbedGroup(group, spec, annotations, mqm_score(annotations),
                          _splice(group, edited_s1))


def perturb_with_fallback(
    group: PassageGroup, severity: str, dimension: str, seed: int
) -> PerturbedGroup | None:
    """Try each rule of the (severity, dimension) category in preference order.

    Returns None when no rule of the category applies to the group.
    """
    for rule in CATEGORY_RULES[(severity, dimension)]:
        try:
            return apply_perturbation(group, PerturbationSpec(severity, dimension, seed, rule))
        except RuleInapplicableError:
            continue
    return None


# --- external perturbation adapter -------------------------------------------

def external_perturb(
    adapter_cmd: Sequence[str],
    group: PassageGroup,
    spec: PerturbationSpec,
    timeout_secs: float = 120.0,
) -> PerturbedGroup:
    """Delegate the first-segment edit to an external adapter process.

    The request carries the full final-passage hypothesis so an adapter that
    touches anything beyond the first segment is caught: the suffix from the
    second segment onward must come back byte-identical. The edited first
    segment is recovered by stripping that suffix and then spliced into every
    passage exactly like a built-in rule.
    """
    s1 = group.passages[0].hypothesis_text
    final_text = group.passages[-1].hypothesis_text
    suffix = final_text[len(s1):]
    request = {
        "id": group.doc_id,
        "text": final_text,
        "severity": spec.severity,
        "dimension": spec.dimension,
    }
    lines = wire.exchange(adapter_cmd, [wire.encode_line(request)],
                          expected=1, timeout_secs=timeout_secs)
    obj = wire.decode_line(lines[0])
    for key in ("id", "text", "span"):
        if key not in obj:
            raise ProtocolError(f"perturbation response missing key {key!r}")
    if obj["id"] != group.doc_id:
        raise ProtocolError(
            f"perturbation response id {obj['id']!r} does not echo {group.doc_id!r}"
        )
    edited_text = obj["text"]
    if not isinstance(edited_text, str):
        raise ProtocolError("perturbation response text is not a string")
    if edited_text == final_text:
        raise PerturbationRejected(f"doc {group.doc_id!r}: no error inserted")
    if suffix and not edited_text.endswith(suffix):
        raise PerturbationRejected(f"doc {group.doc_id!r}: edit outside first segment")
    edited_s1 = edited_text[: len(edited_text) - len(suffix)]
    if edited_s1 == s1:
        raise PerturbationRejected(f"doc {group.doc_id!r}: no error inserted")
    span = obj["span"]
    if (not isinstance(span, list) or len(span) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in span)):
        raise ProtocolError(f"perturbation span must be [start, end], got {span!r}")
    start, end = span
    if not (0 <= start <= end <= len(edited_s1)):
        raise PerturbationRejected(
            f"doc {group.doc_id!r}: annotation span {span} outside the first segment"
        )
    note = obj.get("note", "")
    if not isinstance(note, str):
        raise ProtocolError("perturbation note is not a string")
    annotation = MqmAnnotation(start, end, spec.severity, spec.dimension,
                               note or "external edit")
    annotations = (annotation,)
    return PerturbedGroup(group, spec, annotations, mqm_score(annotations),
                          _splice(group, edited_s1))


# --- JSONL serialization -----------------------------------------------------

def perturbed_group_to_dict(pg: PerturbedGroup) -> dict:
    return {
        "base": passage_group_to_dict(pg.base),
        "spec": {
            "severity": pg.spec.severity,
            "dimension": pg.spec.dimension,
            "seed": pg.spec.seed,
            "rule": pg.spec.rule,
        },
        "annotations": [
            {"start": a.start, "end": a.end, "severity": a.severity,
             "dimension": a.dimension, "note": a.note}
            for a in pg.annotations
        ],
        "gold_rating": pg.gold_rating,
        "hypotheses": list(pg.hypotheses),
    }


def perturbed_group_from_dict(obj: dict) -> PerturbedGroup:
    spec = PerturbationSpec(**obj["spec"])
    annotations = tuple(MqmAnnotation(**a) for a in obj["annotations"])
    return PerturbedGroup(
        passage_group_from_dict(obj["base"]),
        spec,
        annotations,
        obj["gold_rating"],
        tuple(obj["hypotheses"]),
    )
