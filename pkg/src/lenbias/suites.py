"""Probe-suite construction.

Two suites drive the audit:

* Cumulative passage groups: for each document, passages ``p_1..p_k`` where
  passage i joins the first i segments on both the source and the target side.
  Since the gold targets are treated as error-free, every passage in a group
  has the same true quality, so any score drift across the group is length
  effect, not quality.
* Hypothesis pairs: per source chunk, the shortest and longest of several
  candidate translations of comparable quality, labelled with their relative
  length difference and binned by difference thresholds.

Serialization is JSONL with a stable key order so suite files are diffable and
byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .corpus import Corpus, TokenCounter, count_tokens_many
from .errors import SuiteError

DEFAULT_THRESHOLDS = (0.025, 0.05, 0.075, 0.10, 0.125, 0.15)


@dataclass(frozen=True)
class Passage:
    """Cumulative passage i: the first i segments joined on both sides."""

    index: int
    source_text: str
    hypothesis_text: str
    source_tokens: int
    hypothesis_tokens: int

    def __post_init__(self):
        if self.index < 1:
            raise SuiteError(f"passage index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class PassageGroup:
    doc_id: str
    lang_pair: str
    passages: tuple[Passage, ...]

    def __post_init__(self):
        if not self.passages:
            raise SuiteError(f"doc {self.doc_id!r}: empty passage group")


class PassageSuite(NamedTuple):
    """Retained groups plus the count of documents dropped by the token window."""

    groups: list[PassageGroup]
    discarded: int


@dataclass(frozen=True)
class Candidate:
    text: str
    tokens: int


@dataclass(frozen=True)
class HypothesisPair:
    """Shortest and longest candidate translations of one source chunk."""

    chunk_id: str
    source_text: str
    reference_text: str
    shorter: Candidate
    longer: Candidate
    rel_diff: float

    def __post_init__(self):
        if self.shorter.tokens > self.longer.tokens:
            raise SuiteError(f"chunk {self.chunk_id!r}: shorter is longer than longer")


@dataclass(frozen=True)
class LengthBin:
    """All pairs whose relative length difference meets ``threshold``."""

    threshold: float
    pairs: tuple[HypothesisPair, ...]

    def __post_init__(self):
        for pair in self.pairs:
            if pair.rel_diff < self.threshold:
                raise SuiteError(
                    f"chunk {pair.chunk_id!r}: rel_diff {pair.rel_diff} below "
                    f"bin threshold {self.threshold}"
                )


def build_passage_groups(
    corpus: Corpus,
    counter: TokenCounter,
    max_segments: int = 5,
    window_tokens: int = 500,
    separator: str = " ",
) -> PassageSuite:
    """Build one cumulative passage group per document.

    A document contributes passages ``p_1..p_k`` with ``k = min(max_segments,
    segment count)``. It is discarded when the final passage exceeds
    ``window_tokens`` on either the source or the hypothesis side, so every
    retained passage fits the smallest scorer context window.
    """
    if max_segments < 1:
        raise SuiteError(f"max_segments must be >= 1, got {max_segments}")
    if window_tokens < 1:
        raise SuiteError(f"window_tokens must be >= 1, got {window_tokens}")
    if not corpus.documents:
        raise SuiteError("empty corpus")

    groups: list[PassageGroup] = []
    discarded = 0
    for doc in corpus.documents:
        k = min(max_segments, len(doc.segments))
        source_texts = []
        hypothesis_texts = []
        for i in range(1, k + 1):
            segs = doc.segments[:i]
            source_texts.append(separator.join(s.source_text for s in segs))
            hypothesis_texts.append(separator.join(s.target_text for s in segs))
        counts = count_tokens_many(counter, source_texts + hypothesis_texts)
        source_counts, hyp_counts = counts[:k], counts[k:]
        if source_counts[-1] > window_tokens or hyp_counts[-1] > window_tokens:
            discarded += 1
            continue
        passages = tuple(
            Passage(i + 1, source_texts[i], hypothesis_texts[i],
                    source_counts[i], hyp_counts[i])
            for i in range(k)
        )
        groups.append(PassageGroup(doc.doc_id, doc.lang_pair, passages))
    return PassageSuite(groups, discarded)


@dataclass(frozen=True)
class Chunk:
    """Input record for pair construction: one source with candidate translations."""

    chunk_id: str
    source: str
    reference: str
    candidates: tuple[str, ...]


def build_hypothesis_pairs(
    chunks: Sequence[Chunk],
    counter: TokenCounter,
    min_tokens: int = 200,
    max_tokens: int = 500,
) -> list[HypothesisPair]:
    """Select the min/max-length candidates of each retained chunk.

    Chunks whose reference token count falls outside [min_tokens, max_tokens]
    are dropped. Ties on candidate length go to the first candidate in input
    order, so the selection is deterministic.
    """
    pairs: list[HypothesisPair] = []
    for chunk in chunks:
        if len(chunk.candidates) < 2:
            raise SuiteError(
                f"chunk {chunk.chunk_id!r}: needs >= 2 candidates, got {len(chunk.candidates)}"
            )
        for i, cand in enumerate(chunk.candidates):
            if not cand.strip():
                raise SuiteError(f"chunk {chunk.chunk_id!r}: candidate {i} is empty")
        counts = count_tokens_many(counter, [chunk.reference, *chunk.candidates])
        ref_tokens, cand_tokens = counts[0], counts[1:]
        if ref_tokens < min_tokens or ref_tokens > max_tokens:
            continue
        short_i = min(range(len(cand_tokens)), key=lambda i: (cand_tokens[i], i))
        long_i = max(range(len(cand_tokens)), key=lambda i: (cand_tokens[i], -i))
        shorter = Candidate(chunk.candidates[short_i], cand_tokens[short_i])
        longer = Candidate(chunk.candidates[long_i], cand_tokens[long_i])
        if shorter.tokens == 0:
            raise SuiteError(
                f"chunk {chunk.chunk_id!r}: shortest candidate counts 0 tokens"
            )
        rel_diff = (longer.tokens - shorter.tokens) / shorter.tokens
        pairs.append(
            HypothesisPair(chunk.chunk_id, chunk.source, chunk.reference,
                           shorter, longer, rel_diff)
        )
    return pairs


def bin_pairs(
    pairs: Sequence[HypothesisPair],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> list[LengthBin]:
    """Nest pairs into bins: bin t holds exactly the pairs with rel_diff >= t."""
    if not thresholds:
        raise SuiteError("no thresholds given")
    if any(t <= 0 for t in thresholds):
        raise SuiteError("thresholds must be > 0")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise SuiteError("thresholds must be strictly increasing")
    return [
        LengthBin(t, tuple(p for p in pairs if p.rel_diff >= t))
        for t in thresholds
    ]


# --- JSONL serialization -----------------------------------------------------

def passage_group_to_dict(group: PassageGroup) -> dict:
    return {
        "doc_id": group.doc_id,
        "lang_pair": group.lang_pair,
        "passages": [
            {
                "index": p.index,
                "source_text": p.source_text,
                "hypothesis_text": p.hypothesis_text,
                "source_tokens": p.source_tokens,
                "hypothesis_tokens": p.hypothesis_tokens,
            }
            for p in group.passages
        ],
    }


def passage_group_from_dict(obj: dict) -> PassageGroup:
    return PassageGroup(
        obj["doc_id"],
        obj["lang_pair"],
        tuple(
            Passage(p["index"], p["source_text"], p["hypothesis_text"],
                    p["source_tokens"], p["hypothesis_tokens"])
            for p in obj["passages"]
        ),
    )


def hypothesis_pair_to_dict(pair: HypothesisPair) -> dict:
    return {
        "chunk_id": pair.chunk_id,
        "source_text": pair.source_text,
        "reference_text": pair.reference_text,
        "shorter": {"text": pair.shorter.text, "tokens": pair.shorter.tokens},
        "longer": {"text": pair.longer.text, "tokens": pair.longer.tokens},
        "rel_diff": pair.rel_diff,
    }


def hypothesis_pair_from_dict(obj: dict) -> HypothesisPair:
    return HypothesisPair(
        obj["chunk_id"],
        obj["source_text"],
        obj["reference_text"],
        Candidate(obj["shorter"]["text"], obj["shorter"]["tokens"]),
        Candidate(obj["longer"]["text"], obj["longer"]["tokens"]),
        obj["rel_diff"],
    )


def write_jsonl(path: str | Path, objects: Iterable[dict]) -> None:
    Path(path).write_text(
        "".join(json.dumps(obj, ensure_ascii=False) + "\n" for obj in objects),
        encoding="utf-8",
    )


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


def load_chunks(path: str | Path) -> list[Chunk]:
    """Read chunk-candidate input: JSONL with keys chunk_id, source, reference, candidates."""
    chunks = []
    for i, obj in enumerate(read_jsonl(path), start=1):
        try:
            chunks.append(
                Chunk(obj["chunk_id"], obj["source"], obj["reference"],
                      tuple(obj["candidates"]))
            )
        except (KeyError, TypeError) as exc:
            raise SuiteError(f"chunk record {i}: missing or malformed field ({exc})") from exc
    return chunks


def check_prefix_property(group: PassageGroup) -> bool:
    """True when each passage's texts extend the previous passage's texts.

    Allows the one joining separator inserted between the old text and the new
    segment; token counts must be monotone on both sides.
    """
    for prev, cur in zip(group.passages, group.passages[1:]):
        if not cur.source_text.startswith(prev.source_text):
            return False
        if not cur.hypothesis_text.startswith(prev.hypothesis_text):
            return False
        if cur.source_tokens < prev.source_tokens:
            return False
        if cur.hypothesis_tokens < prev.hypothesis_tokens:
            return False
    return True


def mean_token_increment(groups: Sequence[PassageGroup], side: str = "hypothesis") -> float:
    """Mean per-step token increment across consecutive passages of all groups.

    This is the analytic link between a per-token score slope and the
    per-passage-index slope reported by the statistics layer.
    """
    deltas = []
    for group in groups:
        for prev, cur in zip(group.passages, group.passages[1:]):
            if side == "hypothesis":
                deltas.append(cur.hypothesis_tokens - prev.hypothesis_tokens)
            else:
                deltas.append(cur.source_tokens - prev.source_tokens)
    if not deltas:
        raise SuiteError("no consecutive passages in any group")
    return math.fsum(deltas) / len(deltas)
