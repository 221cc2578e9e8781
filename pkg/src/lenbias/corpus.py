"""Document-segmented bilingual corpora and token counting.

A corpus file holds one language pair. Two on-disk formats are supported:

* TSV: tab-delimited, no header, columns ``doc_id, seg_index, lang_pair,
  source, target``; tabs and newlines inside text fields are forbidden.
* JSONL: one object per line with exactly those key names.

Rows may arrive in any order; documents are assembled in ``seg_index`` order
and sorted by ``doc_id``, so loading is insensitive to row shuffling.

Token counting is pluggable: a whitespace counter, a script-neutral character
counter (non-whitespace Unicode scalar values, a workable stand-in for subword
length on spaceless scripts), and an external line-protocol counter for
plugging in a real subword tokenizer (one text per input line, one decimal
count per output line).
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusError, CounterError

TSV_COLUMNS = ("doc_id", "seg_index", "lang_pair", "source", "target")


@dataclass(frozen=True)
class Segment:
    """One pre-split bilingual segment of a document."""

    doc_id: str
    seg_index: int
    source_text: str
    target_text: str
    lang_pair: str

    def __post_init__(self):
        if self.seg_index < 0:
            raise CorpusError(f"doc {self.doc_id!r}: negative seg_index {self.seg_index}")
        if not self.source_text.strip():
            raise CorpusError(f"doc {self.doc_id!r} seg {self.seg_index}: empty source text")
        if not self.target_text.strip():
            raise CorpusError(f"doc {self.doc_id!r} seg {self.seg_index}: empty target text")


@dataclass(frozen=True)
class Document:
    """Ordered segments sharing one doc_id and language pair."""

    doc_id: str
    segments: tuple[Segment, ...]
    lang_pair: str

    def __post_init__(self):
        if not self.segments:
            raise CorpusError(f"doc {self.doc_id!r}: no segments")
        for seg in self.segments:
            if seg.doc_id != self.doc_id:
                raise CorpusError(
                    f"doc {self.doc_id!r}: segment carries doc_id {seg.doc_id!r}"
                )
            if seg.lang_pair != self.lang_pair:
                raise CorpusError(
                    f"doc {self.doc_id!r}: mixed lang_pair "
                    f"({self.lang_pair!r} vs {seg.lang_pair!r})"
                )
        for expected, seg in enumerate(self.segments):
            if seg.seg_index != expected:
                if any(s.seg_index == seg.seg_index for s in self.segments[:expected]):
                    raise CorpusError(
                        f"doc {self.doc_id!r}: duplicate seg_index {seg.seg_index}"
                    )
                raise CorpusError(f"doc {self.doc_id!r}: gap in seg_index at {expected}")


@dataclass(frozen=True)
class Corpus:
    """All documents of one language pair.

    ``provenance`` is a free-text label (normally the source path); it is
    excluded from equality because the on-disk formats do not carry it.
    """

    lang_pair: str
    documents: tuple[Document, ...]
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            if doc.lang_pair != self.lang_pair:
                raise CorpusError(
                    f"doc {doc.doc_id!r}: lang_pair {doc.lang_pair!r} differs from "
                    f"corpus {self.lang_pair!r}"
                )


@dataclass(frozen=True)
class TokenCounter:
    """Token-counting scheme.

    schemes:
        whitespace: count of Unicode-whitespace-separated tokens.
        character: count of non-whitespace Unicode scalar values.
        external: line-protocol subprocess given by ``external_command``.
    """

    scheme: str = "whitespace"
    external_command: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.scheme not in ("whitespace", "character", "external"):
            raise CounterError(f"unknown counter scheme {self.scheme!r}")
        if self.scheme == "external" and not self.external_command:
            raise CounterError("external counter requires external_command")

    def describe(self) -> str:
        if self.scheme == "external":
            return f"external:{' '.join(self.external_command or ())}"
        return self.scheme


def count_tokens(counter: TokenCounter, text: str) -> int:
    """Count tokens in ``text`` under ``counter``. The empty string counts 0."""
    if counter.scheme == "whitespace":
        return len(text.split())
    if counter.scheme == "character":
        return sum(1 for ch in text if not ch.isspace())
    return count_tokens_many(counter, [text])[0]


def count_tokens_many(counter: TokenCounter, texts: Sequence[str]) -> list[int]:
    """Batch counterpart of :func:`count_tokens`.

    For the external scheme this runs one subprocess for the whole batch.
    Newlines inside a text are sent as spaces (the line protocol frames one
    text per line).
    """
    if counter.scheme != "external":
        return [count_tokens(counter, t) for t in texts]
    if not texts:
        return []
    payload = "".join(t.replace("\r", " ").replace("\n", " ") + "\n" for t in texts)
    try:
        proc = subprocess.run(
            list(counter.external_command or ()),
            input=payload,
            capture_output=True,
            text=True,
            encoding="utf-8",
        )
    except OSError as exc:
        raise CounterError(f"external counter failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise CounterError(
            f"external counter exited {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    lines = proc.stdout.splitlines()
    if len(lines) != len(texts):
        raise CounterError(
            f"external counter returned {len(lines)} counts for {len(texts)} texts"
        )
    counts = []
    for i, line in enumerate(lines):
        try:
            value = int(line.strip())
        except ValueError as exc:
            raise CounterError(f"external counter line {i + 1} not an integer: {line!r}") from exc
        if value < 0:
            raise CounterError(f"external counter line {i + 1} negative: {value}")
        counts.append(value)
    return counts


def _records_to_corpus(
    records: Iterable[tuple[int, str, int, str, str, str]], provenance: str
) -> Corpus:
    """Assemble validated (line_no, doc_id, seg_index, lang_pair, source, target) rows."""
    by_doc: dict[str, dict[int, Segment]] = {}
    lang_pair: str | None = None
    count = 0
    for line_no, doc_id, seg_index, pair, source, target in records:
        count += 1
        if lang_pair is None:
            lang_pair = pair
        elif pair != lang_pair:
            raise CorpusError(
                f"line {line_no}: mixed lang_pair in one file ({pair!r} vs {lang_pair!r})"
            )
        try:
            seg = Segment(doc_id, seg_index, source.strip(), target.strip(), pair)
        except CorpusError as exc:
            raise CorpusError(f"line {line_no}: {exc}") from exc
        doc = by_doc.setdefault(doc_id, {})
        if seg_index in doc:
            raise CorpusError(
                f"line {line_no}: duplicate (doc_id, seg_index) = ({doc_id!r}, {seg_index})"
            )
        doc[seg_index] = seg
    if count == 0:
        raise CorpusError("no records")
    documents = []
    for doc_id in sorted(by_doc):
        segs = [by_doc[doc_id][i] for i in sorted(by_doc[doc_id])]
        documents.append(Document(doc_id, tuple(segs), segs[0].lang_pair))
    assert lang_pair is not None
    return Corpus(lang_pair, tuple(documents), provenance)


def _parse_tsv(path: Path):
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(TSV_COLUMNS):
                raise CorpusError(
                    f"line {line_no}: expected {len(TSV_COLUMNS)} tab-separated fields, "
                    f"got {len(parts)}"
                )
            doc_id, seg_index_s, pair, source, target = parts
            try:
                seg_index = int(seg_index_s)
            except ValueError as exc:
                raise CorpusError(f"line {line_no}: seg_index {seg_index_s!r} not an integer") from exc
            yield line_no, doc_id, seg_index, pair, source, target


def _parse_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {line_no}: record is not an object")
            missing = [k for k in TSV_COLUMNS if k not in obj]
            if missing:
                raise CorpusError(f"line {line_no}: missing keys {missing}")
            seg_index = obj["seg_index"]
            if not isinstance(seg_index, int) or isinstance(seg_index, bool):
                raise CorpusError(f"line {line_no}: seg_index {seg_index!r} not an integer")
            fields = []
            for key in ("doc_id", "lang_pair", "source", "target"):
                value = obj[key]
                if not isinstance(value, str):
                    raise CorpusError(f"line {line_no}: {key} is not a string")
                fields.append(value)
            doc_id, pair, source, target = fields
            yield line_no, doc_id, seg_index, pair, source, target


def load_corpus(path: str | Path, format: str) -> Corpus:
    """Load and validate a corpus file (``format`` is ``"tsv"`` or ``"jsonl"``)."""
    path = Path(path)
    if format == "tsv":
        records = _parse_tsv(path)
    elif format == "jsonl":
        records = _parse_jsonl(path)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    return _records_to_corpus(records, provenance=str(path))


def save_corpus(corpus: Corpus, path: str | Path, format: str) -> None:
    """Write ``corpus`` so that :func:`load_corpus` reproduces it."""
    path = Path(path)
    lines: list[str] = []
    for doc in corpus.documents:
        for seg in doc.segments:
            if format == "tsv":
                for text in (seg.source_text, seg.target_text):
                    if "\t" in text or "\n" in text or "\r" in text:
                        raise CorpusError(
                            f"doc {seg.doc_id!r} seg {seg.seg_index}: "
                            "tabs/newlines inside text are forbidden in TSV"
                        )
                lines.append(
                    "\t".join(
                        (seg.doc_id, str(seg.seg_index), seg.lang_pair,
                         seg.source_text, seg.target_text)
                    )
                )
            elif format == "jsonl":
                lines.append(
                    json.dumps(
                        {
                            "doc_id": seg.doc_id,
                            "seg_index": seg.seg_index,
                            "lang_pair": seg.lang_pair,
                            "source": seg.source_text,
                            "target": seg.target_text,
                        },
                        ensure_ascii=False,
                    )
                )
            else:
                raise CorpusError(f"unknown corpus format {format!r}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
