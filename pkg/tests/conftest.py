"""Shared fixtures: corpus factories and scripted external processes."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

import lenbias as lb

HELPERS = Path(__file__).parent / "helpers"

# Vocabulary with material for every perturbation rule: auxiliaries, digits,
# capitalized nouns, function words, and sentence-final punctuation comes from
# the sentence builder itself.
WORDS = ("the", "quick", "brown", "Fox", "jumps", "over", "a", "lazy", "dog",
         "is", "near", "Berlin", "river", "with", "42", "stones", "green",
         "Anna", "reads", "books", "slowly", "was", "walking", "home")


def make_sentence(rng: random.Random, n_tokens: int) -> str:
    words = [rng.choice(WORDS) for _ in range(n_tokens)]
    return " ".join(words) + "."


def make_corpus(n_docs: int = 5, n_segs: int = 5, lang: str = "en-de_DE",
                seed: int = 0, min_tokens: int = 4, max_tokens: int = 12,
                growing: bool = False) -> lb.Corpus:
    """Synthetic bilingual corpus; growing=True makes later segments longer."""
    rng = random.Random(seed)
    docs = []
    for d in range(n_docs):
        doc_id = f"doc{d:03d}"
        segs = []
        for i in range(n_segs):
            if growing:
                n = min_tokens + i * 3 + rng.randint(0, 2)
            else:
                n = rng.randint(min_tokens, max_tokens)
            segs.append(lb.Segment(doc_id, i, make_sentence(rng, n),
                                   make_sentence(rng, n), lang))
        docs.append(lb.Document(doc_id, tuple(segs), lang))
    return lb.Corpus(lang, tuple(docs))


def make_chunks(n_chunks: int = 10, seed: int = 0, ref_tokens: int = 250,
                spread: int = 40) -> list[lb.Chunk]:
    """Chunks whose candidates straddle the reference length by up to `spread`."""
    rng = random.Random(seed)
    chunks = []
    for c in range(n_chunks):
        ref = " ".join(rng.choice(WORDS) for _ in range(ref_tokens))
        candidates = []
        for k in range(3):
            n = ref_tokens - spread + k * spread + rng.randint(0, 5)
            candidates.append(" ".join(rng.choice(WORDS) for _ in range(max(1, n))))
        chunks.append(lb.Chunk(f"chunk{c:03d}", f"source text {c}", ref,
                               tuple(candidates)))
    return chunks


@pytest.fixture
def corpus_factory():
    return make_corpus


@pytest.fixture
def chunk_factory():
    return make_chunks


@pytest.fixture
def echo_adapter():
    """Command factory for the scriptable scorer adapter."""
    def cmd(*flags: str) -> list[str]:
        return [sys.executable, str(HELPERS / "echo_adapter.py"), *flags]
    return cmd


@pytest.fixture
def edit_adapter():
    """Command factory for the scriptable perturbation adapter."""
    def cmd(*flags: str) -> list[str]:
        return [sys.executable, str(HELPERS / "edit_adapter.py"), *flags]
    return cmd


@pytest.fixture
def word_counter_cmd():
    """Command factory for the line-protocol token counter."""
    def cmd(mode: str = "words") -> tuple[str, ...]:
        return (sys.executable, str(HELPERS / "word_counter.py"), mode)
    return cmd


def write_corpus_tsv(corpus: lb.Corpus, path: Path):
    lb.save_corpus(corpus, path, "tsv")


def write_chunks_jsonl(chunks, path: Path):
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps({
                "chunk_id": chunk.chunk_id, "source": chunk.source,
                "reference": chunk.reference, "candidates": list(chunk.candidates),
            }, ensure_ascii=False) + "\n")
