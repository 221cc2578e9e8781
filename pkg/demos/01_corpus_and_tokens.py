"""
Loading corpora and counting tokens
===================================

"""

import tempfile
from pathlib import Path

# A corpus is documents of pre-split bilingual segments. The target side is
# trusted post-edited text, so it can serve as an error-free hypothesis.
from lenbias import Corpus, Document, Segment, TokenCounter, count_tokens, load_corpus, save_corpus

segments = (
    Segment("news-001", 0, "The port reopened on Monday.",
            "Der Hafen öffnete am Montag wieder.", "en-de_DE"),
    Segment("news-001", 1, "Cargo traffic resumed within hours.",
            "Der Frachtverkehr lief binnen Stunden wieder an.", "en-de_DE"),
    Segment("news-001", 2, "Officials expect no lasting delays.",
            "Die Behörden erwarten keine dauerhaften Verzögerungen.", "en-de_DE"),
)
corpus = Corpus("en-de_DE", (Document("news-001", segments, "en-de_DE"),))

# Round trip through the TSV interchange format.
with tempfile.TemporaryDirectory() as scratch:
    path = Path(scratch) / "corpus.tsv"
    save_corpus(corpus, path, "tsv")
    reloaded = load_corpus(path, "tsv")
    print("TSV round trip intact:", reloaded == corpus)

# Token counting backs every length statistic. The whitespace scheme splits on
# runs of whitespace; the character scheme counts non-whitespace characters,
# which is the right unit for unsegmented scripts.
whitespace = TokenCounter(scheme="whitespace")
character = TokenCounter(scheme="character")
for segment in segments:
    text = segment.target_text
    print(f"{count_tokens(whitespace, text):3d} words "
          f"{count_tokens(character, text):3d} chars  {text}")

print("CJK needs the character scheme:",
      count_tokens(whitespace, "日本語の文"), "word vs",
      count_tokens(character, "日本語の文"), "chars")
