"""
Cumulative passages expose score drift over length
==================================================

"""

import random

# Passage i of a document joins its first i segments on both sides. All
# passages of a group share the same true quality (the targets are
# error-free), so any score trend across the group is a length effect.
from lenbias import (Corpus, Document, ScoreRequest, ScorerSpec, Segment,
                     TokenCounter, build_passage_groups, decreasing_trend_proportion,
                     delta_curve, score_batch, slope_of_score_changes)

rng = random.Random(0)
words = ("the", "port", "cargo", "crane", "harbor", "ship", "dock", "quay")


def sentence(n):
    return " ".join(rng.choice(words) for _ in range(n)) + "."


docs = []
for d in range(40):
    doc_id = f"doc{d:03d}"
    segs = tuple(Segment(doc_id, i, sentence(rng.randint(5, 9)),
                         sentence(rng.randint(5, 9)), "en-de_DE")
                 for i in range(5))
    docs.append(Document(doc_id, segs, "en-de_DE"))
corpus = Corpus("en-de_DE", tuple(docs))

counter = TokenCounter(scheme="whitespace")
groups = build_passage_groups(corpus, counter, max_segments=5).groups
print(f"{len(groups)} passage groups, 5 passages each")

# A scorer with a planted penalty of 0.02 points per token stands in for a
# length-biased metric. Scores come back keyed by request id.
scorer = ScorerSpec(kind="synthetic_biased", params={"alpha": 0.02, "sigma": 0.1})
requests = [ScoreRequest(f"{g.doc_id}#p{p.index}", p.source_text,
                         p.hypothesis_text, None, "qe")
            for g in groups for p in g.passages]
scores = {r.id: r.score for r in score_batch(scorer, requests)}
by_doc = {g.doc_id: [scores[f"{g.doc_id}#p{p.index}"] for p in g.passages]
          for g in groups}

# The delta curve re-bases every document at its first passage, so a clean
# scorer sits at 0 everywhere and a length-biased one slopes downward.
curve = delta_curve(groups, by_doc)
print("\nindex  mean delta   stddev")
for index in sorted(curve):
    point = curve[index]
    print(f"  p{index}    {point.mean_delta:+8.3f}   {point.stddev:6.3f}")

trend = decreasing_trend_proportion(groups, by_doc)
print(f"\ndocuments scoring p5 below p1: {trend.n_decreasing}/{trend.n_docs}"
      f" = {trend.proportion:.1%}")
print(f"mean per-step drop: {slope_of_score_changes(curve):.3f} points")
