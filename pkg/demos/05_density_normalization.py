"""
Error density as a length-stable score scale
============================================

"""

import random

# A raw error rating grows with hypothesis length even at constant quality;
# dividing by length gives an error density that does not. to_density and
# from_density convert between the two scales.
from lenbias import from_density, to_density

rating, length = -6.0, 240
density = to_density(rating, length)
print(f"rating {rating} over {length} tokens -> density {density:.4f}")
print("round trip recovers the rating:", from_density(density, length))

rng = random.Random(7)
worst = 0.0
for _ in range(5000):
    r, n = rng.uniform(-25.0, 0.0), rng.randint(1, 2000)
    worst = max(worst, abs(from_density(to_density(r, n), n) - r))
print(f"worst round-trip error over 5000 random pairs: {worst:.2e}")

# End to end: a scorer that predicts densities gets wrapped so downstream
# statistics see ratings again. A density model that is exact on error-free
# text (density 0) produces a flat delta curve; the raw per-token-penalty
# scorer produces a sloped one.
from lenbias import (Corpus, Document, ScoreRequest, ScorerSpec, Segment,
                     TokenCounter, build_passage_groups, delta_curve,
                     mean_token_increment, score_batch, slope_of_score_changes,
                     wrap_density_scorer)

words = ("tide", "berth", "cargo", "crane", "hull", "quay")
docs = []
for d in range(20):
    doc_id = f"doc{d:02d}"
    segs = tuple(Segment(doc_id, i,
                         " ".join(rng.choice(words) for _ in range(6)) + ".",
                         " ".join(rng.choice(words) for _ in range(6)) + ".",
                         "en-de_DE") for i in range(5))
    docs.append(Document(doc_id, segs, "en-de_DE"))
counter = TokenCounter(scheme="whitespace")
groups = build_passage_groups(Corpus("en-de_DE", tuple(docs)), counter).groups
requests = [ScoreRequest(f"{g.doc_id}#p{p.index}", p.source_text,
                         p.hypothesis_text, None, "qe")
            for g in groups for p in g.passages]


def slope_of(scorer):
    scores = {r.id: r.score for r in score_batch(scorer, requests)}
    by_doc = {g.doc_id: [scores[f"{g.doc_id}#p{p.index}"] for p in g.passages]
              for g in groups}
    return slope_of_score_changes(delta_curve(groups, by_doc))


alpha = 0.05
raw = ScorerSpec(kind="synthetic_biased", params={"alpha": alpha})
flat = wrap_density_scorer(
    ScorerSpec(kind="synthetic_biased", params={"emit_density": True},
               label="flat-density"),
    counter)
print(f"\nraw scorer slope:      {slope_of(raw):.4f} "
      f"(alpha x mean increment = {alpha * mean_token_increment(groups):.4f})")
print(f"density model slope:   {slope_of(flat):.4f}")
