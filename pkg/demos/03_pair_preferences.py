"""
Shorter-vs-longer preference rates with Wilson intervals
========================================================

"""

import random

# Each chunk offers several candidate translations of one source. Pairing the
# shortest against the longest isolates length: if a scorer is calibrated,
# neither side should win much more than half the time.
from lenbias import (Chunk, DEFAULT_THRESHOLDS, ScoreRequest, ScorerSpec,
                     TokenCounter, bin_pairs, build_hypothesis_pairs, score_batch)

rng = random.Random(1)
words = ("port", "crane", "cargo", "ship", "dock", "tide", "berth", "hull")


def text(n):
    return " ".join(rng.choice(words) for _ in range(n))


chunks = []
for c in range(120):
    base = rng.randint(220, 260)
    spread = rng.randint(5, 45)
    candidates = (text(base - spread), text(base), text(base + spread))
    chunks.append(Chunk(f"chunk{c:03d}", f"source {c}", text(base), candidates))

counter = TokenCounter(scheme="whitespace")
pairs = build_hypothesis_pairs(chunks, counter, min_tokens=200, max_tokens=500)
print(f"{len(pairs)} shorter/longer pairs; relative length differences "
      f"{min(p.rel_diff for p in pairs):.3f} to {max(p.rel_diff for p in pairs):.3f}")


def preference_table(label, scorer):
    requests = []
    for pair in pairs:
        requests.append(ScoreRequest(f"{pair.chunk_id}#short", pair.source_text,
                                     pair.shorter.text, None, "qe"))
        requests.append(ScoreRequest(f"{pair.chunk_id}#long", pair.source_text,
                                     pair.longer.text, None, "qe"))
    scores = {r.id: r.score for r in score_batch(scorer, requests)}
    by_chunk = {p.chunk_id: (scores[f"{p.chunk_id}#short"],
                             scores[f"{p.chunk_id}#long"]) for p in pairs}

    # Bins nest: a pair with an 11% difference appears in every bin up to 10%.
    from lenbias import shorter_preference_rate

    print(f"\n{label}: shorter-preference rate by minimum length difference")
    for length_bin in bin_pairs(pairs, DEFAULT_THRESHOLDS):
        result = shorter_preference_rate(length_bin, by_chunk)
        if result.rate is None:
            print(f"  >= {length_bin.threshold:5.1%}:   no pairs")
            continue
        print(f"  >= {length_bin.threshold:5.1%}: {result.rate:6.1%} of "
              f"{result.n_pairs} pairs  (95% CI {result.ci_low:.1%}..{result.ci_high:.1%})")


# An unbiased noisy scorer hovers around 50% in every bin.
preference_table("calibrated scorer",
                 ScorerSpec(kind="synthetic_biased", params={"sigma": 0.5, "seed": 3}))

# A per-token penalty makes the shorter candidate win almost always.
preference_table("length-biased scorer",
                 ScorerSpec(kind="synthetic_biased",
                            params={"alpha": 0.02, "sigma": 0.5, "seed": 3}))
