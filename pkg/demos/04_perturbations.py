"""
Planting one controlled MQM error per passage group
===================================================

"""

# A perturbation edits only the first segment of a group and leaves every
# later segment byte-identical, so the edited passages stay a prefix chain
# and the quality drop is exactly one annotated error: -1 minor, -5 major.
from lenbias import (Corpus, Document, Segment, TokenCounter,
                     build_passage_groups, mqm_score, perturb_with_fallback)

targets = (
    "There are 42 cranes in the harbor today.",
    "They load grain onto the waiting ships.",
    "Nobody expects delays before the weekend.",
)
segs = tuple(Segment("harbor", i, f"source sentence {i}.", t, "en-de_DE")
             for i, t in enumerate(targets))
corpus = Corpus("en-de_DE", (Document("harbor", segs, "en-de_DE"),))
group = build_passage_groups(corpus, TokenCounter(scheme="whitespace")).groups[0]

print("base first segment:", targets[0])
for severity, dimension in (("minor", "accuracy"), ("major", "accuracy"),
                            ("minor", "fluency"), ("major", "fluency")):
    pg = perturb_with_fallback(group, severity, dimension, seed=5)
    annotation = pg.annotations[0]
    edited = pg.hypotheses[0]
    marked = (edited[:annotation.start] + "[" +
              edited[annotation.start:annotation.end] + "]" +
              edited[annotation.end:])
    print(f"\n{severity}/{dimension} via rule {pg.spec.rule!r} "
          f"(gold {pg.gold_rating:+.0f}):")
    print(" ", marked)

    # Locality check: every longer passage is the edited first segment plus
    # the untouched original suffix.
    base_first = group.passages[0].hypothesis_text
    suffixes_ok = all(
        hyp == edited + passage.hypothesis_text[len(base_first):]
        for passage, hyp in zip(group.passages, pg.hypotheses))
    print("  suffixes untouched:", suffixes_ok)

# Gold ratings are plain MQM arithmetic over the annotation list.
from lenbias import MqmAnnotation

mixed = [MqmAnnotation(0, 3, "minor", "fluency"),
         MqmAnnotation(4, 9, "major", "accuracy"),
         MqmAnnotation(9, 12, "minor", "accuracy")]
print("\nmqm_score of two minors and one major:", mqm_score(mixed))
