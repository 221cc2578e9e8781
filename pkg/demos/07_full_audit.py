"""
Running a full audit from one config file
=========================================

"""

import json
import random
import tempfile
from pathlib import Path

from lenbias import load_config, run_audit, write_report

rng = random.Random(11)
VOCAB = ("der die das hafen markt zug stadt fluss brief garten monat "
         "winter strasse turm insel wald").split()


def sentence(n_tokens):
    words = [rng.choice(VOCAB) for _ in range(n_tokens)]
    return (" ".join(words) + ".").capitalize()


with tempfile.TemporaryDirectory() as scratch:
    scratch = Path(scratch)

    # A small synthetic corpus: 12 documents of 5 segments each, one headerless
    # row per segment (doc_id, seg_index, lang_pair, source, target). The first
    # segment plants a numeral so the perturbation stage has something to shift
    # when it fabricates a known-severity error.
    with open(scratch / "corpus.tsv", "w", encoding="utf-8") as fh:
        for d in range(12):
            first = f"Es gibt {40 + d} Steine im Hof."
            fh.write(f"news-{d:03d}\t0\ten-de_DE\t{sentence(6)}\t{first}\n")
            for i in range(1, 5):
                fh.write(f"news-{d:03d}\t{i}\ten-de_DE\t{sentence(6)}\t"
                         f"{sentence(rng.randint(5, 9))}\n")

    # Chunk candidates for the pairwise probe: one reference, three candidate
    # translations whose lengths straddle it.
    with open(scratch / "chunks.jsonl", "w", encoding="utf-8") as fh:
        for c in range(24):
            base = rng.randint(26, 34)
            delta = rng.choice([1, 2, 3, 4, 6])
            record = {
                "chunk_id": f"chunk{c:03d}",
                "source": sentence(base),
                "reference": sentence(base),
                "candidates": [sentence(base - delta), sentence(base),
                               sentence(base + delta)],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    # One config drives the whole run. The calibrated scorer has no length
    # term; the biased one docks 0.03 per token, which a stakeholder would
    # experience as systematically cheap long translations.
    config_obj = {
        "corpora": [{"path": "corpus.tsv", "format": "tsv"}],
        "chunks": [{"path": "chunks.jsonl", "lang_pair": "en-de_DE"}],
        "suite": {"max_segments": 5, "window_tokens": 200,
                  "min_chunk_tokens": 10, "max_chunk_tokens": 80},
        "scorers": [
            {"label": "calibrated", "kind": "synthetic_biased",
             "params": {"alpha": 0.0, "sigma": 0.3, "seed": 7}},
            {"label": "length-biased", "kind": "synthetic_biased",
             "params": {"alpha": 0.03, "sigma": 0.1, "seed": 7}},
        ],
        "perturbations": [{"severity": "minor", "dimension": "accuracy",
                           "rule": "numeral_shift"}],
        "seed": 11,
    }
    config_path = scratch / "audit.json"
    config_path.write_text(json.dumps(config_obj, indent=2), encoding="utf-8")

    report = run_audit(load_config(str(config_path)))

    # Each scorer block carries the same battery of measurements, so the two
    # labels can be compared cell by cell.
    for label, block in report.scorers.items():
        trend = block["trends"]["aggregate"]
        print(f"{label}:")
        print(f"  decreasing-trend share  {trend['proportion']:.2f}  "
              f"({trend['n_decreasing']}/{trend['n_docs']} documents)")
        prefs = block["preferences"].get("aggregate",
                                         next(iter(block["preferences"].values())))
        for cell in (prefs[0], prefs[-1]):
            if cell["rate"] is None:
                continue
            print(f"  shorter wins at >={cell['threshold']:.3f}  "
                  f"{cell['rate']:.2f}  (n={cell['n_pairs']})")
        for category, bias in sorted(block["bias"].items()):
            print(f"  bias[{category}]  {bias['bias']:+.3f}  "
                  f"(true quality {bias['true_quality']:+.1f}, n={bias['n']})")
        for category, probe in sorted(block["perturbations"].items()):
            bias = probe["bias"]
            print(f"  perturbed[{category}]  {bias['bias']:+.3f}  "
                  f"(gold {probe['gold_rating']:+.1f}, "
                  f"{probe['n_groups']} groups)")
        print()

    # write_report renders the JSON report plus per-scorer CSV tables and SVG
    # charts, ready to drop into a review doc.
    written = write_report(report, str(scratch / "report"))
    for path in written:
        print("wrote", Path(path).name)

    trend_csv = scratch / "report" / "trend_length-biased.csv"
    print()
    print(trend_csv.read_text(encoding="utf-8").strip())
