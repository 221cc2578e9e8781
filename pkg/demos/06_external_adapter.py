"""
Plugging in an external scorer over the line protocol
=====================================================

"""

import sys
import tempfile
import textwrap
from pathlib import Path

# Any executable that reads request lines on stdin and writes response lines
# on stdout can act as a scorer. This throwaway adapter rates a hypothesis by
# its character count; real adapters wrap a model the same way.
ADAPTER = textwrap.dedent('''\
    import json, sys

    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            if req.get("mode") in ("ref", "hybrid") and req.get("reference") is None:
                raise ValueError(f"mode {req['mode']} needs a reference")
            score = -len(req["hypothesis"]) / 1000.0
        except Exception as exc:
            sys.stdout.write(json.dumps({"error": str(exc)}) + "\\n")
            sys.exit(2)
        sys.stdout.write(json.dumps({"id": req["id"], "score": score,
                                     "is_density": False, "spans": None},
                                    ensure_ascii=False) + "\\n")
        sys.stdout.flush()
''')

from lenbias import ScoreRequest, ScorerSpec, run_conformance, score_batch

with tempfile.TemporaryDirectory() as scratch:
    adapter_path = Path(scratch) / "char_adapter.py"
    adapter_path.write_text(ADAPTER, encoding="utf-8")
    command = [sys.executable, str(adapter_path)]

    scorer = ScorerSpec(kind="external_subprocess", params={"command": command},
                        label="chars")
    requests = [
        ScoreRequest("r1", "short source", "Der Hafen ist offen.", None, "qe"),
        ScoreRequest("r2", "short source", "Der Hafen ist seit Montag wieder "
                     "für den gesamten Frachtverkehr geöffnet.", None, "qe"),
        ScoreRequest("文-3", "unicode id", "許多字元", None, "qe"),
    ]
    for response in score_batch(scorer, requests):
        print(f"{response.id:>4}: {response.score:+.3f}")

    # The conformance suite checks what the gateway relies on: ids echo back
    # byte-identically and exactly once, response order is free, and a
    # malformed request draws an error line plus a nonzero exit.
    print()
    for result in run_conformance(command, timeout_secs=60):
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
