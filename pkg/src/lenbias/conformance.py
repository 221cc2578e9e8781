"""Protocol conformance checks for external scorer adapters.

An adapter passes when it (1) echoes every request id exactly once with the
bytes intact across scripts and escapes, (2) keeps id bijection under
near-collision ids, (3) completes batches regardless of response order, and
(4) answers a malformed request with an ``{"error": ...}`` line and a nonzero
exit. The vectors lean on non-ASCII ids because the id echo is what proves
UTF-8 fidelity end to end.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import LenBiasError
from .wire import LineSession, encode_line

RESPONSE_KEYS = ("id", "score", "is_density", "spans")

# Unicode-heavy scoring requests: CJK, Arabic, Devanagari, emoji (with ZWJ),
# combining marks, and JSON-escaped characters in ids and texts.
VECTORS: tuple[dict, ...] = (
    {"id": "文档-一", "source": "这是一个短句。", "hypothesis": "Dies ist ein kurzer Satz.",
     "reference": None, "mode": "qe"},
    {"id": "وثيقة-٢", "source": "هذه جملة قصيرة.", "hypothesis": "This is a short sentence.",
     "reference": "This is a short sentence.", "mode": "ref"},
    {"id": "दस्तावेज़-3", "source": "यह एक छोटा वाक्य है।", "hypothesis": "Dies ist ein Satz.",
     "reference": None, "mode": "qe"},
    {"id": "doc-🌍-4", "source": "Emoji in ids 🌍 stay intact.",
     "hypothesis": "Emoji im Text 🌍 bleiben erhalten.", "reference": None, "mode": "qe"},
    {"id": "sciénce-5", "source": "Combining marks é survive.",
     "hypothesis": "Les accents é survivent.", "reference": None, "mode": "qe"},
    {"id": "quote-\"-6", "source": "Quotes \" and backslashes \\ are escaped.",
     "hypothesis": "Anführungszeichen \" und \\ werden maskiert.",
     "reference": None, "mode": "qe"},
    {"id": "tab-\t-7", "source": "Tabs\tand\nnewlines ride inside JSON strings.",
     "hypothesis": "Tabs\tund\nZeilenumbrüche bleiben.", "reference": None,
     "mode": "qe"},
    {"id": "👩‍🔬-8", "source": "ZWJ sequences 👩‍🔬 are multi-scalar.",
     "hypothesis": "ZWJ-Sequenzen 👩‍🔬 bestehen aus mehreren Skalaren.",
     "reference": "ZWJ-Sequenzen 👩‍🔬 bestehen aus mehreren Skalaren.", "mode": "hybrid"},
)

# ids an adapter might accidentally collapse by trimming or case-folding
_NEAR_COLLISION_IDS = ("a", "a ", " a", "A", "a ", "a-")

_MALFORMED_REQUEST = {"id": "bad-1", "source": "s", "hypothesis": "h",
                      "reference": None, "mode": "ref"}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def get_vectors() -> list[dict]:
    """A fresh copy of the conformance scoring requests."""
    return [dict(v) for v in VECTORS]


def _run_raw_batch(cmd: Sequence[str], requests: Sequence[dict],
                   timeout_secs: float) -> tuple[list[str], int, str]:
    session = LineSession(cmd, timeout_secs)
    try:
        session.send_all([encode_line(r) for r in requests])
        lines = []
        while True:
            line = session.read_line()
            if line is None:
                break
            lines.append(line.rstrip("\n"))
        code = session.finish()
        return lines, code, session.drain_stderr()
    except BaseException:
        session.kill()
        raise


def _validate_responses(lines: Sequence[str], expected_ids: Sequence[str]) -> str | None:
    """None when every id comes back exactly once with a well-formed response."""
    seen: dict[str, dict] = {}
    for line in lines:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            return f"unparseable response line: {line[:120]!r}"
        if not isinstance(obj, dict):
            return f"response line is not an object: {line[:120]!r}"
        if "error" in obj:
            return f"adapter sent an error line: {obj['error']!r}"
        missing = [k for k in RESPONSE_KEYS if k not in obj]
        if missing:
            return f"response missing key(s) {missing} for id {obj.get('id')!r}"
        rid = obj["id"]
        if rid in seen:
            return f"id {rid!r} answered twice"
        score = obj["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            return f"id {rid!r}: score is not a number"
        if not math.isfinite(float(score)):
            return f"id {rid!r}: score is not finite"
        if not isinstance(obj["is_density"], bool):
            return f"id {rid!r}: is_density is not a boolean"
        seen[rid] = obj
    unanswered = [i for i in expected_ids if i not in seen]
    if unanswered:
        return f"no response for id {unanswered[0]!r} ({len(unanswered)} missing)"
    unknown = [i for i in seen if i not in set(expected_ids)]
    if unknown:
        return f"response for unknown id {unknown[0]!r}"
    return None


def _batch_check(name: str, cmd: Sequence[str], requests: Sequence[dict],
                 timeout_secs: float, order_note: bool = False) -> CheckResult:
    ids = [r["id"] for r in requests]
    try:
        lines, code, stderr = _run_raw_batch(cmd, requests, timeout_secs)
    except LenBiasError as exc:
        return CheckResult(name, False, str(exc))
    problem = _validate_responses(lines, ids)
    if problem is not None:
        return CheckResult(name, False, problem)
    if code != 0:
        detail = stderr.strip()[:200]
        return CheckResult(name, False,
                           f"adapter exited {code} after a clean batch"
                           + (f" (stderr: {detail})" if detail else ""))
    detail = f"{len(ids)} ids echoed exactly, clean exit"
    if order_note:
        got = [json.loads(line)["id"] for line in lines]
        detail += "; responses arrived " + (
            "in request order" if got == ids else "permuted (accepted)")
    return CheckResult(name, True, detail)


def _error_line_check(cmd: Sequence[str], timeout_secs: float) -> CheckResult:
    name = "error_line"
    try:
        lines, code, stderr = _run_raw_batch(cmd, [_MALFORMED_REQUEST], timeout_secs)
    except LenBiasError as exc:
        return CheckResult(name, False, str(exc))
    error_lines = [line for line in lines if line.startswith('{"error":')]
    if not error_lines:
        got = lines[0][:120] if lines else "nothing"
        return CheckResult(name, False,
                           f"expected an error line for a malformed request, got {got!r}")
    if code == 0:
        return CheckResult(name, False,
                           "adapter exited 0 after rejecting a malformed request")
    return CheckResult(name, True,
                       f"error line emitted, exit {code}")


def run_conformance(adapter_cmd: Sequence[str],
                    timeout_secs: float = 120.0) -> list[CheckResult]:
    """Run all four checks against an adapter command; order is fixed."""
    collision_requests = [
        {"id": rid, "source": f"source {i}", "hypothesis": f"hypothesis {i}",
         "reference": None, "mode": "qe"}
        for i, rid in enumerate(_NEAR_COLLISION_IDS)
    ]
    return [
        _batch_check("utf8_id_echo", adapter_cmd, get_vectors(), timeout_secs),
        _batch_check("id_bijection", adapter_cmd, collision_requests, timeout_secs),
        _batch_check("ordering_freedom", adapter_cmd, get_vectors()[:6], timeout_secs,
                     order_note=True),
        _error_line_check(adapter_cmd, timeout_secs),
    ]


def all_passed(results: Sequence[CheckResult]) -> bool:
    return all(r.passed for r in results)
