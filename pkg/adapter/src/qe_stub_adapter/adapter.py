"""Stub quality scorer speaking the line-delimited wire protocol.

serve_stdio() reads one JSON scoring request per input line, answers each
request with exactly one response line, and flushes after every write so the
caller's timeout clock always sees progress. The stub model rates a
hypothesis at -(character count)/1000, a hand-checkable stand-in for a
neural metric; a real model plugs in at load_model() but none ships here.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

from .errors import AdapterError

REQUEST_KEYS = ("id", "source", "hypothesis", "reference", "mode")
MODES = ("qe", "ref", "hybrid")


@dataclass(frozen=True)
class AdapterConfig:
    """How the adapter scores: which model, how many requests per batch.

    device and max_seq_len are hints for real models; the stub ignores them.
    """

    model: str = "stub"
    batch_size: int = 1
    device: str = "cpu"
    max_seq_len: int = 512

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_seq_len < 1:
            raise ValueError(f"max_seq_len must be >= 1, got {self.max_seq_len}")


def stub_score(hypothesis: str) -> float:
    """Deterministic placeholder rating: longer hypotheses score lower."""
    return -len(hypothesis) / 1000.0


def load_model(config: AdapterConfig) -> Callable[[Sequence[str]], list[float]]:
    """Resolve the configured model to a batch scoring function."""
    if config.model == "stub":
        return lambda hypotheses: [stub_score(h) for h in hypotheses]
    raise AdapterError(
        f"model {config.model!r} is not available: only 'stub' ships with this "
        "package; wire a real metric by extending load_model()")


def parse_request(line: str) -> dict:
    """Validate one request line against the wire protocol, or raise."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise AdapterError(f"request line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise AdapterError("request line is not a JSON object")
    missing = [k for k in REQUEST_KEYS if k not in obj]
    if missing:
        raise AdapterError(f"request missing key(s): {', '.join(missing)}")
    unknown = sorted(set(obj) - set(REQUEST_KEYS))
    if unknown:
        raise AdapterError(f"request has unknown key(s): {', '.join(unknown)}")
    if not isinstance(obj["id"], str):
        raise AdapterError("request id must be a string")
    for key in ("source", "hypothesis"):
        if not isinstance(obj[key], str):
            raise AdapterError(f"request {key} must be a string")
    mode = obj["mode"]
    if mode not in MODES:
        raise AdapterError(f"unknown mode {mode!r}")
    reference = obj["reference"]
    if reference is not None and not isinstance(reference, str):
        raise AdapterError("request reference must be a string or null")
    if mode in ("ref", "hybrid") and reference is None:
        raise AdapterError(f"mode {mode!r} requires a reference")
    return obj


def serve_stdio(config: AdapterConfig | None = None,
                stdin: TextIO | None = None,
                stdout: TextIO | None = None) -> int:
    """Answer scoring requests until the input stream ends.

    Returns the process exit code: 0 after a clean run, 2 after rejecting a
    malformed request with an ``{"error": ...}`` line. Requests are scored in
    batches of config.batch_size, but every response line is flushed the
    moment it is written.
    """
    config = config or AdapterConfig()
    score = load_model(config)
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(batch: list[dict]):
        for request, value in zip(batch, score([r["hypothesis"] for r in batch])):
            response = {"id": request["id"], "score": value,
                        "is_density": False, "spans": None}
            stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
            stdout.flush()

    pending: list[dict] = []
    for line in stdin:
        if not line.strip():
            continue
        try:
            pending.append(parse_request(line))
        except AdapterError as exc:
            stdout.write(json.dumps({"error": str(exc)}, ensure_ascii=False) + "\n")
            stdout.flush()
            return 2
        if len(pending) >= config.batch_size:
            emit(pending)
            pending = []
    emit(pending)
    return 0
