"""Line-oriented JSON transport for external adapters.

One JSON object per line, UTF-8, newline-terminated, compactly encoded (no
pretty-printing). Requests go to the adapter's stdin, responses come back on
its stdout; an alternative HTTP transport POSTs the same objects as a JSON
array. A response line beginning ``{"error":`` aborts the whole batch.

The subprocess plumbing uses a writer thread and a reader thread so large
batches cannot deadlock on full pipes, and enforces an inter-line timeout:
the clock resets whenever a response line arrives.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import urllib.error
import urllib.request
from typing import Sequence

from .errors import ProtocolError, ScorerError

_ERROR_PREFIX = '{"error":'
_EOF = object()


def encode_line(obj: dict) -> str:
    """Canonical wire encoding: compact JSON, raw UTF-8, insertion key order."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def decode_line(line: str) -> dict:
    """Parse one response line; an error object aborts the batch."""
    text = line.rstrip("\n")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed response line: {text[:200]!r} ({exc})") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(f"response line is not a JSON object: {text[:200]!r}")
    if "error" in obj:
        raise ProtocolError(f"adapter reported an error: {obj['error']}")
    return obj


class LineSession:
    """One adapter process handling one batch.

    send_all() writes every request line and closes stdin (end of input marks
    the end of the batch); read_line() then yields response lines until EOF.
    """

    def __init__(self, cmd: Sequence[str], timeout_secs: float = 120.0):
        self.cmd = tuple(cmd)
        self.timeout_secs = timeout_secs
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ScorerError(f"cannot launch adapter {self.cmd[0]!r}: {exc}") from exc
        self._out: queue.Queue = queue.Queue()
        self._stderr_chunks: list[str] = []
        self._write_error: list[BaseException] = []
        threading.Thread(target=self._drain_stdout, daemon=True).start()
        self._stderr_thread = threading.Thread(target=self._drain_stderr, daemon=True)
        self._stderr_thread.start()

    def _drain_stdout(self):
        try:
            for line in self._proc.stdout:
                self._out.put(line)
        finally:
            self._out.put(_EOF)

    def _drain_stderr(self):
        for line in self._proc.stderr:
            self._stderr_chunks.append(line)

    def send_all(self, lines: Sequence[str]):
        def write():
            try:
                for line in lines:
                    self._proc.stdin.write(line if line.endswith("\n") else line + "\n")
                self._proc.stdin.close()
            except (BrokenPipeError, OSError) as exc:
                self._write_error.append(exc)

        threading.Thread(target=write, daemon=True).start()

    def read_line(self, timeout_secs: float | None = None) -> str | None:
        """Next response line, or None at end of stream.

        Raises ProtocolError if no line arrives within the inter-line timeout.
        """
        limit = self.timeout_secs if timeout_secs is None else timeout_secs
        try:
            item = self._out.get(timeout=limit)
        except queue.Empty:
            self.kill()
            raise ProtocolError(
                f"adapter {self.cmd[0]!r} produced no response line within {limit:g}s"
            ) from None
        return None if item is _EOF else item

    @property
    def stderr_text(self) -> str:
        return "".join(self._stderr_chunks)

    def drain_stderr(self, timeout_secs: float = 2.0) -> str:
        """Final stderr text; waits briefly so a crash message is not lost
        to the race between the stdout EOF and the stderr drain thread."""
        try:
            self._proc.wait(timeout=timeout_secs)
        except subprocess.TimeoutExpired:
            pass
        self._stderr_thread.join(timeout=timeout_secs)
        return self.stderr_text

    def finish(self) -> int:
        try:
            return self._proc.wait(timeout=self.timeout_secs)
        except subprocess.TimeoutExpired:
            self.kill()
            raise ProtocolError(
                f"adapter {self.cmd[0]!r} did not exit after end of input"
            ) from None

    def kill(self):
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()


def exchange(
    cmd: Sequence[str],
    request_lines: Sequence[str],
    expected: int,
    timeout_secs: float = 120.0,
) -> list[str]:
    """Run one batch: write all request lines, read exactly `expected` responses.

    The batch is atomic: any protocol violation (error line, early EOF,
    timeout) raises and nothing partial is returned.
    """
    session = LineSession(cmd, timeout_secs)
    try:
        session.send_all(request_lines)
        lines = []
        for _ in range(expected):
            line = session.read_line()
            if line is None:
                detail = session.drain_stderr().strip()
                raise ProtocolError(
                    f"adapter closed its stream after {len(lines)} of {expected} "
                    f"responses" + (f" (stderr: {detail[:500]})" if detail else "")
                )
            if line.startswith(_ERROR_PREFIX):
                decode_line(line)  # raises with the adapter's message
                raise ProtocolError("adapter reported an error")
            lines.append(line)
        session.finish()
        return lines
    except BaseException:
        session.kill()
        raise


def http_exchange(url: str, payload: list[dict], timeout_secs: float = 120.0) -> list[dict]:
    """POST a batch as a JSON array; expect a JSON array of response objects."""
    body = json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout_secs) as response:
            raw = response.read()
    except urllib.error.HTTPError as exc:
        raise ScorerError(f"scorer endpoint {url} returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise ScorerError(f"cannot reach scorer endpoint {url}: {exc}") from exc
    try:
        parsed = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"scorer endpoint returned malformed JSON: {exc}") from exc
    if isinstance(parsed, dict) and "error" in parsed:
        raise ProtocolError(f"adapter reported an error: {parsed['error']}")
    if not isinstance(parsed, list):
        raise ProtocolError("scorer endpoint response is not a JSON array")
    out = []
    for item in parsed:
        if not isinstance(item, dict):
            raise ProtocolError("scorer endpoint response array holds a non-object")
        if "error" in item:
            raise ProtocolError(f"adapter reported an error: {item['error']}")
        out.append(item)
    return out
