"""Protocol selftest: drive the upstream conformance runner at this adapter.

The adapter never imports the harness; the two packages meet only at the
wire protocol and the runner's command line. conformance_selftest() shells
out to ``lenbias conformance``, points it at an adapter command (this
package's own stub by default), and parses the PASS/FAIL verdict lines back
into structured results, tagging the two classic id failures.
"""

from __future__ import annotations

import re
import shutil
import subprocess
import sys
from dataclasses import dataclass
from typing import Sequence

from .errors import AdapterError

_VERDICT = re.compile(r"^(PASS|FAIL) (\S+): (.*)$")

# runner detail fragments mapped to the failure class they indicate
_DIAGNOSES = (
    ("no response for id", "missing id"),
    ("answered twice", "duplicate id"),
)


@dataclass(frozen=True)
class SelftestCheck:
    name: str
    passed: bool
    detail: str
    diagnosis: str = ""


def default_adapter_cmd() -> list[str]:
    return [sys.executable, "-m", "qe_stub_adapter", "--stub"]


def _find_runner() -> list[str]:
    path = shutil.which("lenbias")
    if path is None:
        raise AdapterError(
            "the conformance runner 'lenbias' is not on PATH; install the "
            "harness or pass runner_cmd explicitly")
    return [path]


def _diagnose(detail: str) -> str:
    for fragment, diagnosis in _DIAGNOSES:
        if fragment in detail:
            return diagnosis
    return ""


def conformance_selftest(adapter_cmd: Sequence[str] | None = None,
                         runner_cmd: Sequence[str] | None = None,
                         timeout_secs: float = 120.0) -> list[SelftestCheck]:
    """Run the shipped conformance vectors against an adapter command."""
    adapter = list(adapter_cmd) if adapter_cmd else default_adapter_cmd()
    runner = list(runner_cmd) if runner_cmd else _find_runner()
    cmd = [*runner, "conformance", "--timeout-secs", str(timeout_secs),
           "--", *adapter]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True,
                              encoding="utf-8")
    except FileNotFoundError as exc:
        raise AdapterError(f"cannot launch conformance runner: {exc}") from exc

    checks = []
    for line in proc.stdout.splitlines():
        match = _VERDICT.match(line)
        if match is None:
            continue
        verdict, name, detail = match.groups()
        checks.append(SelftestCheck(name, verdict == "PASS", detail,
                                    _diagnose(detail)))
    if not checks:
        err = proc.stderr.strip()[:200]
        raise AdapterError(
            "conformance runner produced no verdicts"
            + (f" (stderr: {err})" if err else f" (exit {proc.returncode})"))
    return checks
