"""Command line entry: serve scoring requests on stdio, or run the selftest."""

from __future__ import annotations

import argparse
import io
import sys

from .adapter import AdapterConfig, serve_stdio
from .errors import AdapterError
from .selftest import conformance_selftest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qe-stub-adapter",
        description="Line-protocol scorer adapter; reads JSON requests on "
                    "stdin and writes one JSON response per request.")
    parser.add_argument("--model", default="stub",
                        help="model identifier (only 'stub' ships)")
    parser.add_argument("--stub", action="store_true",
                        help="force the stub model regardless of --model")
    parser.add_argument("--batch-size", type=int, default=1,
                        help="requests scored per internal batch")
    parser.add_argument("--device", default="cpu",
                        help="device hint for real models; stub ignores it")
    parser.add_argument("--max-seq-len", type=int, default=512,
                        help="sequence-length hint for real models")
    parser.add_argument("--selftest", action="store_true",
                        help="run the protocol conformance vectors against "
                             "this adapter and exit")
    parser.add_argument("--timeout-secs", type=float, default=120.0,
                        help="per-batch timeout used by --selftest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    model = "stub" if args.stub else args.model
    try:
        config = AdapterConfig(model=model, batch_size=args.batch_size,
                               device=args.device, max_seq_len=args.max_seq_len)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.selftest:
        adapter_cmd = [sys.executable, "-m", "qe_stub_adapter",
                       "--model", config.model,
                       "--batch-size", str(config.batch_size)]
        try:
            checks = conformance_selftest(adapter_cmd,
                                          timeout_secs=args.timeout_secs)
        except AdapterError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for check in checks:
            verdict = "PASS" if check.passed else "FAIL"
            note = f" [{check.diagnosis}]" if check.diagnosis else ""
            print(f"{verdict} {check.name}: {check.detail}{note}")
        return 0 if all(c.passed for c in checks) else 2

    # the protocol is UTF-8 regardless of locale
    stdin = io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8")
    stdout = io.TextIOWrapper(sys.stdout.buffer, encoding="utf-8",
                              write_through=True)
    try:
        return serve_stdio(config, stdin=stdin, stdout=stdout)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
