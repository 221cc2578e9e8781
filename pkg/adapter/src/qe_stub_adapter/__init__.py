"""Reference stdio scorer adapter for the lenbias wire protocol.

Speaks protocol v1 on stdin/stdout with a deterministic stub model, so the
harness side of the boundary can be exercised without model weights. The
selftest drives the harness's own conformance runner at this adapter.
"""

from .adapter import (MODES, REQUEST_KEYS, AdapterConfig, load_model,
                      parse_request, serve_stdio, stub_score)
from .errors import AdapterError
from .selftest import SelftestCheck, conformance_selftest, default_adapter_cmd

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig", "AdapterError", "MODES", "REQUEST_KEYS", "SelftestCheck",
    "conformance_selftest", "default_adapter_cmd", "load_model",
    "parse_request", "serve_stdio", "stub_score",
]
