"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: ConfigError -> 1, ProtocolError and
ScorerError -> 2, OSError -> 3.
"""

from __future__ import annotations


class LenBiasError(Exception):
    """Base class for all package errors."""


class CorpusError(LenBiasError):
    """Malformed or inconsistent corpus data."""


class CounterError(LenBiasError):
    """Token-counter misconfiguration or external counter process failure."""


class SuiteError(LenBiasError):
    """Probe-suite construction failure."""


class RuleInapplicableError(LenBiasError):
    """A perturbation rule cannot be applied to the given text."""

    def __init__(self, rule: str, reason: str):
        super().__init__(f"rule {rule!r} inapplicable: {reason}")
        self.rule = rule
        self.reason = reason


class PerturbationRejected(LenBiasError):
    """An external perturbation response violated the PerturbedGroup contract."""


class ProtocolError(LenBiasError):
    """Wire-protocol violation by an adapter or transport failure."""


class ScorerError(LenBiasError):
    """A scorer could not produce a valid batch of responses."""


class ConfigError(LenBiasError):
    """Invalid audit configuration."""
