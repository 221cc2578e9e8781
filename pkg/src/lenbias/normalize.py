"""Error-density normalization.

A raw rating R over a hypothesis of |h| tokens hides a length dependence:
longer hypotheses accumulate more penalty. The density D = R / |h| removes
it, and R_hat = D * |h| restores a rating at any target length. A scorer
that natively emits densities can be wrapped so downstream analysis sees
length-rescaled ratings without knowing the difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import TokenCounter
from .gateway import ScorerSpec


def to_density(rating: float, length_tokens: int) -> float:
    """Per-token error density D = R / |h|."""
    if length_tokens < 1:
        raise ValueError(f"length_tokens must be >= 1, got {length_tokens}")
    return rating / length_tokens


def from_density(density: float, length_tokens: int) -> float:
    """Length-rescaled rating R_hat = D * |h|."""
    if length_tokens < 1:
        raise ValueError(f"length_tokens must be >= 1, got {length_tokens}")
    return density * length_tokens


@dataclass(frozen=True)
class DensityRecord:
    """One hypothesis's density alongside the rating it rescales to."""

    density: float
    length_tokens: int
    rating: float

    def __post_init__(self):
        if self.length_tokens < 1:
            raise ValueError(f"length_tokens must be >= 1, got {self.length_tokens}")
        expected = self.density * self.length_tokens
        if not math.isclose(self.rating, expected, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(
                f"rating {self.rating!r} is not density * length ({expected!r})"
            )


def group_normalize(scores: list[float]) -> list[float]:
    """Shift a group's passage scores so the first passage sits at 0.0 exactly."""
    if not scores:
        raise ValueError("cannot normalize an empty score list")
    first = scores[0]
    out = [s - first for s in scores]
    out[0] = 0.0
    return out


def wrap_density_scorer(scorer: ScorerSpec, counter: TokenCounter) -> ScorerSpec:
    """Wrap a density-emitting scorer so it returns length-rescaled ratings.

    The wrapped spec scores by delegating to `scorer` and multiplying each
    density by the hypothesis token count. Scoring raises if the inner scorer
    turns out not to emit densities (is_density false in any response).
    """
    return ScorerSpec(
        kind=scorer.kind,
        params=scorer.params,
        declared_orientation=scorer.declared_orientation,
        label=f"density({scorer.effective_label})",
        density_inner=scorer,
        density_counter=counter,
    )
