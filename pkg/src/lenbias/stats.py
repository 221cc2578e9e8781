"""Bias estimators over scored suites.

Everything here consumes scores already mapped to the internal
higher-is-better convention (see gateway.orient). Estimators are
deterministic: iteration follows sorted doc ids and sums are accumulated in
that fixed order.

Bias is reported as mean prediction minus true quality. Passage-group scores
are compared through delta curves (each group shifted so its first passage
sits at zero) so scorers with different scales remain comparable.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .normalize import group_normalize
from .suites import LengthBin, PassageGroup


@dataclass(frozen=True)
class BiasEstimate:
    """Systematic deviation of a scorer: bias = mean_prediction - true_quality."""

    mean_prediction: float
    true_quality: float
    bias: float
    n: int


@dataclass(frozen=True)
class DeltaPoint:
    mean_delta: float
    stddev: float
    n: int


# passage_index -> DeltaPoint
DeltaCurve = dict[int, DeltaPoint]


@dataclass(frozen=True)
class TrendResult:
    n_docs: int
    n_decreasing: int
    n_skipped: int
    proportion: float


@dataclass(frozen=True)
class PreferenceResult:
    """Shorter-hypothesis win rate in one relative-length-difference bin.

    Ties count as half a win. rate and the Wilson bounds are None for an
    empty bin.
    """

    threshold: float
    n_pairs: int
    shorter_wins: float
    rate: float | None
    ci_low: float | None
    ci_high: float | None


@dataclass(frozen=True)
class Histogram:
    lo: float
    hi: float
    bin_width: float
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int
    overflow: int


def bias_estimate(predictions: Sequence[float], true_quality: float) -> BiasEstimate:
    if not predictions:
        raise ValueError("cannot estimate bias from zero predictions")
    mean = float(np.mean(np.asarray(predictions, dtype=float)))
    return BiasEstimate(mean, true_quality, mean - true_quality, len(predictions))


def delta_curve(
    groups: Sequence[PassageGroup],
    scores: Mapping[str, Sequence[float]],
) -> DeltaCurve:
    """Per-index score deltas relative to each group's first passage.

    scores maps doc_id to that group's passage scores in passage order; every
    group must be fully scored. stddev is the population standard deviation.
    """
    deltas_by_index: dict[int, list[float]] = {}
    for group in sorted(groups, key=lambda g: g.doc_id):
        if group.doc_id not in scores:
            raise ValueError(f"missing score for doc {group.doc_id!r}")
        group_scores = list(scores[group.doc_id])
        if len(group_scores) != len(group.passages):
            raise ValueError(
                f"doc {group.doc_id!r}: {len(group_scores)} scores for "
                f"{len(group.passages)} passages"
            )
        for passage, delta in zip(group.passages, group_normalize(group_scores)):
            deltas_by_index.setdefault(passage.index, []).append(delta)
    curve: DeltaCurve = {}
    for index in sorted(deltas_by_index):
        values = np.asarray(deltas_by_index[index], dtype=float)
        curve[index] = DeltaPoint(float(values.mean()), float(values.std(ddof=0)),
                                  len(values))
    return curve


def slope_of_score_changes(curve: DeltaCurve) -> float:
    """Mean absolute change of mean_delta between consecutive passage indices."""
    indices = sorted(curve)
    if len(indices) < 2:
        raise ValueError("slope needs a curve with at least 2 indices")
    steps = [
        abs(curve[b].mean_delta - curve[a].mean_delta)
        for a, b in zip(indices, indices[1:])
    ]
    return math.fsum(steps) / len(steps)


def decreasing_trend_proportion(
    groups: Sequence[PassageGroup],
    scores: Mapping[str, Sequence[float]],
    first: int = 1,
    last: int = 5,
) -> TrendResult:
    """Share of groups whose passage `last` scores strictly below passage `first`.

    Groups lacking either index are skipped and counted in n_skipped.
    """
    if not (1 <= first < last):
        raise ValueError(f"need 1 <= first < last, got ({first}, {last})")
    n_docs = 0
    n_decreasing = 0
    n_skipped = 0
    for group in sorted(groups, key=lambda g: g.doc_id):
        if len(group.passages) < last:
            n_skipped += 1
            continue
        if group.doc_id not in scores:
            raise ValueError(f"missing score for doc {group.doc_id!r}")
        group_scores = scores[group.doc_id]
        if len(group_scores) != len(group.passages):
            raise ValueError(
                f"doc {group.doc_id!r}: {len(group_scores)} scores for "
                f"{len(group.passages)} passages"
            )
        n_docs += 1
        if group_scores[last - 1] < group_scores[first - 1]:
            n_decreasing += 1
    proportion = n_decreasing / n_docs if n_docs else 0.0
    return TrendResult(n_docs, n_decreasing, n_skipped, proportion)


def shorter_preference_rate(
    length_bin: LengthBin,
    scores: Mapping[str, tuple[float, float]],
    level: float = 0.95,
) -> PreferenceResult:
    """How often the shorter candidate outscores the longer one in a bin.

    scores maps chunk_id to (shorter score, longer score); a tie contributes
    half a win. The Wilson interval at `level` wraps the rate.
    """
    n = len(length_bin.pairs)
    if n == 0:
        return PreferenceResult(length_bin.threshold, 0, 0.0, None, None, None)
    wins = 0.0
    for pair in sorted(length_bin.pairs, key=lambda p: p.chunk_id):
        if pair.chunk_id not in scores:
            raise ValueError(f"missing scores for chunk {pair.chunk_id!r}")
        shorter_score, longer_score = scores[pair.chunk_id]
        if shorter_score > longer_score:
            wins += 1.0
        elif shorter_score == longer_score:
            wins += 0.5
    low, high = wilson_ci(wins, n, level)
    return PreferenceResult(length_bin.threshold, n, wins, wins / n, low, high)


def wilson_ci(successes: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Accepts fractional successes (tie-as-half-win counting). The bounds stay
    inside [0, 1] and degenerate cleanly: 0 successes pins the lower bound to
    0.0 exactly, n successes pins the upper bound to 1.0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= successes <= n:
        raise ValueError(f"successes {successes!r} outside [0, {n}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    z = statistics.NormalDist().inv_cdf((1.0 + level) / 2.0)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return low, high


def score_histogram(
    scores: Sequence[float],
    bin_width: float,
    lo: float,
    hi: float,
) -> Histogram:
    """Fixed-width histogram over [lo, hi]; top edge closed, outliers counted apart.

    Bins are half-open [edge, edge + width) except the last, which includes
    hi. Scores below lo or above hi land in underflow/overflow instead of a
    bin.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if not hi > lo:
        raise ValueError(f"range must satisfy hi > lo, got [{lo}, {hi}]")
    n_bins = max(1, math.ceil((hi - lo) / bin_width - 1e-9))
    edges = [lo + k * bin_width for k in range(n_bins)]
    edges.append(hi)  # top edge is hi even when the range is not a multiple of width
    counts = [0] * n_bins
    underflow = 0
    overflow = 0
    for score in scores:
        if score < lo:
            underflow += 1
        elif score > hi:
            overflow += 1
        else:
            k = min(int((score - lo) / bin_width), n_bins - 1)
            counts[k] += 1
    return Histogram(lo, hi, bin_width, tuple(edges), tuple(counts),
                     underflow, overflow)
