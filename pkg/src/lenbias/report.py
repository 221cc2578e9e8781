"""Report assembly and rendering.

A BiasReport is a JSON-able snapshot of one audit run: delta curves, trends,
preference tables, slopes, histograms, and bias estimates per scorer. Tables
render to CSV with banker's rounding (percentages to 1 decimal, scores to 2);
the JSON mirror keeps full precision. Charts render to self-contained SVG
built from fixed templates, so rerunning an audit reproduces every output
file byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

from .stats import (BiasEstimate, DeltaCurve, DeltaPoint, Histogram,
                    PreferenceResult, TrendResult)

ROUNDING_NOTE = ("tables round half-to-even: percentages to 1 decimal place, "
                 "scores to 2; this JSON mirror is unrounded")

EMPTY_CELL = "— (0)"  # em dash marker for bins with no pairs

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


# --- rounding -----------------------------------------------------------------

def round_half_even(value: float, decimals: int) -> str:
    """Display rounding with banker's tie-breaking; never returns '-0.0'."""
    quantum = Decimal(1).scaleb(-decimals)
    result = Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_EVEN)
    if result == 0:
        result = abs(result)
    return str(result)


def fmt_pct(fraction: float) -> str:
    """A proportion in [0, 1] as a percentage with 1 decimal, e.g. 0.801 -> '80.1'."""
    return round_half_even(fraction * 100.0, 1)


def fmt_score(value: float) -> str:
    return round_half_even(value, 2)


def preference_cell(result_dict: Mapping) -> str:
    """Table cell 'rate (n)', e.g. '55.4 (101)'; empty bins render '— (0)'."""
    n = result_dict["n_pairs"]
    if n == 0:
        return EMPTY_CELL
    return f"{fmt_pct(result_dict['rate'])} ({n})"


# --- dataclass -> dict codecs ---------------------------------------------------

def delta_curve_to_dict(curve: DeltaCurve) -> dict:
    return {
        str(index): {"mean_delta": p.mean_delta, "stddev": p.stddev, "n": p.n}
        for index, p in sorted(curve.items())
    }


def delta_curve_from_dict(obj: Mapping) -> DeltaCurve:
    return {
        int(index): DeltaPoint(p["mean_delta"], p["stddev"], p["n"])
        for index, p in obj.items()
    }


def trend_to_dict(trend: TrendResult) -> dict:
    return {"n_docs": trend.n_docs, "n_decreasing": trend.n_decreasing,
            "n_skipped": trend.n_skipped, "proportion": trend.proportion}


def preference_to_dict(pref: PreferenceResult) -> dict:
    return {"threshold": pref.threshold, "n_pairs": pref.n_pairs,
            "shorter_wins": pref.shorter_wins, "rate": pref.rate,
            "ci_low": pref.ci_low, "ci_high": pref.ci_high}


def histogram_to_dict(hist: Histogram) -> dict:
    return {"lo": hist.lo, "hi": hist.hi, "bin_width": hist.bin_width,
            "edges": list(hist.edges), "counts": list(hist.counts),
            "underflow": hist.underflow, "overflow": hist.overflow}


def bias_to_dict(estimate: BiasEstimate) -> dict:
    return {"mean_prediction": estimate.mean_prediction,
            "true_quality": estimate.true_quality,
            "bias": estimate.bias, "n": estimate.n}


# --- report container -----------------------------------------------------------

@dataclass
class BiasReport:
    """One audit run's findings, JSON-able and loss-free.

    scorers maps scorer label to a block holding delta_curves, slopes,
    trends, preferences, histogram, bias, and perturbations entries (see
    audit.run_audit for the exact shape); failures maps scorer labels to
    the error that knocked them out of the run.
    """

    metadata: dict = field(default_factory=dict)
    scorers: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {"metadata": self.metadata, "scorers": self.scorers,
                   "failures": self.failures}
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2,
                          allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BiasReport":
        obj = json.loads(text)
        return cls(metadata=obj.get("metadata", {}),
                   scorers=obj.get("scorers", {}),
                   failures=obj.get("failures", {}))


def slugify(label: str) -> str:
    slug = re.sub(r"[^a-z0-9._-]+", "-", label.lower()).strip("-")
    return slug or "scorer"


def _scorer_slugs(report: BiasReport) -> dict[str, str]:
    slugs: dict[str, str] = {}
    used: set[str] = set()
    for label in sorted(report.scorers):
        slug = slugify(label)
        candidate, k = slug, 2
        while candidate in used:
            candidate = f"{slug}-{k}"
            k += 1
        used.add(candidate)
        slugs[label] = candidate
    return slugs


def direction_of(lang_pair: str) -> str:
    """Bucket a lang pair by translation direction: en-xx, xx-en, or other."""
    src, _, tgt = lang_pair.partition("-")
    if src.split("_")[0].lower() == "en":
        return "en-xx"
    if tgt.split("_")[0].lower() == "en":
        return "xx-en"
    return "other"


def _write_text(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    os.replace(tmp, path)


# --- CSV tables -------------------------------------------------------------------

def _csv_text(rows: Iterable[Sequence[str]]) -> str:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def _fmt_threshold(threshold: float) -> str:
    return f"{threshold * 100:g}%"


def emit_tables(report: BiasReport, out_dir: str) -> list[str]:
    """Write the CSV tables plus the unrounded report.json mirror."""
    os.makedirs(out_dir, exist_ok=True)
    slugs = _scorer_slugs(report)
    written: list[str] = []

    for label in sorted(report.scorers):
        block = report.scorers[label]
        slug = slugs[label]

        trends = block.get("trends", {})
        if trends:
            rows = [("language", "n_docs", "proportion")]
            for series in sorted(s for s in trends if s != "aggregate"):
                t = trends[series]
                rows.append((series, str(t["n_docs"]), fmt_pct(t["proportion"])))
            if "aggregate" in trends:
                t = trends["aggregate"]
                rows.append(("aggregate", str(t["n_docs"]), fmt_pct(t["proportion"])))
            path = os.path.join(out_dir, f"trend_{slug}.csv")
            _write_text(path, _csv_text(rows))
            written.append(path)

        preferences = block.get("preferences", {})
        by_direction: dict[str, list[str]] = {}
        for series in sorted(preferences):
            direction = ("aggregate" if series.startswith("aggregate")
                         else direction_of(series))
            if series.startswith("aggregate:"):
                direction = series.split(":", 1)[1]
            by_direction.setdefault(direction, []).append(series)
        for direction in sorted(d for d in by_direction if d != "aggregate"):
            series_names = by_direction[direction]
            thresholds = [cell["threshold"] for cell in preferences[series_names[0]]]
            rows = [("language", *(_fmt_threshold(t) for t in thresholds))]
            aggregate_key = f"aggregate:{direction}"
            for series in series_names:
                if series.startswith("aggregate"):
                    continue
                cells = preferences[series]
                rows.append((series, *(preference_cell(c) for c in cells)))
            if aggregate_key in preferences:
                cells = preferences[aggregate_key]
                rows.append(("aggregate", *(preference_cell(c) for c in cells)))
            path = os.path.join(out_dir, f"preference_{slug}_{direction}.csv")
            _write_text(path, _csv_text(rows))
            written.append(path)

    slope_rows = [("scorer", "series", "slope")]
    bias_rows = [("scorer", "probe", "n", "mean_prediction", "true_quality", "bias")]
    for label in sorted(report.scorers):
        block = report.scorers[label]
        for series in sorted(block.get("slopes", {})):
            slope_rows.append((label, series, fmt_score(block["slopes"][series])))
        for probe in sorted(block.get("bias", {})):
            b = block["bias"][probe]
            bias_rows.append((label, probe, str(b["n"]), fmt_score(b["mean_prediction"]),
                              fmt_score(b["true_quality"]), fmt_score(b["bias"])))
    if len(slope_rows) > 1:
        path = os.path.join(out_dir, "slopes.csv")
        _write_text(path, _csv_text(slope_rows))
        written.append(path)
    if len(bias_rows) > 1:
        path = os.path.join(out_dir, "bias.csv")
        _write_text(path, _csv_text(bias_rows))
        written.append(path)

    mirror = os.path.join(out_dir, "report.json")
    _write_text(mirror, report.to_json())
    written.append(mirror)
    return written


# --- SVG charts ---------------------------------------------------------------------

_W, _H = 800, 500
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 620, 50, 440


def _scale(values: Sequence[float], lo_px: float, hi_px: float):
    vmin, vmax = min(values), max(values)
    if vmin == vmax:
        vmin -= 1.0
        vmax += 1.0
    pad = 0.05 * (vmax - vmin)
    vmin -= pad
    vmax += pad
    span = vmax - vmin

    def to_px(v: float) -> float:
        return lo_px + (v - vmin) / span * (hi_px - lo_px)

    return to_px, vmin, vmax


def _ticks(vmin: float, vmax: float, count: int = 5) -> list[float]:
    step = (vmax - vmin) / (count - 1)
    return [vmin + i * step for i in range(count)]


def _fmt_coord(value: float) -> str:
    return f"{value:.2f}"


def _fmt_tick(value: float) -> str:
    return f"{value:.3g}"


def svg_line_chart(
    series: Mapping[str, Sequence[tuple[float, float]]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """800x500 line chart: one polyline per series, legend on the right."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="28" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]
    labels = sorted(series)
    points = [p for name in labels for p in series[name]]
    if points:
        x_px, xmin, xmax = _scale([p[0] for p in points], _LEFT, _RIGHT)
        y_px, ymin, ymax = _scale([p[1] for p in points], _BOTTOM, _TOP)
        for tick in _ticks(xmin, xmax):
            px = _fmt_coord(x_px(tick))
            parts.append(f'<line x1="{px}" y1="{_BOTTOM}" x2="{px}" y2="{_BOTTOM + 5}" '
                         f'stroke="black"/>')
            parts.append(f'<text x="{px}" y="{_BOTTOM + 20}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">'
                         f'{escape(_fmt_tick(tick))}</text>')
        for tick in _ticks(ymin, ymax):
            py = _fmt_coord(y_px(tick))
            parts.append(f'<line x1="{_LEFT - 5}" y1="{py}" x2="{_LEFT}" y2="{py}" '
                         f'stroke="black"/>')
            parts.append(f'<text x="{_LEFT - 8}" y="{py}" text-anchor="end" '
                         f'dominant-baseline="middle" font-family="sans-serif" '
                         f'font-size="11">{escape(_fmt_tick(tick))}</text>')
        for i, name in enumerate(labels):
            color = _PALETTE[i % len(_PALETTE)]
            coords = " ".join(
                f"{_fmt_coord(x_px(x))},{_fmt_coord(y_px(y))}" for x, y in series[name]
            )
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                         f'points="{coords}" data-series={quoteattr(name)}/>')
            ly = _TOP + 18 * i
            parts.append(f'<line x1="{_RIGHT + 10}" y1="{ly}" x2="{_RIGHT + 30}" '
                         f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{_RIGHT + 35}" y="{ly + 4}" '
                         f'font-family="sans-serif" font-size="12">'
                         f'{escape(name)}</text>')
    else:
        parts.append(f'<text x="{_W // 2}" y="{_H // 2}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">no data</text>')
    parts.append(f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_BOTTOM}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{_LEFT}" y1="{_BOTTOM}" x2="{_RIGHT}" y2="{_BOTTOM}" '
                 f'stroke="black"/>')
    parts.append(f'<text x="{(_LEFT + _RIGHT) // 2}" y="{_H - 12}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="13">'
                 f'{escape(x_label)}</text>')
    parts.append(f'<text x="18" y="{(_TOP + _BOTTOM) // 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 18 {(_TOP + _BOTTOM) // 2})">'
                 f'{escape(y_label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_bar_chart(hist: Mapping, title: str) -> str:
    """800x500 bar chart of a score histogram, outliers noted in the subtitle."""
    edges = hist["edges"]
    counts = hist["counts"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="28" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
        f'<text x="{_W // 2}" y="44" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11">underflow {hist["underflow"]}, overflow '
        f'{hist["overflow"]}</text>',
    ]
    if counts:
        x_px, xmin, xmax = _scale([edges[0], edges[-1]], _LEFT, _RIGHT)
        top_count = max(max(counts), 1)
        y_px, _, _ = _scale([0.0, float(top_count)], _BOTTOM, _TOP)
        for k, count in enumerate(counts):
            x0 = x_px(edges[k])
            x1 = x_px(edges[k + 1])
            y0 = y_px(float(count))
            parts.append(
                f'<rect x="{_fmt_coord(x0)}" y="{_fmt_coord(y0)}" '
                f'width="{_fmt_coord(max(x1 - x0 - 1.0, 0.5))}" '
                f'height="{_fmt_coord(_BOTTOM - y0)}" fill="{_PALETTE[0]}"/>'
            )
        for tick in _ticks(xmin, xmax):
            px = _fmt_coord(x_px(tick))
            parts.append(f'<text x="{px}" y="{_BOTTOM + 20}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">'
                         f'{escape(_fmt_tick(tick))}</text>')
        for tick in _ticks(0.0, float(top_count)):
            py = _fmt_coord(y_px(tick))
            parts.append(f'<text x="{_LEFT - 8}" y="{py}" text-anchor="end" '
                         f'dominant-baseline="middle" font-family="sans-serif" '
                         f'font-size="11">{escape(_fmt_tick(tick))}</text>')
    parts.append(f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_BOTTOM}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{_LEFT}" y1="{_BOTTOM}" x2="{_RIGHT}" y2="{_BOTTOM}" '
                 f'stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_charts(report: BiasReport, out_dir: str) -> list[str]:
    """Write delta, preference, and histogram SVGs per scorer."""
    os.makedirs(out_dir, exist_ok=True)
    slugs = _scorer_slugs(report)
    written: list[str] = []
    for label in sorted(report.scorers):
        block = report.scorers[label]
        slug = slugs[label]

        curves = block.get("delta_curves", {})
        if curves:
            series = {
                name: [(float(idx), point["mean_delta"])
                       for idx, point in sorted(((int(i), p) for i, p in curve.items()))]
                for name, curve in curves.items()
            }
            path = os.path.join(out_dir, f"delta_{slug}.svg")
            _write_text(path, svg_line_chart(
                series, f"score delta vs passage index ({label})",
                "passage index", "mean delta"))
            written.append(path)

        preferences = block.get("preferences", {})
        if preferences:
            series = {}
            for name, cells in preferences.items():
                pts = [(c["threshold"] * 100.0, c["rate"] * 100.0)
                       for c in cells if c["rate"] is not None]
                if pts:
                    series[name] = pts
            path = os.path.join(out_dir, f"preference_{slug}.svg")
            _write_text(path, svg_line_chart(
                series, f"shorter-preference rate vs length difference ({label})",
                "relative length difference (%)", "shorter preferred (%)"))
            written.append(path)

        hist = block.get("histogram")
        if hist:
            path = os.path.join(out_dir, f"histogram_{slug}.svg")
            _write_text(path, svg_bar_chart(hist, f"score distribution ({label})"))
            written.append(path)
    return written


def write_report(report: BiasReport, out_dir: str) -> list[str]:
    """Render everything: CSV tables, the JSON mirror, and SVG charts."""
    return emit_tables(report, out_dir) + emit_charts(report, out_dir)
