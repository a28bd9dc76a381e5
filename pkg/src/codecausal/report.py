"""Table and figure-data emitters.

Emits the descriptive feature table, the dedup summary, the study results
(CSV for machines, Markdown for reading) and the three exploratory figure
datasets with small deterministic SVG renderings. Everything here is pure
aggregation: same inputs, byte-identical outputs.
"""

from __future__ import annotations

import bisect
import math
from typing import Mapping, Sequence

from ._io import csv_text
from .testbeds import Testbed, DedupReport, TASK_OF_TESTBED, IO_OF_TESTBED
from . import tokenization

FEATURE_ORDER = ("n_whitespaces", "nloc", "token_count", "n_ast_errors",
                 "n_ast_levels", "n_ast_nodes", "complexity", "n_identifiers")

RESULT_BLOCKS = ("Performance Metrics", "Correlations", "Causal Effects")

CAUSAL_ROWS = ("ATE", "Placebo", "RCC", "Subset")

JS_CONVENTION = "sqrt_jsd_natural_log"


class ReportError(Exception):
    pass


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


# ---------------------------------------------------------------------------
# Descriptive table
# ---------------------------------------------------------------------------

def descriptive_table(testbeds: Sequence[Testbed]) -> str:
    """One row per testbed: size plus avg/std of every code feature,
    2-decimal formatting."""
    header = ["testbed", "size"]
    for feat in FEATURE_ORDER:
        header += [f"{feat}_avg", f"{feat}_std"]
    rows = []
    for bed in testbeds:
        if len(bed.points) == 0:
            raise ReportError(f"testbed {bed.name} is empty")
        row: list = [bed.name, len(bed.points)]
        for feat in FEATURE_ORDER:
            values = [getattr(tp.point.features, feat) for tp in bed.points]
            mean, std = _mean_std(values)
            row += [f"{mean:.2f}", f"{std:.2f}"]
        rows.append(row)
    return csv_text(header, rows)


def dedup_table(reports: Mapping[str, DedupReport]) -> str:
    """Dedup summary rows (task, testbed, io, before, dupes, rate, size)."""
    header = ["se_task", "testbed", "io", "before", "dupes", "dupe_pct",
              "size"]
    rows = []
    for name, rep in reports.items():
        rows.append([TASK_OF_TESTBED[name], name, IO_OF_TESTBED[name],
                     rep.before, rep.dupes, f"{rep.rate * 100:.2f}%",
                     rep.after])
    return csv_text(header, rows)


# ---------------------------------------------------------------------------
# Exploratory figure data
# ---------------------------------------------------------------------------

def jensen_shannon_distance(p: Mapping, q: Mapping) -> float:
    """sqrt(JSD) with natural log over the union support; disjoint supports
    reach the maximum sqrt(ln 2)."""
    support = set(p) | set(q)
    ps = sum(p.values())
    qs = sum(q.values())
    if ps == 0 or qs == 0:
        raise ReportError("distributions must have mass")
    div = 0.0
    for item in support:
        pi = p.get(item, 0) / ps
        qi = q.get(item, 0) / qs
        mi = (pi + qi) / 2.0
        if pi > 0:
            div += 0.5 * pi * math.log(pi / mi)
        if qi > 0:
            div += 0.5 * qi * math.log(qi / mi)
    return math.sqrt(max(div, 0.0))


def _token_counts(texts: Sequence[str], bpe: tokenization.BpeModel
                  ) -> dict[int, int]:
    counts: dict[int, int] = {}
    for text in texts:
        for tok in tokenization.encode(bpe, text):
            counts[tok] = counts.get(tok, 0) + 1
    return counts


def taxonomy_counts_csv(texts_by_group: Mapping[str, Sequence[str]],
                        bpe: tokenization.BpeModel,
                        taxonomy: tokenization.TaxonomyTable | None = None
                        ) -> str:
    """Figure A data: token count per taxonomy class per group."""
    taxonomy = taxonomy or tokenization.TaxonomyTable.default()
    header = ["group", "class", "count"]
    rows = []
    for group in sorted(texts_by_group):
        pieces: list[str] = []
        for text in texts_by_group[group]:
            pieces.extend(tokenization.encode_pieces(bpe, text))
        hist = tokenization.classify_tokens(pieces, taxonomy)
        for cls in tokenization.TAXONOMY_CLASSES:
            rows.append([group, cls, hist.get(cls, 0)])
    return csv_text(header, rows)


def token_distribution_csv(texts_by_group: Mapping[str, Sequence[str]],
                           truth_group: str,
                           bpe: tokenization.BpeModel) -> str:
    """Figure B data: per-group token counts and normalized frequencies,
    with each group's Jensen-Shannon distance to the ground truth."""
    if truth_group not in texts_by_group:
        raise ReportError(f"missing ground-truth group {truth_group!r}")
    counts = {g: _token_counts(texts, bpe)
              for g, texts in texts_by_group.items()}
    truth = counts[truth_group]
    header = ["group", "token_id", "token", "count", "frequency",
              "js_distance_to_truth", "js_convention"]
    id_to_tok = bpe.id_to_token()
    rows = []
    for group in sorted(counts):
        dist = jensen_shannon_distance(counts[group], truth)
        total = sum(counts[group].values())
        for tok_id in sorted(counts[group]):
            c = counts[group][tok_id]
            rows.append([group, tok_id, id_to_tok[tok_id], c,
                         f"{c / total:.10f}", f"{dist:.10f}", JS_CONVENTION])
    return csv_text(header, rows)


def similarity_proportion_csv(similarity_by_group: Mapping[str, Sequence[float]],
                              grid_step: float = 0.01) -> str:
    """Figure C data: proportion of points at or above each similarity
    level, per group. Curves start at 1.0 and never increase."""
    header = ["group", "threshold", "proportion"]
    rows = []
    steps = round(1.0 / grid_step)
    for group in sorted(similarity_by_group):
        sims = sorted(similarity_by_group[group])
        n = len(sims)
        if n == 0:
            raise ReportError(f"group {group!r} has no similarity values")
        for k in range(steps + 1):
            t = round(k * grid_step, 10)
            at_or_above = n - bisect.bisect_left(sims, t)
            rows.append([group, f"{t:.2f}", f"{at_or_above / n:.10f}"])
    return csv_text(header, rows)


def exploratory_figures(generated_by_group: Mapping[str, Sequence[str]],
                        ground_truth: Sequence[str],
                        similarity_by_group: Mapping[str, Sequence[float]],
                        bpe: tokenization.BpeModel,
                        taxonomy: tokenization.TaxonomyTable | None = None
                        ) -> dict[str, str]:
    """The three figure datasets (CSV texts) plus their SVG renderings,
    keyed by output filename."""
    groups = dict(generated_by_group)
    groups["ground_truth"] = list(ground_truth)
    tax_csv = taxonomy_counts_csv(groups, bpe, taxonomy)
    dist_csv = token_distribution_csv(groups, "ground_truth", bpe)
    prop_csv = similarity_proportion_csv(similarity_by_group)
    return {
        "taxonomy_counts.csv": tax_csv,
        "token_dist.csv": dist_csv,
        "similarity_proportion.csv": prop_csv,
        "taxonomy_counts.svg": _taxonomy_svg(tax_csv),
        "token_dist.svg": _token_dist_svg(dist_csv),
        "similarity_proportion.svg": _proportion_svg(prop_csv),
    }


# ---------------------------------------------------------------------------
# Results table (performance / correlations / causal effects)
# ---------------------------------------------------------------------------

def results_table(correlations: Mapping, ates: Mapping, refutations: Mapping,
                  metrics: Mapping) -> tuple[str, str]:
    """(CSV, Markdown) rendering of a full study run.

    Input shapes::

        metrics[treatment] = {"bleu": f, "codebleu": f,
                              "lev_sim_avg": f, "lev_sim_std": f}
        correlations[treatment][variable] = {"dist": r, "sim": r}
        ates[method][treatment] = {"dist": v, "sim_pct": v}
        refutations[method][treatment][refuter] = {"dist": v, "sim_pct": v,
                                                   "stable": bool}
    """
    for name, block in (("Performance Metrics", metrics),
                        ("Correlations", correlations),
                        ("Causal Effects", ates)):
        if not block:
            raise ReportError(f"missing results block: {name}")
    if not refutations or not any(refutations.values()):
        raise ReportError("missing results block: refutations")

    rows: list[list] = []
    treatments = sorted(metrics)

    for t in treatments:
        m = metrics[t]
        rows.append(["Performance Metrics", "Bleu", t, "value",
                     _fmt(m["bleu"])])
        rows.append(["Performance Metrics", "CodeBleu", t, "value",
                     _fmt(m["codebleu"])])
        rows.append(["Performance Metrics", "Avg. Lev.", t, "avg",
                     _fmt(m["lev_sim_avg"])])
        rows.append(["Performance Metrics", "Avg. Lev.", t, "std",
                     _fmt(m["lev_sim_std"])])

    # flag the single highest |distance correlation| across the block
    best = None
    for t, by_var in correlations.items():
        for var, r in by_var.items():
            if best is None or abs(r["dist"]) > abs(best[2]):
                best = (t, var, r["dist"])
    for t in sorted(correlations):
        for var, r in correlations[t].items():
            mark = "highest" if best and (t, var) == best[:2] else ""
            rows.append(["Correlations", var, t, "dist",
                         _fmt(r["dist"]) + (f" [{mark}]" if mark else "")])
            rows.append(["Correlations", var, t, "sim_pct",
                         _fmt(r["sim"] * 100.0) + "%"])

    for method in sorted(ates):
        for t in sorted(ates[method]):
            cell = ates[method][t]
            rows.append(["Causal Effects", f"{method}/ATE", t, "dist",
                         _fmt(cell["dist"])])
            rows.append(["Causal Effects", f"{method}/ATE", t, "sim_pct",
                         _fmt(cell["sim_pct"]) + "%"])
            for refuter in ("Placebo", "RCC", "Subset"):
                rcell = refutations[method][t][refuter.lower()]
                note = " [null-effect]" if refuter == "Placebo" and rcell["stable"] else ""
                rows.append(["Causal Effects", f"{method}/{refuter}", t,
                             "dist", _fmt(rcell["dist"])])
                rows.append(["Causal Effects", f"{method}/{refuter}", t,
                             "sim_pct", _fmt(rcell["sim_pct"]) + "%" + note])

    csv_out = csv_text(["block", "row", "treatment", "column", "value"], rows)
    md_out = _results_markdown(rows, treatments)
    return csv_out, md_out


def _fmt(v) -> str:
    if v is None:
        return "-"
    return f"{v:.4f}".rstrip("0").rstrip(".") if isinstance(v, float) else str(v)


def _results_markdown(rows: Sequence[Sequence], treatments: Sequence[str]) -> str:
    by_block: dict[str, dict[str, dict[tuple[str, str], str]]] = {}
    for block, row, treatment, column, value in rows:
        by_block.setdefault(block, {}).setdefault(row, {})[(treatment, column)] = value
    lines = []
    for block in RESULT_BLOCKS:
        if block not in by_block:
            continue
        lines.append(f"## {block}")
        lines.append("")
        columns = sorted({key for cells in by_block[block].values()
                          for key in cells})
        head = "| row | " + " | ".join(f"{t} {c}" for t, c in columns) + " |"
        sep = "|" + "---|" * (len(columns) + 1)
        lines.append(head)
        lines.append(sep)
        for row_name, cells in by_block[block].items():
            line = [row_name] + [cells.get(key, "-") for key in columns]
            lines.append("| " + " | ".join(line) + " |")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Minimal deterministic SVG renderers
# ---------------------------------------------------------------------------

_W, _H, _PAD = 640, 360, 48
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#9467bd", "#8c564b")


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<title>{title}</title>',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]


def _polyline(points: Sequence[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in points)
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{coords}"/>')


def _legend(lines: list[str], names: Sequence[str]) -> None:
    for i, name in enumerate(names):
        color = _COLORS[i % len(_COLORS)]
        y = _PAD / 2 + 14 * i
        lines.append(f'<rect x="{_W - 150}" y="{y - 8}" width="10" height="10" '
                     f'fill="{color}"/>')
        lines.append(f'<text x="{_W - 134}" y="{y}" font-size="11" '
                     f'font-family="sans-serif">{name}</text>')


def _parse_csv_text(text: str) -> tuple[list[str], list[list[str]]]:
    from ._io import read_csv
    return read_csv(text, from_text=True)


def _taxonomy_svg(tax_csv: str) -> str:
    _, rows = _parse_csv_text(tax_csv)
    groups = sorted({r[0] for r in rows})
    classes = [c for c in tokenization.TAXONOMY_CLASSES]
    counts = {(r[0], r[1]): int(r[2]) for r in rows}
    peak = max(counts.values()) or 1
    lines = _svg_open("token counts per taxonomy class")
    band = (_W - 2 * _PAD) / len(classes)
    bar_w = band / (len(groups) + 1)
    for ci, cls in enumerate(classes):
        for gi, g in enumerate(groups):
            v = counts.get((g, cls), 0)
            h = (v / peak) * (_H - 2 * _PAD)
            x = _PAD + ci * band + gi * bar_w
            y = _H - _PAD - h
            color = _COLORS[gi % len(_COLORS)]
            lines.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                         f'height="{h:.1f}" fill="{color}"/>')
        lines.append(f'<text x="{_PAD + ci * band + band / 2:.1f}" '
                     f'y="{_H - _PAD + 14}" font-size="9" text-anchor="middle" '
                     f'font-family="sans-serif">{cls}</text>')
    _legend(lines, groups)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _token_dist_svg(dist_csv: str) -> str:
    _, rows = _parse_csv_text(dist_csv)
    by_group: dict[str, list[float]] = {}
    for r in rows:
        by_group.setdefault(r[0], []).append(float(r[4]))
    lines = _svg_open("token frequency distribution (rank ordered)")
    for gi, group in enumerate(sorted(by_group)):
        freqs = sorted(by_group[group], reverse=True)
        peak = freqs[0] if freqs else 1.0
        pts = []
        for i, f in enumerate(freqs):
            x = _PAD + (i / max(len(freqs) - 1, 1)) * (_W - 2 * _PAD)
            y = _H - _PAD - (f / peak) * (_H - 2 * _PAD)
            pts.append((x, y))
        lines.append(_polyline(pts, _COLORS[gi % len(_COLORS)]))
    _legend(lines, sorted(by_group))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _proportion_svg(prop_csv: str) -> str:
    _, rows = _parse_csv_text(prop_csv)
    by_group: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        by_group.setdefault(r[0], []).append((float(r[1]), float(r[2])))
    lines = _svg_open("similarity proportion curves")
    for gi, group in enumerate(sorted(by_group)):
        pts = []
        for t, p in sorted(by_group[group]):
            x = _PAD + t * (_W - 2 * _PAD)
            y = _H - _PAD - p * (_H - 2 * _PAD)
            pts.append((x, y))
        lines.append(_polyline(pts, _COLORS[gi % len(_COLORS)]))
    _legend(lines, sorted(by_group))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
